"""Connections on the circle-action groupoid over the plane, in closed form.

Arrows are pairs (theta, m) with source m and target R(theta) m (or m itself
for the trivial action). A connection is encoded by a row covector field
a(theta, m): the horizontal lift of a base vector v at the arrow (theta, m)
is the tangent-arrow vector (a(theta,m) v, v) in (angle, source) coordinates,
and its effect is the rank-one correction of the rotation

    effect(theta, m) = R(theta) + (J R(theta) m) a(theta, m),

with J the circle generator. The division cocycle of a divisible pair
g = (theta_g, m), h = (theta_h, m) sends u at the target of h to the
tangent-arrow vector ((a_g - a_h) effect_h^{-1} u, u) at g h^-1, and the
multiplicative average integrates it over the fiber with the uniform
quadrature rule on N nodes:

    abar(theta, m) = (1/N) sum_j [a(theta+phi_j, mj) - a(phi_j, mj)]
                             . effect(phi_j, mj)^{-1},   mj = R(-phi_j) m.

Sample base points are radii x N base angles, a grid closed under the node
rotations, so the whole iteration stays on grid and the degree-N/4 Fourier
refit is exact for band-limited fields. Node angles and grid points form a
finite subgroupoid (Z_N acting on the grid); all defects are measured over
its composable pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import HypothesisViolation, InvalidInput

J = np.array([[0.0, -1.0], [1.0, 0.0]])
DEGENERACY_TOL = 1e-10  # |det effect| below this raises
ORIGIN_EXCLUSION = 1e-6
NEAR_EFF_COEFF = 1.0 / 9.0


def rot(theta):
    """Rotation matrices R(theta), vectorized over the leading shape."""
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    out = np.empty(theta.shape + (2, 2))
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    return out


def spectral_norm_2x2(mats):
    """Largest singular value of a stack of 2x2 matrices, in closed form."""
    m = np.asarray(mats)
    q = np.sum(m * m, axis=(-2, -1))
    det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    disc = np.sqrt(np.maximum(q * q - 4.0 * det * det, 0.0))
    return np.sqrt(np.maximum(0.5 * (q + disc), 0.0))


def mul_2x2(a, b):
    """Stacked 2x2 matrix product without einsum overhead."""
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    out[..., 0, 0] = a[..., 0, 0] * b[..., 0, 0] + a[..., 0, 1] * b[..., 1, 0]
    out[..., 0, 1] = a[..., 0, 0] * b[..., 0, 1] + a[..., 0, 1] * b[..., 1, 1]
    out[..., 1, 0] = a[..., 1, 0] * b[..., 0, 0] + a[..., 1, 1] * b[..., 1, 0]
    out[..., 1, 1] = a[..., 1, 0] * b[..., 0, 1] + a[..., 1, 1] * b[..., 1, 1]
    return out


def row_mul_2x2(v, m):
    """Stacked row-covector times 2x2 matrix."""
    out = np.empty(np.broadcast_shapes(v.shape, m.shape[:-2] + (2,)))
    out[..., 0] = v[..., 0] * m[..., 0, 0] + v[..., 1] * m[..., 1, 0]
    out[..., 1] = v[..., 0] * m[..., 0, 1] + v[..., 1] * m[..., 1, 1]
    return out


def inv_2x2(mats, context: str = "effect"):
    """Inverse of a stack of 2x2 matrices; raises on |det| < 1e-10."""
    m = np.asarray(mats, dtype=float)
    det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    bad = np.abs(det) < DEGENERACY_TOL
    if np.any(bad):
        idx = tuple(int(i[0]) for i in np.nonzero(bad))
        raise HypothesisViolation(
            f"degenerate {context} (|det| < {DEGENERACY_TOL:g}) at index {idx}",
            witness=idx)
    out = np.empty_like(m)
    out[..., 0, 0] = m[..., 1, 1]
    out[..., 0, 1] = -m[..., 0, 1]
    out[..., 1, 0] = -m[..., 1, 0]
    out[..., 1, 1] = m[..., 0, 0]
    return out / det[..., None, None]


# ---------------------------------------------------------------------------
# the sampled groupoid

@dataclass(eq=False)
class CircleActionGroupoid:
    """Quadrature order, action flag, and the rotation-closed sample grid."""

    order: int
    action: str  # "rotation" or "trivial"
    points: np.ndarray  # (n_points, 2)
    radii: np.ndarray | None = None  # rotation grid metadata, one entry per annulus

    def __post_init__(self):
        if self.order < 4:
            raise InvalidInput("quadrature order must be at least 4")
        if self.action not in ("rotation", "trivial"):
            raise InvalidInput(f"unknown action flag {self.action!r}")
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if self.action == "rotation":
            if self.radii is None:
                raise InvalidInput("rotation action requires the radii grid")
            self.radii = np.asarray(self.radii, dtype=float)
            if self.radii.size == 0 or self.radii.min() < ORIGIN_EXCLUSION:
                raise InvalidInput(
                    f"rotation sample radii must stay outside {ORIGIN_EXCLUSION:g} of the origin")
            want = _rotation_grid(self.order, self.radii)
            if self.points.shape != want.shape or not np.allclose(self.points, want, atol=1e-12):
                raise InvalidInput("rotation sample points must be the radii x angle grid")
        self.points.flags.writeable = False

    @classmethod
    def rotation(cls, order: int, radii) -> "CircleActionGroupoid":
        radii = np.asarray(radii, dtype=float)
        return cls(order=order, action="rotation",
                   points=_rotation_grid(order, radii), radii=radii)

    @classmethod
    def trivial(cls, order: int, points) -> "CircleActionGroupoid":
        return cls(order=order, action="trivial", points=points, radii=None)

    @property
    def n_points(self) -> int:
        return len(self.points)

    @property
    def node_angles(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.order) / self.order

    def rotation_perm(self, k: int) -> np.ndarray:
        """Index permutation p -> index of R(phi_k) m_p on the sample grid."""
        if self.action == "trivial":
            return np.arange(self.n_points)
        n = self.order
        base = np.arange(self.n_points)
        r, i = divmod(base, n)
        return r * n + (i + k) % n

    def point_index(self, m, tol: float = 1e-9) -> int:
        """Index of a sample point, matched within tol."""
        d = np.linalg.norm(self.points - np.asarray(m, dtype=float), axis=1)
        p = int(np.argmin(d))
        if d[p] > tol:
            raise InvalidInput(f"point {m} is not on the sample grid (closest at {d[p]:.3e})")
        return p

    def orbit_of_point(self) -> np.ndarray:
        """Orbit label per sample point: annulus index (rotation) or point index."""
        if self.action == "rotation":
            return np.arange(self.n_points) // self.order
        return np.arange(self.n_points)


def _rotation_grid(order: int, radii) -> np.ndarray:
    ang = 2.0 * np.pi * np.arange(order) / order
    circle = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    return np.concatenate([r * circle for r in np.asarray(radii, dtype=float)], axis=0)


# ---------------------------------------------------------------------------
# connection fields

@dataclass(frozen=True)
class FieldTerm:
    """coeff * trig(harmonic * theta) * m1^p m2^q, coeff a row covector."""

    trig: str  # "cos" or "sin"
    harmonic: int
    power: tuple[int, int]
    coeff: tuple[float, float]


class FourierPolyField:
    """Closed-form field: Fourier series in theta with polynomial coefficients in m."""

    def __init__(self, terms, unital: bool = True):
        self.terms = [t if isinstance(t, FieldTerm) else FieldTerm(**t) for t in terms]
        self.unital = unital
        for t in self.terms:
            if t.trig not in ("cos", "sin"):
                raise InvalidInput(f"unknown trig kind {t.trig!r}")
            if t.harmonic < 0 or (t.trig == "sin" and t.harmonic == 0):
                raise InvalidInput(f"bad harmonic {t.harmonic} for {t.trig}")
        if unital:
            sums: dict[tuple[int, int], np.ndarray] = {}
            for t in self.terms:
                if t.trig == "cos":
                    sums[t.power] = sums.get(t.power, np.zeros(2)) + np.asarray(t.coeff)
            for p, s in sums.items():
                if np.abs(s).max() > 1e-12:
                    raise InvalidInput(
                        f"field marked unital but a(0, m) has residual {s} at power {p}")

    @property
    def degree(self) -> int:
        return max((t.harmonic for t in self.terms), default=0)

    def scaled(self, factor: float) -> "FourierPolyField":
        return FourierPolyField(
            [FieldTerm(t.trig, t.harmonic, t.power,
                       (factor * t.coeff[0], factor * t.coeff[1]))
             for t in self.terms],
            unital=self.unital)

    def evaluate(self, theta: float, m) -> np.ndarray:
        m = np.asarray(m, dtype=float)
        out = np.zeros(2)
        for t in self.terms:
            trig = math.cos(t.harmonic * theta) if t.trig == "cos" else math.sin(t.harmonic * theta)
            out += trig * (m[0] ** t.power[0]) * (m[1] ** t.power[1]) * np.asarray(t.coeff)
        return out

    def node_values(self, gpd: CircleActionGroupoid) -> np.ndarray:
        """a at all (node angle, sample point) pairs, shape (order, n_points, 2)."""
        thetas = gpd.node_angles
        pts = gpd.points
        out = np.zeros((gpd.order, gpd.n_points, 2))
        for t in self.terms:
            trig = np.cos(t.harmonic * thetas) if t.trig == "cos" else np.sin(t.harmonic * thetas)
            mono = (pts[:, 0] ** t.power[0]) * (pts[:, 1] ** t.power[1])
            out += trig[:, None, None] * mono[None, :, None] * np.asarray(t.coeff)[None, None, :]
        return out


class SampledField:
    """Field known on the sample grid: per-point Fourier series in theta.

    Values are stored at the quadrature nodes after least-squares truncation
    to ``degree`` harmonics (for uniform nodes this is an FFT truncation);
    the dropped mass is recorded as ``refit_residual``.
    """

    def __init__(self, gpd: CircleActionGroupoid, values: np.ndarray,
                 degree: int | None = None, pre_truncated: bool = False):
        self.gpd = gpd
        values = np.asarray(values, dtype=float)
        if values.shape != (gpd.order, gpd.n_points, 2):
            raise InvalidInput(f"sampled field has shape {values.shape}, expected "
                               f"({gpd.order}, {gpd.n_points}, 2)")
        self.degree = gpd.order // 4 if degree is None else int(degree)
        if self.degree >= gpd.order // 2:
            raise InvalidInput("refit degree must be below order/2")
        spectrum = np.fft.rfft(values, axis=0)
        trunc = spectrum.copy()
        trunc[self.degree + 1:] = 0.0
        if pre_truncated:
            # values already went through the projection (e.g. reloaded from
            # disk); keep them bitwise so serialization round-trips exactly
            self.values = values
            self.refit_residual = 0.0
        else:
            self.values = np.fft.irfft(trunc, n=gpd.order, axis=0)
            self.refit_residual = float(np.abs(self.values - values).max())
        self._spectrum = trunc

    def node_values(self, gpd: CircleActionGroupoid) -> np.ndarray:
        if gpd is not self.gpd and not (
                gpd.order == self.gpd.order and gpd.action == self.gpd.action
                and np.array_equal(gpd.points, self.gpd.points)):
            raise InvalidInput("sampled field belongs to a different sample grid")
        return self.values

    def evaluate(self, theta: float, m) -> np.ndarray:
        p = self.gpd.point_index(m)
        n = self.gpd.order
        k = np.arange(self._spectrum.shape[0])
        w = np.full(len(k), 2.0)
        w[0] = 1.0
        if n % 2 == 0:
            w[-1] = 1.0
        phase = np.exp(1j * k * theta) * w
        return np.real(phase @ self._spectrum[:, p, :]) / n

    def max_abs(self) -> float:
        return float(np.abs(self.values).max())


def node_values(gpd: CircleActionGroupoid, field) -> np.ndarray:
    return field.node_values(gpd)


def field_difference(gpd: CircleActionGroupoid, f1, f2) -> float:
    """Sup distance of two fields over the sampled arrows."""
    return float(np.abs(node_values(gpd, f1) - node_values(gpd, f2)).max())


# ---------------------------------------------------------------------------
# effect of a connection

def effect(gpd: CircleActionGroupoid, field, theta: float, m) -> np.ndarray:
    """The 2x2 effect matrix R(theta) + (J R(theta) m) a(theta, m).

    For the trivial action the target map equals the source map and the
    effect is the identity regardless of the field.
    """
    if gpd.action == "trivial":
        return np.eye(2)
    m = np.asarray(m, dtype=float)
    r = rot(theta)
    a = field.evaluate(theta, m)
    return r + np.outer(J @ r @ m, a)


def effect_nodes(gpd: CircleActionGroupoid, values: np.ndarray) -> np.ndarray:
    """Effect at all (node, point) pairs from field node values; (N, P, 2, 2)."""
    n, p = gpd.order, gpd.n_points
    if gpd.action == "trivial":
        return np.broadcast_to(np.eye(2), (n, p, 2, 2)).copy()
    r = rot(gpd.node_angles)  # (N, 2, 2)
    u = np.einsum("ab,jbc,pc->jpa", J, r, gpd.points)  # J R(phi_j) m_p
    return r[:, None, :, :] + u[..., :, None] * values[..., None, :]


def effect_determinant(gpd: CircleActionGroupoid, field, theta: float, m) -> float:
    """det effect = 1 + a(theta, m) . J m (matrix determinant lemma)."""
    if gpd.action == "trivial":
        return 1.0
    m = np.asarray(m, dtype=float)
    return 1.0 + float(field.evaluate(theta, m) @ (J @ m))


# ---------------------------------------------------------------------------
# tangent-arrow vectors and the division cocycle

@dataclass
class TangentArrowVector:
    """Tangent vector at an arrow in (angle, source-velocity) coordinates."""

    theta: float
    m: np.ndarray  # base arrow source point
    angular: float
    base: np.ndarray  # velocity of the source point, (2,)


def tangent_target(gpd: CircleActionGroupoid, w: TangentArrowVector) -> np.ndarray:
    """Velocity of the target point under the tangent of the target map."""
    if gpd.action == "trivial":
        return np.asarray(w.base, dtype=float)
    r = rot(w.theta)
    return w.angular * (J @ r @ w.m) + r @ w.base


def compose_tangent(gpd: CircleActionGroupoid, wp: TangentArrowVector,
                    w: TangentArrowVector, tol: float = 1e-9) -> TangentArrowVector:
    """Composition in the tangent groupoid: angular parts add, base parts match."""
    target = rot(w.theta) @ w.m if gpd.action == "rotation" else w.m
    if np.abs(np.asarray(wp.m) - target).max() > tol:
        raise InvalidInput("tangent vectors sit over non-composable arrows")
    if np.abs(np.asarray(wp.base) - tangent_target(gpd, w)).max() > tol:
        raise InvalidInput("tangent vectors are not composable (source/target velocities differ)")
    return TangentArrowVector(theta=wp.theta + w.theta, m=np.asarray(w.m, dtype=float),
                              angular=wp.angular + w.angular,
                              base=np.asarray(w.base, dtype=float))


@dataclass
class DivisionCocycle:
    """The linear map u -> ((a_g - a_h) effect_h^{-1} u, u) at the arrow g h^-1."""

    theta: float  # angle of g h^-1
    m: np.ndarray  # source point of g h^-1 (the target of h)
    angular_row: np.ndarray  # (2,)

    def apply(self, u) -> TangentArrowVector:
        u = np.asarray(u, dtype=float)
        return TangentArrowVector(theta=self.theta, m=self.m,
                                  angular=float(self.angular_row @ u), base=u)


def division_cocycle(gpd: CircleActionGroupoid, field, g, h) -> DivisionCocycle:
    """Division cocycle of a divisible pair g = (theta_g, m), h = (theta_h, m).

    Both arrows must share their source point. Raises when the effect at h is
    degenerate (|det| < 1e-10).
    """
    theta_g, mg = g
    theta_h, mh = h
    mg = np.asarray(mg, dtype=float)
    if np.abs(mg - np.asarray(mh, dtype=float)).max() > 1e-12:
        raise InvalidInput("pair is not divisible: sources differ")
    lam_h = effect(gpd, field, theta_h, mg)
    det = lam_h[0, 0] * lam_h[1, 1] - lam_h[0, 1] * lam_h[1, 0]
    if abs(det) < DEGENERACY_TOL:
        raise HypothesisViolation(f"degenerate effect at divisor arrow (det {det:.3e})")
    a_g = field.evaluate(theta_g, mg)
    a_h = field.evaluate(theta_h, mg)
    target = rot(theta_h) @ mg if gpd.action == "rotation" else mg
    return DivisionCocycle(theta=theta_g - theta_h, m=target,
                           angular_row=(a_g - a_h) @ np.linalg.inv(lam_h))


# ---------------------------------------------------------------------------
# the multiplicative average

def average_connection(gpd: CircleActionGroupoid, field) -> SampledField:
    """Haar average of the division cocycle over every target fiber.

    Evaluates abar on the sample grid (closed under the node rotations) and
    refits the angle dependence at degree order/4. The result is unital to
    roundoff: the integrand vanishes identically at theta = 0.
    """
    values = node_values(gpd, field)
    lam_inv = inv_2x2(effect_nodes(gpd, values), context="effect at quadrature node")
    n = gpd.order
    acc = np.zeros_like(values)
    for j in range(n):
        back = gpd.rotation_perm(-j)  # p -> index of R(-phi_j) m_p
        shifted = np.roll(values, -j, axis=0)[:, back]  # a(phi_{t+j}, R(-phi_j) m_p)
        base = values[j, back]
        acc += row_mul_2x2(shifted - base[None], lam_inv[j, back][None])
    return SampledField(gpd, acc / n)


def averaged_effect_nodes(gpd: CircleActionGroupoid, field) -> np.ndarray:
    """Direct quadrature of effect(g k) effect(k)^{-1}: the second, independent path."""
    values = node_values(gpd, field)
    lam = effect_nodes(gpd, values)
    lam_inv = inv_2x2(lam, context="effect at quadrature node")
    n = gpd.order
    acc = np.zeros_like(lam)
    for j in range(n):
        back = gpd.rotation_perm(-j)
        shifted = np.roll(lam, -j, axis=0)[:, back]
        acc += mul_2x2(shifted, lam_inv[j, back][None])
    return acc / n


def effect_commutation_check(gpd: CircleActionGroupoid, field, thetas=None) -> float:
    """Worst deviation between effect(average(field)) and the averaged effect.

    The two sides are computed along independent code paths (division-cocycle
    average vs direct matrix quadrature); they agree identically in exact
    arithmetic.
    """
    averaged = average_connection(gpd, field)
    if thetas is None:
        lhs = effect_nodes(gpd, averaged.node_values(gpd))
        rhs = averaged_effect_nodes(gpd, field)
        return float(np.sqrt(np.sum((lhs - rhs) ** 2, axis=(-2, -1))).max())

    phis = gpd.node_angles
    worst = 0.0
    for theta in thetas:
        for p in range(gpd.n_points):
            m = gpd.points[p]
            lhs = effect(gpd, averaged, theta, m)
            rhs = np.zeros((2, 2))
            for j, phi in enumerate(phis):
                mj = gpd.points[gpd.rotation_perm(-j)[p]]
                lam_k = effect(gpd, field, phi, mj)
                rhs += effect(gpd, field, theta + phi, mj) @ np.linalg.inv(lam_k)
            rhs /= gpd.order
            worst = max(worst, float(np.linalg.norm(lhs - rhs)))
    return worst


# ---------------------------------------------------------------------------
# defects over the sampled subgroupoid

def multiplicativity_defect(gpd: CircleActionGroupoid, field, samples=None) -> float:
    """Worst multiplicativity defect of the connection.

    Default sampling is every composable pair of node-angle arrows over every
    sample point; the defect of the pair ((theta', R(theta) m), (theta, m))
    is the norm of the row covector

        a(theta'+theta, m) - a(theta', R(theta) m) effect(theta, m) - a(theta, m),

    i.e. the sup over unit tangent vectors of the composition error in the
    tangent groupoid. ``samples`` may instead be explicit (theta', theta, m)
    triples, evaluated through the tangent-arrow composition rule.
    """
    if samples is not None:
        return max(_pointwise_defect(gpd, field, tp, t, m) for tp, t, m in samples)
    values = node_values(gpd, field)
    return _grid_defect(gpd, values, effect_nodes(gpd, values))


def _grid_defect(gpd: CircleActionGroupoid, values: np.ndarray, lam: np.ndarray) -> float:
    n = gpd.order
    worst = 0.0
    idx = np.arange(n)
    perms = np.stack([gpd.rotation_perm(j) for j in range(n)])  # (N, P)
    for t in range(n):
        lhs = values[(t + idx) % n]  # a(phi_t + phi_j, m_p)
        mid = values[t][perms]  # a(phi_t, R(phi_j) m_p)
        rhs = row_mul_2x2(mid, lam) + values
        worst = max(worst, float(np.sqrt(np.sum((lhs - rhs) ** 2, axis=-1)).max()))
    return worst


def _pointwise_defect(gpd: CircleActionGroupoid, field, theta_p: float, theta: float, m) -> float:
    m = np.asarray(m, dtype=float)
    target = rot(theta) @ m if gpd.action == "rotation" else m
    lam = effect(gpd, field, theta, m)
    row = np.zeros(2)
    for axis, v in enumerate(np.eye(2)):
        lift = TangentArrowVector(theta, m, float(field.evaluate(theta, m) @ v), v)
        lift_p = TangentArrowVector(theta_p, target,
                                    float(field.evaluate(theta_p, target) @ (lam @ v)),
                                    lam @ v)
        comp = compose_tangent(gpd, lift_p, lift)
        row[axis] = float(field.evaluate(theta_p + theta, m) @ v) - comp.angular
    return float(np.linalg.norm(row))


def effect_defects(gpd: CircleActionGroupoid, lam: np.ndarray):
    """(b, c) of the sampled effect per orbit and globally.

    Returns (b_global, c_global, b_orbit, c_orbit) with orbit arrays indexed
    by the labels of ``orbit_of_point``.
    """
    orbit = gpd.orbit_of_point()
    n_orb = int(orbit.max()) + 1 if len(orbit) else 0
    n = gpd.order

    b_point = spectral_norm_2x2(lam).max(axis=0)  # (P,)
    c_point = np.zeros(gpd.n_points)
    perms = np.stack([gpd.rotation_perm(j) for j in range(n)])  # (N, P)
    idx = np.arange(n)
    for t in range(n):
        lhs = lam[(t + idx) % n]  # (N, P, 2, 2)
        mid = lam[t][perms]
        rhs = mul_2x2(mid, lam)
        c_point = np.maximum(c_point, spectral_norm_2x2(lhs - rhs).max(axis=0))

    b_orbit = np.array([b_point[orbit == o].max() for o in range(n_orb)])
    c_orbit = np.array([c_point[orbit == o].max() for o in range(n_orb)])
    return float(b_point.max()), float(c_point.max()), b_orbit, c_orbit


@dataclass
class AnnulusCertificate:
    label: str
    b: float
    c: float
    threshold: float
    passed: bool


@dataclass
class EffectivenessCertificate:
    annuli: list[AnnulusCertificate]

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.annuli)

    def to_json(self) -> dict:
        return {"pass": self.passed,
                "annuli": [{"label": a.label, "b": a.b, "c": a.c,
                            "threshold": a.threshold, "pass": a.passed}
                           for a in self.annuli]}


def certify_near_effectiveness(gpd: CircleActionGroupoid, field) -> EffectivenessCertificate:
    """Near-effectiveness of the sampled effect, per invariant annulus.

    Orbits of the sampled groupoid are circles of fixed radius (single points
    for the trivial action); each must satisfy c <= (1/9) b^-2.
    """
    lam = effect_nodes(gpd, node_values(gpd, field))
    _, _, b_orbit, c_orbit = effect_defects(gpd, lam)
    labels = ([f"radius={r:g}" for r in gpd.radii] if gpd.action == "rotation"
              else [f"point={p}" for p in range(gpd.n_points)])
    annuli = []
    for label, b, c in zip(labels, b_orbit, c_orbit):
        threshold = math.inf if b == 0 else NEAR_EFF_COEFF / (b * b)
        annuli.append(AnnulusCertificate(label=label, b=float(b), c=float(c),
                                         threshold=threshold, passed=c <= threshold))
    return EffectivenessCertificate(annuli)


# ---------------------------------------------------------------------------
# the connection iteration (fast convergence, connection form)

@dataclass
class ConnTraceRow:
    i: int
    b: float
    c: float
    bound: float
    unital_dev: float
    mult_defect: float


@dataclass
class ConnectionTrace:
    rows: list[ConnTraceRow] = dc_field(default_factory=list)
    converged: bool = False
    floor_reached: bool = False


def iterate_connection(gpd: CircleActionGroupoid, field, tol: float = 1e-10,
                       max_iter: int = 25, force: bool = False):
    """Repeated multiplicative averaging of a connection field.

    Tracks per iterate the sampled-effect defects b_i, c_i, the envelope
    value from (b_0, c_0), the unital deviation max_m |a(0, m)|, and the
    multiplicativity defect; stops when the latter falls below tol. A
    plateau of the defect above tol is reported as the quadrature floor
    rather than an error.

    Returns (final field, ConnectionTrace).
    """
    if tol <= 0:
        raise InvalidInput("tol must be positive")
    if not force:
        cert = certify_near_effectiveness(gpd, field)
        if not cert.passed:
            raise HypothesisViolation(
                "near-effectiveness certificate failed; rerun with force to override",
                witness=cert)

    trace = ConnectionTrace()
    cur = field
    b0 = bound = None
    i = 0
    while True:
        values = node_values(gpd, cur)
        lam = effect_nodes(gpd, values)
        b, c, _, _ = effect_defects(gpd, lam)
        defect = _grid_defect(gpd, values, lam)
        unital_dev = float(np.sqrt(np.sum(values[0] ** 2, axis=-1)).max())
        if i == 0:
            b0, bound = b, c
        else:
            bound = 6.0 * b0 * b0 * bound * bound
        trace.rows.append(ConnTraceRow(i, b, c, bound, unital_dev, defect))
        if defect <= tol:
            trace.converged = True
            break
        if i >= max_iter:
            break
        if i >= 1 and c >= 1.0:
            raise HypothesisViolation(
                f"divergence guard: effect defect {c:.6g} >= 1 after averaging step {i}",
                trace=trace)
        if i >= 1 and defect > 0.5 * trace.rows[-2].mult_defect and defect < 1e-6:
            trace.floor_reached = True  # quadrature floor: defect stopped contracting
            break
        try:
            cur = average_connection(gpd, cur)
        except HypothesisViolation as e:
            e.trace = trace
            raise
        i += 1
    return cur, trace
