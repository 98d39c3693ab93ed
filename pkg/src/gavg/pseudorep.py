"""Matrix pseudo-representations over finite groupoids, with defect functionals.

A pseudo-representation assigns to each arrow g a real matrix of shape
rank(tgt g) x rank(src g) with no composition law imposed. The two defect
functionals measured against a fiber metric are

    sup_norm(rep)    = max_g  ||rep(g)||            (largest arrow norm)
    mult_defect(rep) = max_{(g',g) composable} ||rep(g'g) - rep(g') rep(g)||

where ||.|| is the metric operator norm, computed as the top singular value of
the metric-whitened matrix M_tgt^(1/2) rep(g) M_src^(-1/2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput
from .groupoid import FiniteGroupoid, InvariantSubset, restriction_maps

SINGULAR_TOL = 1e-12


@dataclass(eq=False)
class FiberBundle:
    """Rank of the fiber over each object; must be constant per orbit."""

    ranks: np.ndarray  # (n_objects,)

    def __post_init__(self):
        self.ranks = np.asarray(self.ranks, dtype=np.int64)
        if self.ranks.size and self.ranks.min() < 0:
            raise InvalidInput("bundle ranks must be non-negative")
        self.ranks.flags.writeable = False


def check_bundle(gpd: FiniteGroupoid, bundle: FiberBundle):
    if bundle.ranks.shape != (gpd.n_objects,):
        raise InvalidInput("bundle must assign a rank to every object")
    orb = gpd.orbits()
    for o in orb.orbits:
        rr = {int(bundle.ranks[x]) for x in o}
        if len(rr) > 1:
            raise InvalidInput(f"bundle rank not constant on orbit {o}: ranks {sorted(rr)}")


@dataclass(eq=False)
class PseudoRep:
    """One matrix per arrow on a fiber bundle over the object set."""

    bundle: FiberBundle
    mats: list[np.ndarray]  # indexed by arrow id

    def mat(self, g: int) -> np.ndarray:
        return self.mats[g]

    def copy(self) -> "PseudoRep":
        return PseudoRep(self.bundle, [m.copy() for m in self.mats])


def check_shapes(gpd: FiniteGroupoid, rep: PseudoRep):
    check_bundle(gpd, rep.bundle)
    if len(rep.mats) != gpd.n_arrows:
        raise InvalidInput("pseudo-representation must assign a matrix to every arrow")
    r = rep.bundle.ranks
    for g, m in enumerate(rep.mats):
        want = (int(r[gpd.tgt[g]]), int(r[gpd.src[g]]))
        if m.shape != want:
            raise InvalidInput(f"matrix of arrow {g} has shape {m.shape}, expected {want}")


@dataclass(eq=False)
class FiberMetric:
    """Symmetric positive-definite inner product matrix per object."""

    mats: list[np.ndarray]

    def __post_init__(self):
        self._white = None  # cached (M^1/2, M^-1/2) per object

    def whiteners(self):
        """Per-object (M^1/2, M^-1/2); validates symmetry and positivity."""
        if self._white is None:
            out = []
            for x, m in enumerate(self.mats):
                m = np.asarray(m, dtype=float)
                if m.size and np.abs(m - m.T).max() > 1e-12 * max(1.0, np.abs(m).max()):
                    raise InvalidInput(f"metric at object {x} is not symmetric")
                if m.size == 0:
                    out.append((m, m))
                    continue
                vals, vecs = np.linalg.eigh(m)
                if vals.min() <= SINGULAR_TOL:
                    raise InvalidInput(f"metric at object {x} is not positive definite")
                half = (vecs * np.sqrt(vals)) @ vecs.T
                inv_half = (vecs / np.sqrt(vals)) @ vecs.T
                out.append((half, inv_half))
            self._white = out
        return self._white


def identity_metric(bundle: FiberBundle) -> FiberMetric:
    return FiberMetric([np.eye(int(r)) for r in bundle.ranks])


def scaled_metric(bundle: FiberBundle, scalars) -> FiberMetric:
    """Diagonal rescaling s_x * I of the identity metric (s_x > 0)."""
    scalars = np.asarray(scalars, dtype=float)
    if scalars.min() <= 0:
        raise InvalidInput("metric scalars must be positive")
    return FiberMetric([s * np.eye(int(r)) for s, r in zip(scalars, bundle.ranks)])


def operator_norm(mat: np.ndarray, half_tgt: np.ndarray, invhalf_src: np.ndarray) -> float:
    """Metric operator norm ||mat|| as top singular value of the whitened matrix."""
    if mat.size == 0:
        return 0.0
    w = half_tgt @ mat @ invhalf_src
    return float(np.linalg.svd(w, compute_uv=False)[0])


def _norm_fn(gpd: FiniteGroupoid, rep: PseudoRep, metric: FiberMetric | None):
    if metric is None:
        metric = identity_metric(rep.bundle)
    if len(metric.mats) != gpd.n_objects:
        raise InvalidInput("metric must assign a matrix to every object")
    for x, m in enumerate(metric.mats):
        r = int(rep.bundle.ranks[x])
        if np.asarray(m).shape != (r, r):
            raise InvalidInput(f"metric at object {x} has wrong shape for rank {r}")
    white = metric.whiteners()

    def norm(mat, x_src, x_tgt):
        return operator_norm(mat, white[x_tgt][0], white[x_src][1])

    return norm


def is_unital(gpd: FiniteGroupoid, rep: PseudoRep, tol: float = SINGULAR_TOL) -> bool:
    """True iff every unit matrix is within tol of the identity (Frobenius)."""
    return unital_deviation(gpd, rep) <= tol


def unital_deviation(gpd: FiniteGroupoid, rep: PseudoRep) -> float:
    dev = 0.0
    for x in range(gpd.n_objects):
        m = rep.mat(int(gpd.unit[x]))
        if m.size:
            dev = max(dev, float(np.linalg.norm(m - np.eye(len(m)))))
    return dev


def is_invertible(gpd: FiniteGroupoid, rep: PseudoRep, tol: float = SINGULAR_TOL) -> bool:
    """True iff every arrow matrix has smallest singular value above tol."""
    for m in rep.mats:
        if m.shape[0] != m.shape[1]:
            return False
        if m.size and np.linalg.svd(m, compute_uv=False)[-1] <= tol:
            return False
    return True


def sup_norm(gpd: FiniteGroupoid, rep: PseudoRep, metric: FiberMetric | None = None) -> float:
    """Largest metric operator norm over all arrows (the bound functional)."""
    check_shapes(gpd, rep)
    norm = _norm_fn(gpd, rep, metric)
    best = 0.0
    for g in range(gpd.n_arrows):
        v = norm(rep.mat(g), int(gpd.src[g]), int(gpd.tgt[g]))
        if v > best:
            best = v
    return best


def mult_defect_witness(gpd: FiniteGroupoid, rep: PseudoRep,
                        metric: FiberMetric | None = None):
    """(defect, worst pair): max over composable (g', g) of ||rep(g'g) - rep(g')rep(g)||."""
    check_shapes(gpd, rep)
    norm = _norm_fn(gpd, rep, metric)
    best, arg = 0.0, None
    for gp, g in gpd.composable_pairs():
        gp, g = int(gp), int(g)
        r = int(gpd.comp[gp, g])
        diff = rep.mat(r) - rep.mat(gp) @ rep.mat(g)
        v = norm(diff, int(gpd.src[g]), int(gpd.tgt[gp]))
        if v > best:
            best, arg = v, (gp, g)
    return best, arg


def mult_defect(gpd: FiniteGroupoid, rep: PseudoRep, metric: FiberMetric | None = None) -> float:
    return mult_defect_witness(gpd, rep, metric)[0]


def is_representation(gpd: FiniteGroupoid, rep: PseudoRep, tol: float = SINGULAR_TOL):
    """(is_rep, worst composable pair, defect) at the identity metric."""
    defect, pair = mult_defect_witness(gpd, rep)
    ok = is_unital(gpd, rep, tol) and defect <= tol
    return ok, pair, defect


def restrict_rep(gpd: FiniteGroupoid, rep: PseudoRep, subset: InvariantSubset) -> PseudoRep:
    """Pseudo-representation induced on the full restriction (matrices unchanged)."""
    check_shapes(gpd, rep)
    keep_obj, keep_arr = restriction_maps(gpd, subset)
    return PseudoRep(
        bundle=FiberBundle(rep.bundle.ranks[keep_obj]),
        mats=[rep.mats[int(g)] for g in keep_arr],
    )


def perturbed_representation(gpd: FiniteGroupoid, base: PseudoRep, amplitude: float,
                             seed: int) -> PseudoRep:
    """base + amplitude * noise, noise vanishing on units; deterministic in seed."""
    check_shapes(gpd, base)
    if amplitude < 0:
        raise InvalidInput("amplitude must be non-negative")
    rng = np.random.default_rng(seed)
    units = set(int(u) for u in gpd.unit)
    mats = []
    for g in range(gpd.n_arrows):
        m = base.mat(g).copy()
        if g not in units and m.size:
            m = m + amplitude * rng.standard_normal(m.shape)
        mats.append(m)
    return PseudoRep(base.bundle, mats)


# ---------------------------------------------------------------------------
# scalar-metric fast path (used by the near-representation certificate)

def scalar_metric_profile(gpd: FiniteGroupoid, rep: PseudoRep):
    """Precomputed data for evaluating (sup_norm, mult_defect) under s_x * I metrics.

    Under the metric s_x * I the norm of a map x -> y rescales exactly by
    sqrt(s_y / s_x), so the Euclidean singular values can be computed once.
    Returns (arrow_norms, arrow_src, arrow_tgt, pair_norms, pair_src, pair_tgt).
    """
    check_shapes(gpd, rep)
    arrow_norms = np.array([
        float(np.linalg.svd(m, compute_uv=False)[0]) if m.size else 0.0
        for m in rep.mats
    ])
    pairs = gpd.composable_pairs()
    pair_norms = np.empty(len(pairs))
    pair_src = np.empty(len(pairs), dtype=np.int64)
    pair_tgt = np.empty(len(pairs), dtype=np.int64)
    for i, (gp, g) in enumerate(pairs):
        gp, g = int(gp), int(g)
        diff = rep.mat(int(gpd.comp[gp, g])) - rep.mat(gp) @ rep.mat(g)
        pair_norms[i] = float(np.linalg.svd(diff, compute_uv=False)[0]) if diff.size else 0.0
        pair_src[i] = gpd.src[g]
        pair_tgt[i] = gpd.tgt[gp]
    return arrow_norms, gpd.src.copy(), gpd.tgt.copy(), pair_norms, pair_src, pair_tgt


def scalar_metric_defects(profile, scalars: np.ndarray):
    """(sup_norm, mult_defect) under the metric family s_x * I, from a profile."""
    arrow_norms, a_src, a_tgt, pair_norms, p_src, p_tgt = profile
    s = np.asarray(scalars, dtype=float)
    factor_a = np.sqrt(s[a_tgt] / s[a_src])
    factor_p = np.sqrt(s[p_tgt] / s[p_src])
    b = float(np.max(arrow_norms * factor_a)) if len(arrow_norms) else 0.0
    c = float(np.max(pair_norms * factor_p)) if len(pair_norms) else 0.0
    return b, c
