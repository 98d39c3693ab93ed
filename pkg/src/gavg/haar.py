"""Normalized Haar systems on finite groupoids and target-fiber integration.

Every left-invariant system on a finite groupoid is induced by a positive
base weight w on objects via nu(h) = w(src h): left invariance then holds
identically because src(g h) = src(h), and the only real constraint is the
normalization sum_{h in fiber(x)} w(src h) = 1 per object x.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput
from .groupoid import FiniteGroupoid, ValidationReport

NORMALIZATION_TOL = 1e-12


@dataclass(eq=False)
class HaarSystem:
    """Positive base weight per object; nu(h) = weight[src h]."""

    weights: np.ndarray  # (n_objects,)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.weights.flags.writeable = False

    def arrow_weights(self, gpd: FiniteGroupoid) -> np.ndarray:
        return self.weights[gpd.src]


def fiber_matrix(gpd: FiniteGroupoid) -> np.ndarray:
    """A[x, y] = number of arrows y -> x; fiber normalization reads A w = 1."""
    a = np.zeros((gpd.n_objects, gpd.n_objects), dtype=float)
    np.add.at(a, (gpd.tgt, gpd.src), 1.0)
    return a


def uniform_haar(gpd: FiniteGroupoid) -> HaarSystem:
    """The canonical system w(x) = 1 / |fiber(x)|.

    Fiber sizes are constant along orbits (left translation is a bijection of
    fibers), so this weight is constant per orbit and normalizes every fiber.
    """
    sizes = np.bincount(gpd.tgt, minlength=gpd.n_objects).astype(float)
    if np.any(sizes == 0):
        x = int(np.flatnonzero(sizes == 0)[0])
        raise InvalidInput(f"object {x} has an empty target fiber (missing unit?)")
    return HaarSystem(1.0 / sizes)


def random_haar(gpd: FiniteGroupoid, seed: int, spread: float = 0.5,
                max_retries: int = 64) -> HaarSystem:
    """A seeded positive solution of the fiber normalization constraints.

    Samples a perturbation of the uniform system inside the nullspace of the
    fiber matrix and shrinks it until all weights are positive. When the
    nullspace is trivial the constraints force the uniform-per-orbit system
    and that system is returned.
    """
    base = uniform_haar(gpd).weights
    a = fiber_matrix(gpd)
    _, s, vt = np.linalg.svd(a)
    tol = max(a.shape) * np.finfo(float).eps * (s[0] if len(s) else 1.0)
    null = vt[np.sum(s > tol):]  # rows span the nullspace
    if len(null) == 0:
        return HaarSystem(base)

    rng = np.random.default_rng(seed)
    z = null.T @ rng.standard_normal(len(null))
    # both the direction and the magnitude of the perturbation vary with the seed
    scale = spread * rng.uniform(0.1, 1.0) * base.min() / max(np.abs(z).max(), 1e-300)
    for _ in range(max_retries):
        w = base + scale * z
        if w.min() > 0:
            return HaarSystem(w)
        scale *= 0.5
    raise InvalidInput("could not sample a positive Haar system (constraints too tight)")


def validate_haar(gpd: FiniteGroupoid, haar: HaarSystem) -> ValidationReport:
    """Positivity, per-fiber normalization (1e-12), and structural left invariance."""
    rep = ValidationReport()
    w = haar.weights
    if w.shape != (gpd.n_objects,):
        raise InvalidInput(f"weight table has shape {w.shape}, expected ({gpd.n_objects},)")
    for x in np.flatnonzero(w <= 0):
        rep.add("positivity", (int(x),), f"weight at object {x} is {w[x]} <= 0")
    nu = haar.arrow_weights(gpd)
    for x in range(gpd.n_objects):
        total = float(np.sum(nu[gpd.target_fiber(x)]))
        if abs(total - 1.0) > NORMALIZATION_TOL:
            rep.add("normalization", (x,), f"fiber at object {x} sums to {total!r}")
    # left invariance nu(g h) = nu(h) is structural; verify it exactly anyway
    for gp, g in gpd.composable_pairs():
        r = int(gpd.comp[gp, g])
        if nu[r] != nu[g]:
            rep.add("left-invariance", (int(gp), int(g)),
                    f"nu(comp({gp},{g})) = {nu[r]!r} != nu({g}) = {nu[g]!r}")
    return rep


def integrate_fiber(gpd: FiniteGroupoid, haar: HaarSystem, x: int, values) -> np.ndarray:
    """sum_{h in fiber(x)} nu(h) * values[h], in ascending arrow-id order.

    ``values`` maps every arrow of the fiber at x to a vector (dict or full
    per-arrow array); a missing arrow raises.
    """
    fiber = gpd.target_fiber(x)
    nu = haar.arrow_weights(gpd)
    terms = []
    for h in fiber:
        h = int(h)
        if isinstance(values, dict):
            if h not in values:
                raise InvalidInput(f"integrand missing arrow {h} of fiber at {x}")
            v = values[h]
        else:
            v = values[h]
        terms.append(nu[h] * np.asarray(v, dtype=float))
    if not terms:
        raise InvalidInput(f"empty fiber at object {x}")
    out = terms[0]
    for t in terms[1:]:
        out = out + t
    return out
