"""The Haar averaging operator on pseudo-representations and its iteration.

For an invertible pseudo-representation the operator is

    avg(rep)(g) = sum_{k in fiber(src g)} nu(k) * rep(g k) * rep(k)^-1,

a unital pseudo-representation whose multiplicativity defect contracts
quadratically: writing b, c for the defect functionals of the input (c < 1),

    sup_norm(avg)    <= b / (1 - c)
    mult_defect(avg) <= 2 c^2 b^2 / (1 - c)^2.

Feeding these one-step estimates into the scalar recursion shows that if
b0 >= 1 and eps := 6 b0^2 c0 <= 2/3 (equivalently c0 <= (1/9) b0^-2 locally,
the near-representation condition), the iterated defects obey the doubly
exponential envelope c_i <= eps^(2^i) / (6 b0^2).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ._util import ordered_map
from .errors import HypothesisViolation, InvalidInput
from .groupoid import FiniteGroupoid, InvariantSubset, full_restriction
from .haar import HaarSystem
from .pseudorep import (
    PseudoRep,
    check_shapes,
    mult_defect,
    restrict_rep,
    scalar_metric_defects,
    scalar_metric_profile,
    sup_norm,
    unital_deviation,
)

NEAR_REP_COEFF = 1.0 / 9.0  # certificate threshold c <= (1/9) b^-2
EPS_LIMIT = 2.0 / 3.0       # recursion hypothesis eps = 6 b0^2 c0 <= 2/3
COND_LIMIT = 1e12
SINGULAR_TOL = 1e-12


def average(gpd: FiniteGroupoid, haar: HaarSystem, rep: PseudoRep) -> PseudoRep:
    """One application of the averaging operator.

    Requires every arrow matrix to be invertible (smallest singular value
    above 1e-12) and refuses condition numbers beyond 1e12. Fiber sums run in
    ascending arrow-id order; arrows may be averaged in parallel (GAVG_THREADS)
    without affecting the result.
    """
    check_shapes(gpd, rep)
    nu = haar.arrow_weights(gpd)
    invs = []
    for k, m in enumerate(rep.mats):
        if m.shape[0] != m.shape[1]:
            raise HypothesisViolation(f"arrow {k} is not invertible (non-square block)",
                                      witness=k)
        if m.size == 0:
            invs.append(m)
            continue
        sv = np.linalg.svd(m, compute_uv=False)
        if sv[-1] <= SINGULAR_TOL:
            raise HypothesisViolation(
                f"arrow {k} is not invertible (smallest singular value {sv[-1]:.3e})",
                witness=k)
        if sv[0] / sv[-1] > COND_LIMIT:
            raise HypothesisViolation(
                f"arrow {k} is too ill-conditioned to invert (cond {sv[0] / sv[-1]:.3e})",
                witness=k)
        invs.append(np.linalg.inv(m))

    fibers = [gpd.target_fiber(x) for x in range(gpd.n_objects)]

    def avg_arrow(g: int) -> np.ndarray:
        acc = None
        for k in fibers[int(gpd.src[g])]:
            k = int(k)
            term = nu[k] * (rep.mats[int(gpd.comp[g, k])] @ invs[k])
            acc = term if acc is None else acc + term
        if acc is None:
            raise InvalidInput(f"empty fiber at object {gpd.src[g]}")
        return acc

    return PseudoRep(rep.bundle, ordered_map(avg_arrow, range(gpd.n_arrows)))


# ---------------------------------------------------------------------------
# near-representation certification

@dataclass
class OrbitCertificate:
    orbit: int
    objects: tuple[int, ...]
    b: float
    c: float
    threshold: float
    passed: bool
    scalars: dict[int, float]  # per-object metric scaling used


@dataclass
class NearRepCertificate:
    orbits: list[OrbitCertificate]

    @property
    def passed(self) -> bool:
        return all(o.passed for o in self.orbits)

    def to_json(self) -> dict:
        return {
            "pass": self.passed,
            "orbits": [
                {"orbit": o.orbit, "objects": list(o.objects), "b": o.b, "c": o.c,
                 "threshold": o.threshold, "pass": o.passed,
                 "metric_scalars": {str(k): v for k, v in sorted(o.scalars.items())}}
                for o in self.orbits
            ],
        }


_DEFAULT_GRID = tuple(2.0 ** k for k in range(-4, 5))


def _search_scalars(profile, n_objects: int, budget: int, grid):
    """Minimize c * b^2 over per-object scalars from the grid (first fixed at 1)."""
    ones = np.ones(n_objects)
    b, c = scalar_metric_defects(profile, ones)
    best = (c * b * b, ones, b, c)
    if n_objects <= 1 or budget <= 1:
        return best

    free = n_objects - 1
    if len(grid) ** free <= budget:
        for combo in itertools.product(grid, repeat=free):
            s = np.concatenate([[1.0], np.asarray(combo)])
            bb, cc = scalar_metric_defects(profile, s)
            if cc * bb * bb < best[0]:
                best = (cc * bb * bb, s, bb, cc)
        return best

    # coordinate descent sweeps under the evaluation budget
    s = ones.copy()
    evals = 1
    improved = True
    while improved and evals < budget:
        improved = False
        for x in range(1, n_objects):
            for val in grid:
                if evals >= budget:
                    return best
                trial = s.copy()
                trial[x] = val
                bb, cc = scalar_metric_defects(profile, trial)
                evals += 1
                if cc * bb * bb < best[0]:
                    best = (cc * bb * bb, trial, bb, cc)
                    s = trial
                    improved = True
    return best


def certify_near_representation(gpd: FiniteGroupoid, rep: PseudoRep,
                                metric_budget: int = 2000,
                                grid=_DEFAULT_GRID) -> NearRepCertificate:
    """Per-orbit certificate that rep is a near representation.

    For each orbit (the finest invariant decomposition) the defects of the
    restriction are minimized over per-object scalar metric rescalings by a
    budgeted grid search on c * b^2; the orbit passes iff the minimized c is
    <= (1/9) b^-2 under the recorded metric.
    """
    check_shapes(gpd, rep)
    if unital_deviation(gpd, rep) > 1e-9:
        raise InvalidInput("certification requires a unital pseudo-representation")

    records = []
    for idx, orbit in enumerate(gpd.orbits().orbits):
        sub = InvariantSubset.of(orbit)
        rgpd = full_restriction(gpd, sub)
        rrep = restrict_rep(gpd, rep, sub)
        profile = scalar_metric_profile(rgpd, rrep)
        _, scalars, b, c = _search_scalars(profile, rgpd.n_objects, metric_budget, grid)
        threshold = math.inf if b == 0 else NEAR_REP_COEFF / (b * b)
        records.append(OrbitCertificate(
            orbit=idx,
            objects=tuple(int(x) for x in orbit),
            b=b, c=c, threshold=threshold,
            passed=c <= threshold,
            scalars={int(x): float(s) for x, s in zip(orbit, scalars)},
        ))
    return NearRepCertificate(records)


# ---------------------------------------------------------------------------
# iteration driver

@dataclass
class TraceRow:
    i: int
    b: float
    c: float
    bound: float  # eps^(2^i) / (6 b0^2), eps = 6 b0^2 c0
    unital_dev: float


@dataclass
class ConvergenceTrace:
    rows: list[TraceRow] = field(default_factory=list)
    converged: bool = False

    @property
    def b0(self) -> float:
        return self.rows[0].b

    @property
    def c0(self) -> float:
        return self.rows[0].c

    @property
    def eps(self) -> float:
        return 6.0 * self.b0 * self.b0 * self.c0


def iterate(gpd: FiniteGroupoid, haar: HaarSystem, rep: PseudoRep,
            tol: float = 1e-12, max_iter: int = 60, force: bool = False,
            certificate: NearRepCertificate | None = None):
    """Repeated averaging until the multiplicativity defect falls below tol.

    Records per-iterate defects b_i, c_i (identity metrics, for comparability
    with the theoretical envelope), the envelope value eps^(2^i)/(6 b0^2),
    and the unital deviation. Unless ``force`` is set, the near-representation
    certificate must pass first. The divergence guard raises when a
    post-average iterate has defect >= 1 or averaging meets a non-invertible
    arrow, signalling that the near-representation hypothesis was violated.

    Returns (final iterate, ConvergenceTrace).
    """
    if tol <= 0:
        raise InvalidInput("tol must be positive")
    if max_iter < 1:
        raise InvalidInput("max_iter must be at least 1")
    if not force:
        cert = certificate if certificate is not None else certify_near_representation(gpd, rep)
        if not cert.passed:
            raise HypothesisViolation(
                "near-representation certificate failed; rerun with force to override",
                witness=cert)

    trace = ConvergenceTrace()
    lam = rep
    b0 = bound = None
    i = 0
    while True:
        b = sup_norm(gpd, lam)
        c = mult_defect(gpd, lam)
        if i == 0:
            b0, bound = b, c  # bound_0 = eps/(6 b0^2) = c0 exactly
        else:
            bound = 6.0 * b0 * b0 * bound * bound
        trace.rows.append(TraceRow(i, b, c, bound, unital_deviation(gpd, lam)))
        if c <= tol:
            trace.converged = True
            break
        if i >= max_iter:
            break
        if i >= 1 and c >= 1.0:
            raise HypothesisViolation(
                f"divergence guard: defect {c:.6g} >= 1 after averaging step {i}",
                trace=trace)
        try:
            lam = average(gpd, haar, lam)
        except HypothesisViolation as e:
            e.trace = trace
            raise
        i += 1
    return lam, trace


# ---------------------------------------------------------------------------
# scalar recursion oracle

@dataclass
class RecursionRow:
    i: int
    b: float
    c: float
    bound: float    # eps^(2^i) / (6 b0^2)
    b_limit: float  # sqrt(3) * b0
    c_pass: bool    # c_i <= bound_i
    b_pass: bool    # b_i / (1 - c_i) <= sqrt(3) b0


def recursion_envelope(b0: float, c0: float, length: int) -> list[RecursionRow]:
    """Extremal defect recursion and its doubly exponential envelope.

    Runs the worst-case recursion b_{i+1} = b_i/(1-c_i),
    c_{i+1} = 2 c_i^2 [b_i/(1-c_i)]^2 for i = 0..length and checks both
    claimed bounds at each index. Requires b0 >= 1 and eps = 6 b0^2 c0 <= 2/3.

    The envelope column is computed by the squaring recurrence
    bound_0 = c0, bound_{i+1} = 6 b0^2 bound_i^2, which equals
    eps^(2^i)/(6 b0^2) exactly in real arithmetic.
    """
    if c0 < 0 or b0 < 0:
        raise InvalidInput("defect values must be non-negative")
    if length < 0:
        raise InvalidInput("length must be non-negative")
    eps = 6.0 * b0 * b0 * c0
    if b0 < 1.0:
        raise HypothesisViolation(f"recursion hypothesis b0 >= 1 fails (b0 = {b0})")
    if eps > EPS_LIMIT:
        raise HypothesisViolation(
            f"recursion hypothesis eps = 6 b0^2 c0 <= 2/3 fails (eps = {eps})")

    b_limit = math.sqrt(3.0) * b0
    rows = []
    b, c, bound = b0, c0, c0
    for i in range(length + 1):
        ratio = b / (1.0 - c) if c < 1.0 else math.inf
        rows.append(RecursionRow(
            i=i, b=b, c=c, bound=bound, b_limit=b_limit,
            c_pass=c <= bound, b_pass=ratio <= b_limit,
        ))
        b, c = ratio, 2.0 * c * c * ratio * ratio
        bound = 6.0 * b0 * b0 * bound * bound
    return rows


# ---------------------------------------------------------------------------
# one-step estimate monitor

@dataclass
class EstimateReport:
    b: float
    c: float
    norm_bound: float     # b / (1 - c)
    defect_bound: float   # 2 c^2 b^2 / (1 - c)^2
    norm_slack: float     # norm_bound - sup_norm(averaged)
    defect_slack: float   # defect_bound - mult_defect(averaged)

    @property
    def norm_pass(self) -> bool:
        return self.norm_slack >= 0.0

    @property
    def defect_pass(self) -> bool:
        return self.defect_slack >= 0.0

    @property
    def passed(self) -> bool:
        return self.norm_pass and self.defect_pass


def monitor_estimates(gpd: FiniteGroupoid, rep: PseudoRep, averaged: PseudoRep,
                      metric=None) -> EstimateReport:
    """Check the two one-step estimates for a given (input, averaged) pair."""
    b = sup_norm(gpd, rep, metric)
    c = mult_defect(gpd, rep, metric)
    if c >= 1.0:
        raise HypothesisViolation(f"estimates require defect < 1 (got {c:.6g})")
    norm_bound = b / (1.0 - c)
    defect_bound = 2.0 * c * c * b * b / ((1.0 - c) * (1.0 - c))
    return EstimateReport(
        b=b, c=c, norm_bound=norm_bound, defect_bound=defect_bound,
        norm_slack=norm_bound - sup_norm(gpd, averaged, metric),
        defect_slack=defect_bound - mult_defect(gpd, averaged, metric),
    )


# ---------------------------------------------------------------------------
# segment scan

@dataclass
class SegmentPoint:
    t: float
    c: float
    min_sv: float  # smallest singular value over all arrows of the interpolant

    @property
    def invertible(self) -> bool:
        return self.min_sv > SINGULAR_TOL


def segment_scan(gpd: FiniteGroupoid, haar: HaarSystem, rep: PseudoRep,
                 steps: int = 20) -> list[SegmentPoint]:
    """Defect along the segment (1-t) rep + t avg(rep) on an even t grid.

    ``steps`` is the number of grid intervals; both endpoints are included.
    Invertibility along the segment is reported via min_sv per grid point.
    """
    if steps < 1:
        raise InvalidInput("steps must be at least 1")
    averaged = average(gpd, haar, rep)
    out = []
    for j in range(steps + 1):
        t = j / steps
        mix = PseudoRep(rep.bundle,
                        [(1.0 - t) * a + t * b for a, b in zip(rep.mats, averaged.mats)])
        min_sv = math.inf
        for m in mix.mats:
            if m.size:
                min_sv = min(min_sv, float(np.linalg.svd(m, compute_uv=False)[-1]))
        if math.isinf(min_sv):
            min_sv = 0.0
        out.append(SegmentPoint(t=t, c=mult_defect(gpd, mix), min_sv=min_sv))
    return out


__all__ = [
    "NEAR_REP_COEFF", "EPS_LIMIT", "average", "certify_near_representation",
    "NearRepCertificate", "OrbitCertificate", "iterate", "ConvergenceTrace",
    "TraceRow", "recursion_envelope", "RecursionRow", "monitor_estimates",
    "EstimateReport", "segment_scan", "SegmentPoint",
]
