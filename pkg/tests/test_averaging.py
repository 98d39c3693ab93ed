import math

import numpy as np
import pytest

from helpers import brute_force_average, coboundary_rep, random_invertible_rep

from gavg.averaging import (
    EPS_LIMIT,
    NEAR_REP_COEFF,
    average,
    certify_near_representation,
    iterate,
    monitor_estimates,
    recursion_envelope,
    segment_scan,
)
from gavg.errors import HypothesisViolation, InvalidInput
from gavg.fixtures import (
    pair2_identity_rep,
    pair2_perturbed_rep,
    s3_groupoid,
    s3_perturbed_rep,
    s3_rep,
    two_orbit_groupoid,
    two_orbit_rep,
    z2_groupoid,
    z2_scalar_rep,
)
from gavg.groupoid import invariant_subsets, pair_groupoid
from gavg.haar import HaarSystem, random_haar, uniform_haar
from gavg.pseudorep import (
    FiberBundle,
    PseudoRep,
    is_representation,
    is_unital,
    mult_defect,
    perturbed_representation,
    restrict_rep,
    sup_norm,
    unital_deviation,
)


def test_average_z2_scalar_closed_form():
    z2 = z2_groupoid()
    h = uniform_haar(z2)
    for tau in (2.0, 1.5, 0.7):
        avg = average(z2, h, z2_scalar_rep(tau))
        assert avg.mats[1][0, 0] == pytest.approx((tau + 1 / tau) / 2, abs=1e-15)
        assert avg.mats[0][0, 0] == pytest.approx(1.0, abs=1e-15)


def test_average_matches_brute_force():
    s3 = s3_groupoid()
    rep = s3_perturbed_rep(3e-2, 1)
    for haar in (uniform_haar(s3), random_haar(s3, 5)):
        fast = average(s3, haar, rep)
        slow = brute_force_average(s3, haar, rep)
        for a, b in zip(fast.mats, slow.mats):
            assert np.allclose(a, b, atol=1e-15)


def test_average_agrees_with_fiber_integration():
    """The operator is exactly a target-fiber integral of rep(g k) rep(k)^-1."""
    from gavg.haar import integrate_fiber

    s3 = s3_groupoid()
    haar = random_haar(s3, 9)
    rep = s3_perturbed_rep(2e-2, 8)
    avg = average(s3, haar, rep)
    invs = [np.linalg.inv(m) for m in rep.mats]
    for g in range(s3.n_arrows):
        x = int(s3.src[g])
        integrand = {int(k): rep.mats[s3.compose(g, int(k))] @ invs[int(k)]
                     for k in s3.target_fiber(x)}
        want = integrate_fiber(s3, haar, x, integrand)
        assert np.array_equal(avg.mats[g], want)  # same sums in the same order


def test_trace_bound_column_equals_envelope_powers():
    s3 = s3_groupoid()
    _, trace = iterate(s3, uniform_haar(s3), s3_perturbed_rep(4e-3, 1))
    eps = trace.eps
    for row in trace.rows:
        direct = eps ** (2 ** row.i) / (6 * trace.b0**2)
        assert row.bound == pytest.approx(direct, rel=1e-12)


EXACT_REPS = [
    (z2_groupoid(), z2_scalar_rep(1.0)),
    (pair_groupoid(2), pair2_identity_rep()),
    (pair_groupoid(2), coboundary_rep(pair_groupoid(2), [np.eye(2), np.diag([2.0, 0.5])])),
    (s3_groupoid(), s3_rep()),
]


@pytest.mark.parametrize("gpd,rep", EXACT_REPS, ids=["z2", "pair-id", "pair-cob", "s3"])
def test_exact_representations_are_fixed_points(gpd, rep):
    for haar in (uniform_haar(gpd), random_haar(gpd, 1), random_haar(gpd, 2)):
        avg = average(gpd, haar, rep)
        for a, b in zip(avg.mats, rep.mats):
            assert np.abs(a - b).max() <= 1e-14


def test_average_is_unital_for_any_invertible_input():
    cases = [
        (s3_groupoid(), random_invertible_rep(s3_groupoid(), 2, 0)),
        (pair_groupoid(3), random_invertible_rep(pair_groupoid(3), 2, 1)),
        (two_orbit_groupoid(), two_orbit_rep()),
    ]
    for gpd, rep in cases:
        for haar in (uniform_haar(gpd), random_haar(gpd, 7)):
            avg = average(gpd, haar, rep)
            assert unital_deviation(gpd, avg) <= 1e-12


def test_average_rejects_non_invertible_arrow():
    z2 = z2_groupoid()
    rep = PseudoRep(FiberBundle(np.array([1])), [np.array([[1.0]]), np.array([[0.0]])])
    with pytest.raises(HypothesisViolation) as err:
        average(z2, uniform_haar(z2), rep)
    assert err.value.witness == 1


def test_certificate_z2_arithmetic():
    z2 = z2_groupoid()
    cert = certify_near_representation(z2, z2_scalar_rep(1.01))
    orb = cert.orbits[0]
    assert cert.passed
    assert orb.b == pytest.approx(1.01)
    assert orb.c == pytest.approx(0.0201, abs=1e-12)
    assert orb.threshold == pytest.approx((1 / 9) / 1.01**2)

    cert2 = certify_near_representation(z2, z2_scalar_rep(2.0))
    assert not cert2.passed
    assert cert2.orbits[0].c == pytest.approx(3.0)


def test_certificate_exact_rep_passes_per_orbit():
    gpd = two_orbit_groupoid()
    rep = PseudoRep(
        FiberBundle(np.array([1, 2, 2])),
        [np.array([[1.0]]), np.array([[1.0]])] + [np.eye(2)] * 4,
    )
    cert = certify_near_representation(gpd, rep)
    assert cert.passed
    assert len(cert.orbits) == 2
    assert all(o.c == 0.0 for o in cert.orbits)


def test_metric_search_rescues_unbalanced_instance():
    """Identity metric fails the threshold; per-object scalars restore it."""
    pair = pair_groupoid(2)
    base = coboundary_rep(pair, [np.eye(2), 3.0 * np.eye(2)])
    rep = perturbed_representation(pair, base, 8e-3, 4)
    assert not certify_near_representation(pair, rep, metric_budget=1).passed
    cert = certify_near_representation(pair, rep)
    assert cert.passed
    orb = cert.orbits[0]
    assert orb.scalars[0] == 1.0 and orb.scalars[1] < 0.5
    assert orb.c * orb.b**2 <= NEAR_REP_COEFF


def test_certification_requires_unital_input():
    z2 = z2_groupoid()
    rep = PseudoRep(FiberBundle(np.array([1])), [np.array([[2.0]]), np.array([[2.0]])])
    with pytest.raises(InvalidInput):
        certify_near_representation(z2, rep)


def test_iterate_stops_immediately_on_representation():
    s3 = s3_groupoid()
    final, trace = iterate(s3, uniform_haar(s3), s3_rep())
    assert trace.converged
    assert len(trace.rows) == 1
    assert trace.rows[0].i == 0
    assert trace.rows[0].c < 1e-14
    for a, b in zip(final.mats, s3_rep().mats):
        assert np.array_equal(a, b)  # no averaging applied


def test_iterate_z2_matches_scalar_recursion():
    z2 = z2_groupoid()
    h = uniform_haar(z2)
    final, trace = iterate(z2, h, z2_scalar_rep(1.5), force=True)
    assert trace.converged
    assert len(trace.rows) <= 7  # at most 6 averaging steps
    tau = 1.5
    lam = z2_scalar_rep(1.5)
    for row in trace.rows:
        assert abs(lam.mats[1][0, 0] - tau) <= 1e-14
        assert row.c == pytest.approx(abs(1 - tau * tau), abs=1e-13)
        if row.c <= 1e-12:
            break
        tau = (tau + 1 / tau) / 2
        lam = average(z2, h, lam)
    assert is_representation(z2, final, 1e-12)[0]


def test_iterate_requires_certificate_unless_forced():
    z2 = z2_groupoid()
    with pytest.raises(HypothesisViolation):
        iterate(z2, uniform_haar(z2), z2_scalar_rep(1.5))


def test_divergence_guard_fires_after_averaging():
    z2 = z2_groupoid()
    with pytest.raises(HypothesisViolation) as err:
        iterate(z2, uniform_haar(z2), z2_scalar_rep(25.0), force=True)
    assert err.value.trace is not None
    assert err.value.trace.rows[1].c >= 1.0  # post-average defect still huge


def test_convergence_observed_beyond_certificate_threshold():
    """A forced run can converge even when certification fails (observed, not asserted
    as a theorem: the threshold is sufficient, not necessary)."""
    z2 = z2_groupoid()
    rep = z2_scalar_rep(1.2)  # c b^2 = 0.44 * 1.44, far above the 1/9 threshold
    assert not certify_near_representation(z2, rep).passed
    final, trace = iterate(z2, uniform_haar(z2), rep, force=True)
    assert trace.converged
    assert is_representation(z2, final, 1e-12)[0]


def test_iterate_max_iter_exhaustion():
    z2 = z2_groupoid()
    final, trace = iterate(z2, uniform_haar(z2), z2_scalar_rep(1.5),
                           max_iter=1, force=True)
    assert not trace.converged
    assert len(trace.rows) == 2
    assert trace.rows[-1].c > 1e-12


def test_iterate_envelope_and_floor():
    s3 = s3_groupoid()
    h = uniform_haar(s3)
    for seed in range(10):
        rep = s3_perturbed_rep(4e-3, seed)
        final, trace = iterate(s3, h, rep)
        assert trace.converged
        assert trace.eps <= EPS_LIMIT
        for row in trace.rows:
            if row.c >= 1e-13:
                assert row.c <= row.bound
            assert row.unital_dev <= 1e-12
        assert is_representation(s3, final, 1e-12)[0]


def test_extremal_recursion_dominates_measured_traces():
    s3 = s3_groupoid()
    h = uniform_haar(s3)
    for seed in (3, 13):
        rep = s3_perturbed_rep(4e-3, seed)
        _, trace = iterate(s3, h, rep)
        table = recursion_envelope(trace.b0, trace.c0, len(trace.rows) - 1)
        for row, bound_row in zip(trace.rows, table):
            assert row.b <= bound_row.b + 1e-12
            assert row.c <= bound_row.c + 1e-12


def test_recursion_envelope_example_values():
    rows = recursion_envelope(1.0, 1.0 / 9.0, 5)
    assert rows[0].c == pytest.approx(1 / 9)
    assert rows[0].bound == pytest.approx(1 / 9)
    assert rows[1].c == pytest.approx(1 / 32)  # 2 (1/81) (9/8)^2
    assert rows[1].bound == pytest.approx((2 / 3) ** 2 / 6)
    assert all(r.c_pass and r.b_pass for r in rows)


def test_recursion_envelope_zero_defect():
    rows = recursion_envelope(2.0, 0.0, 10)
    assert all(r.c == 0.0 and r.bound == 0.0 and r.b == 2.0 for r in rows)
    assert all(r.c_pass and r.b_pass for r in rows)


def test_recursion_envelope_hypothesis_checks():
    with pytest.raises(HypothesisViolation):
        recursion_envelope(0.9, 0.01, 5)  # b0 < 1
    with pytest.raises(HypothesisViolation):
        recursion_envelope(1.0, 0.2, 5)  # eps = 1.2 > 2/3


def test_recursion_envelope_random_sweep():
    rng = np.random.default_rng(0)
    for _ in range(200):
        b0 = float(10 ** rng.uniform(0, 1))
        c0 = float(rng.uniform(0, 1) * EPS_LIMIT / (6 * b0 * b0))
        rows = recursion_envelope(b0, c0, 20)
        assert all(r.c_pass and r.b_pass for r in rows)


def test_monitor_estimates_spec_arithmetic():
    z2 = z2_groupoid()
    h = uniform_haar(z2)
    rep = z2_scalar_rep(1.1)
    report = monitor_estimates(z2, rep, average(z2, h, rep))
    assert report.b == pytest.approx(1.1)
    assert report.c == pytest.approx(0.21, abs=1e-12)
    tau_bar = (1.1 + 1 / 1.1) / 2
    assert report.norm_slack == pytest.approx(1.1 / 0.79 - tau_bar)
    assert report.defect_slack == pytest.approx(
        2 * 0.21**2 * 1.1**2 / 0.79**2 - abs(1 - tau_bar**2))
    assert report.passed


def test_monitor_estimates_exact_representation():
    pair = pair_groupoid(2)
    rep = coboundary_rep(pair, [np.eye(2), np.diag([2.0, 0.5])])
    h = uniform_haar(pair)
    report = monitor_estimates(pair, rep, average(pair, h, rep))
    assert report.c == 0.0
    assert report.norm_slack == 0.0  # b/(1-0) - b, exact floats
    assert report.defect_slack == 0.0
    assert report.passed


def test_monitor_requires_contractive_defect():
    z2 = z2_groupoid()
    rep = z2_scalar_rep(2.0)
    with pytest.raises(HypothesisViolation):
        monitor_estimates(z2, rep, average(z2, uniform_haar(z2), rep))


def test_segment_scan_representation_stays_flat():
    pair = pair_groupoid(2)
    rep = pair2_identity_rep()
    points = segment_scan(pair, uniform_haar(pair), rep, steps=5)
    assert [p.t for p in points] == pytest.approx([0.0, 0.2, 0.4, 0.6, 0.8, 1.0])
    assert all(p.c <= 1e-14 for p in points)
    assert all(p.invertible for p in points)


def test_segment_scan_z2_closed_form_decreasing():
    z2 = z2_groupoid()
    points = segment_scan(z2, uniform_haar(z2), z2_scalar_rep(1.5), steps=10)
    tau_bar = (1.5 + 1 / 1.5) / 2
    for p in points:
        mix = (1 - p.t) * 1.5 + p.t * tau_bar
        assert p.c == pytest.approx(abs(1 - mix * mix), abs=1e-12)
    cs = [p.c for p in points]
    assert all(a >= b for a, b in zip(cs, cs[1:]))


def test_segment_scan_certified_instance_improves():
    s3 = s3_groupoid()
    rep = s3_perturbed_rep(5e-3, 6)
    assert certify_near_representation(s3, rep).passed
    points = segment_scan(s3, uniform_haar(s3), rep, steps=8)
    assert points[-1].c <= points[0].c
    assert all(p.invertible for p in points)


def test_restriction_commutes_with_averaging_exactly():
    gpd = two_orbit_groupoid()
    rep = two_orbit_rep()
    for haar in (uniform_haar(gpd), random_haar(gpd, 21)):
        averaged = average(gpd, haar, rep)
        for sub in invariant_subsets(gpd):
            from gavg.groupoid import full_restriction

            rgpd = full_restriction(gpd, sub)
            keep = sorted(sub.objects)
            rhaar = HaarSystem(haar.weights[np.array(keep, dtype=int)]
                               if keep else np.zeros(0))
            path1 = restrict_rep(gpd, averaged, sub)
            path2 = average(rgpd, rhaar, restrict_rep(gpd, rep, sub))
            assert len(path1.mats) == len(path2.mats)
            for a, b in zip(path1.mats, path2.mats):
                assert np.array_equal(a, b)  # bitwise


def test_haar_choice_limits_all_representations():
    pair = pair_groupoid(2)
    rep = pair2_perturbed_rep()
    limits = []
    for w in ((0.3, 0.7), (0.5, 0.5), (0.9, 0.1)):
        final, trace = iterate(pair, HaarSystem(np.array(w)), rep)
        assert trace.converged
        assert is_representation(pair, final, 1e-12)[0]
        limits.append(final)
    # the limits themselves may differ between Haar systems (measured, not asserted)
    spread = max(np.abs(a - b).max()
                 for x in limits for a, b in zip(x.mats, limits[0].mats))
    assert math.isfinite(spread)


def test_thread_count_does_not_change_results(monkeypatch):
    s3 = s3_groupoid()
    h = uniform_haar(s3)
    rep = s3_perturbed_rep(1e-2, 3)
    seq = average(s3, h, rep)
    monkeypatch.setenv("GAVG_THREADS", "4")
    par = average(s3, h, rep)
    for a, b in zip(seq.mats, par.mats):
        assert np.array_equal(a, b)
