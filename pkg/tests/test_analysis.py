import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from conftest import desk_layout
from steersim.analysis import (
    BEYOND_RANGE,
    UNATTAINABLE,
    classify,
    compare_patterns,
    estimate_visibility,
    required_samples,
    threshold_scan,
)
from steersim.errors import GridMismatch, NonMonotoneScan, TooFewPoints
from steersim.spectra import InterferencePattern

W = 2.325e15
T = 2 * math.pi / W
DELAYS = np.arange(21) * T / 20


def cosine(v, mean=1.0, phase=0.0, delays=DELAYS, errors=None):
    return InterferencePattern(delays, mean * (1 + v * np.cos(W * delays + phase)), errors)


@pytest.mark.parametrize("v", [0.0, 0.25, 0.9692, 1.0])
def test_cosine_fit_recovers_exact_visibility(v):
    est = estimate_visibility(cosine(v, mean=3.0, phase=0.7), W)
    assert est.v == pytest.approx(v, abs=1e-12)
    assert not est.fallback


def test_minmax_on_exact_cosine():
    est = estimate_visibility(cosine(0.5, delays=np.arange(40) * T / 40), W, "minmax")
    assert est.v == pytest.approx(0.5, abs=1e-12)


def test_short_span_falls_back_to_minmax():
    est = estimate_visibility(cosine(0.5, delays=np.linspace(0, 0.4 * T, 9)), W)
    assert est.fallback and est.method == "minmax"


def test_flat_pattern_is_degenerate():
    est = estimate_visibility(InterferencePattern(DELAYS, np.full(21, 0.5)), W)
    assert est.degenerate and est.v == 0.0


def test_too_few_points():
    with pytest.raises(TooFewPoints):
        estimate_visibility(InterferencePattern([0.0], [1.0]), W)


def test_visibility_error_matches_scatter_of_repeats():
    # oracle: empirical spread of the estimator over Poisson replicas
    rng = np.random.default_rng(1)
    mean = 2000 * (1 + 0.3 * np.cos(W * DELAYS))
    vs, sig = [], []
    for _ in range(400):
        c = rng.poisson(mean).astype(float)
        est = estimate_visibility(InterferencePattern(DELAYS, c, np.sqrt(c)), W)
        vs.append(est.v)
        sig.append(est.sigma_v)
    assert np.mean(sig) == pytest.approx(np.std(vs), rel=0.1)
    assert np.mean(vs) == pytest.approx(0.3, abs=3 * np.std(vs) / 20)


def test_compare_identical_patterns():
    p = cosine(0.3, errors=np.full(21, 0.1))
    c = compare_patterns(p, p)
    assert c.chi2 == 0 and c.p_value == 1.0 and c.dof == 21


def test_compare_counts_excluded_bins():
    e = np.full(21, 0.1)
    e[3] = 0.0
    c = compare_patterns(cosine(0.3, errors=e), cosine(0.3, errors=e))
    assert c.excluded == 1 and c.dof == 20


def test_compare_needs_errors_and_same_delays():
    with pytest.raises(ValueError):
        compare_patterns(cosine(0.3), cosine(0.3))
    with pytest.raises(GridMismatch):
        compare_patterns(cosine(0.3, errors=np.ones(21)),
                         cosine(0.3, delays=DELAYS + 1e-16, errors=np.ones(21)))


def test_compare_p_values_uniform_under_null():
    rng = np.random.default_rng(2)
    mean = 500 * (1 + 0.4 * np.cos(W * DELAYS))
    ps = []
    for _ in range(500):
        a, b = rng.poisson(mean), rng.poisson(mean)
        ps.append(compare_patterns(
            InterferencePattern(DELAYS, a, np.sqrt(a)),
            InterferencePattern(DELAYS, b, np.sqrt(b))).p_value)
    assert stats.kstest(ps, "uniform").pvalue > 1e-3


def refs(scale=1e3):
    u = cosine(0.0, mean=scale)
    c = cosine(0.5, mean=scale)
    return u, c


def noisy(p, rng):
    x = rng.poisson(p.values).astype(float)
    return InterferencePattern(p.delays, x, np.sqrt(np.maximum(x, 1)))


def test_classify_picks_generating_reference():
    rng = np.random.default_rng(3)
    u, c = refs()
    assert classify(noisy(u, rng), u, c, 0.01)[0] == "unitary"
    assert classify(noisy(c, rng), u, c, 0.01)[0] == "collapsed"


def test_classify_identical_references_inconclusive():
    u, _ = refs()
    assert classify(noisy(u, np.random.default_rng(0)), u, u, 0.01)[0] == "inconclusive"


def test_classify_p_values_uniform_under_unitary():
    rng = np.random.default_rng(4)
    u = cosine(0.0, mean=1e4)
    c = cosine(0.05, mean=1e4)
    ps = [classify(noisy(u, rng), u, c, 0.01)[2] for _ in range(400)]
    assert stats.kstest(ps, "uniform").pvalue > 1e-3


def test_threshold_scan_recovers_step():
    rng = np.random.default_rng(5)
    u, c = refs()
    paths = np.arange(5.0, 26.0)
    results = [(p, noisy(c if p <= 15 else u, rng)) for p in paths]
    res = threshold_scan(results, u, c, 0.01, desk_layout(c=3e8))
    assert res.verdict == "threshold found"
    assert res.threshold_estimate == 15.5 and res.threshold_half_width == 0.5
    assert res.tau == pytest.approx(4e-8, rel=1e-15)
    assert res.kappa_lower_bound == pytest.approx(3e8, rel=1e-15)


def test_threshold_scan_one_sided():
    rng = np.random.default_rng(6)
    u, c = refs()
    res = threshold_scan([(p, noisy(c, rng)) for p in (5.0, 6.0)], u, c, 0.01, desk_layout())
    assert res.verdict == BEYOND_RANGE and res.kappa_lower_bound is not None
    res = threshold_scan([(p, noisy(u, rng)) for p in (5.0, 6.0)], u, c, 0.01, desk_layout())
    assert res.verdict == BEYOND_RANGE and res.kappa_lower_bound is None


def test_threshold_scan_non_monotone():
    rng = np.random.default_rng(7)
    u, c = refs()
    with pytest.raises(NonMonotoneScan) as exc:
        threshold_scan([(5.0, noisy(u, rng)), (6.0, noisy(c, rng))], u, c, 0.01,
                       desk_layout())
    assert len(exc.value.scan_points) == 2


def test_required_samples_identical_patterns_unattainable():
    assert required_samples(cosine(0.0, 0.5), cosine(0.0, 0.5), 0.01, 0.99).n == UNATTAINABLE


def test_required_samples_calibrated_by_simulation():
    # oracle: Pearson test power estimated from Poisson replicas at the returned N
    pu = InterferencePattern(DELAYS, 0.5 * (1 + 0.0 * DELAYS))
    pc = InterferencePattern(DELAYS, 0.5 * (1 + 0.05 * np.cos(W * DELAYS)))
    req = required_samples(pu, pc, 0.01, 0.9)
    n = req.n_exact
    rng = np.random.default_rng(8)
    crit = stats.chi2.ppf(0.99, req.dof)
    x = rng.poisson(n * pc.values, size=(20000, len(DELAYS)))
    stat = np.sum((x - n * pu.values) ** 2 / (n * pu.values), axis=1)
    assert np.mean(stat > crit) == pytest.approx(0.9, abs=0.015)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 1.0), st.floats(1.0, 4.0))
def test_required_samples_scale_with_inverse_square_effect(v, k):
    pu = InterferencePattern(DELAYS, np.full(21, 0.5))
    base = required_samples(pu, InterferencePattern(DELAYS, 0.5 * (1 + v / k * np.cos(W * DELAYS))),
                            0.01, 0.99)
    big = required_samples(pu, InterferencePattern(DELAYS, 0.5 * (1 + v * np.cos(W * DELAYS))),
                           0.01, 0.99)
    assert base.n_exact == pytest.approx(big.n_exact * k ** 2, rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 1), st.floats(0.1, 1e6), st.floats(-math.pi, math.pi))
def test_visibility_estimate_in_unit_interval(v, mean, phase):
    est = estimate_visibility(cosine(v, mean, phase), W)
    assert 0.0 <= est.v <= 1.0
    assert est.v == pytest.approx(v, abs=1e-9)


def pearson_power(pu, pc, n, alpha, rng, reps=20000):
    crit = stats.chi2.ppf(1 - alpha, len(pu))
    x = rng.poisson(n * pc, size=(reps, len(pu)))
    return np.mean(np.sum((x - n * pu) ** 2 / (n * pu), axis=1) > crit)


def mc_required(pu, pc, alpha, power, seed):
    """Smallest integer N whose simulated Pearson power reaches ``power``."""
    lo, hi = 1, 2
    while pearson_power(pu, pc, hi, alpha, np.random.default_rng(seed)) < power:
        lo, hi = hi, hi * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if pearson_power(pu, pc, mid, alpha, np.random.default_rng(seed)) >= power:
            hi = mid
        else:
            lo = mid
    return hi


def test_required_samples_polarization_full_vs_flat():
    pu = InterferencePattern(DELAYS, np.full(21, 0.5))
    pc = cosine(1.0, 0.5)
    req = required_samples(pu, pc, 0.01, 0.99)
    oracle = mc_required(pu.values, pc.values, 0.01, 0.99, seed=9)
    assert req.n == pytest.approx(oracle, rel=0.25)


def test_doubling_difference_quarters_samples_by_simulation():
    pu = np.full(21, 0.5)
    small = 0.5 * (1 + 0.1 * np.cos(W * DELAYS))
    large = 0.5 * (1 + 0.2 * np.cos(W * DELAYS))
    n_small = mc_required(pu, small, 0.01, 0.9, seed=10)
    n_large = mc_required(pu, large, 0.01, 0.9, seed=10)
    assert n_small / n_large == pytest.approx(4.0, rel=0.1)
    p = InterferencePattern(DELAYS, pu)
    ratio = (required_samples(p, InterferencePattern(DELAYS, small), 0.01, 0.9).n_exact
             / required_samples(p, InterferencePattern(DELAYS, large), 0.01, 0.9).n_exact)
    assert ratio == pytest.approx(4.0, rel=0.1)


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 1), st.floats(1e-3, 1e6), st.floats(-math.pi, math.pi))
def test_visibility_scale_invariant(v, k, phase):
    p = cosine(v, 0.5, phase)
    assert estimate_visibility(p.scaled(k), W).v == pytest.approx(
        estimate_visibility(p, W).v, abs=1e-9)
