import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from steersim.errors import (AliasingRisk, EmptySpectrum, GridMismatch, GridTooCoarse,
                             OutOfRange)
from steersim.spectra import (
    POINTS_PER_SIGMA,
    FrequencyGrid,
    InterferencePattern,
    Spectrum,
    apply_filter,
    check_resolution,
    coherence,
    constant_filter,
    fringe_pattern,
    fringe_rate,
    gaussian_bandpass,
    gaussian_spectrum,
    rectangular_filter,
    rectangular_spectrum,
    step_filter,
    transmit_probability,
)

W0 = 2.325e15
SIG = 1e13


def grid(feature=SIG, half=8 * SIG):
    return FrequencyGrid.around(W0, half, feature)


@pytest.mark.parametrize("st_d", [0.0, 0.5, 1.0, 2.0, 4.0])
def test_gaussian_coherence_matches_closed_form(st_d):
    s = gaussian_spectrum(W0, SIG, grid())
    t = st_d / SIG
    mu = coherence(s, [t])[0]
    expected = math.exp(-0.5 * st_d ** 2) * complex(math.cos(W0 * t), -math.sin(W0 * t))
    assert abs(mu - expected) < 1e-9


@pytest.mark.parametrize("x", [0.3, 1.1, 2.7, 5.0])
def test_rectangular_spectrum_gives_sinc(x):
    width = 4 * SIG
    g = grid(feature=SIG / 64, half=3 * SIG)
    s = rectangular_spectrum(W0, width, g)
    t = x / SIG
    envelope = abs(np.sinc(width * t / (2 * np.pi)))
    assert abs(abs(coherence(s, [t])[0]) - envelope) < 1e-6


def test_asymmetric_spectrum_against_adaptive_quadrature():
    # two unequal Gaussians: independent oracle is scipy.quad on the same density
    def dens(w):
        return np.exp(-0.5 * ((w - W0) / SIG) ** 2) + 0.4 * np.exp(
            -0.5 * ((w - W0 - 2 * SIG) / (0.5 * SIG)) ** 2)

    g = grid(feature=0.5 * SIG, half=10 * SIG)
    s = Spectrum(g, dens(g.omega))
    t = 0.8 / SIG
    lo, hi = -10.0, 10.0
    re = integrate.quad(lambda u: dens(W0 + u * SIG) * math.cos(u * SIG * t), lo, hi,
                        limit=400)[0]
    im = integrate.quad(lambda u: dens(W0 + u * SIG) * math.sin(u * SIG * t), lo, hi,
                        limit=400)[0]
    norm = integrate.quad(lambda u: dens(W0 + u * SIG), lo, hi)[0]
    expected = complex(re, -im) / norm * np.exp(-1j * W0 * t)
    assert abs(coherence(s, [t])[0] - expected) < 1e-9


def test_refining_grid_converges():
    t = 1.3 / SIG
    coarse = coherence(gaussian_spectrum(W0, SIG, grid(feature=SIG)), [t])[0]
    fine = coherence(gaussian_spectrum(W0, SIG, grid(feature=SIG / 4)), [t])[0]
    assert abs(coarse - fine) < 1e-10


def test_zero_delay_probability_is_exactly_one():
    s = gaussian_spectrum(W0, SIG, grid())
    p = fringe_pattern(s, [-1e-13, 0.0, 1e-13])
    assert p.values[1] == 1.0


def test_rate_form_is_half_weight_plus_half_transform():
    s = gaussian_spectrum(W0, SIG, grid()).scaled(3.0)
    r = fringe_rate(s, [0.0])[0]
    assert r == pytest.approx(s.total_weight)
    p = fringe_pattern(s, [0.0], form="rate")
    assert p.values[0] == pytest.approx(s.total_weight)


def test_coarse_grid_rejected():
    g = FrequencyGrid(W0 - 8 * SIG, W0 + 8 * SIG, 101)
    with pytest.raises(GridTooCoarse):
        gaussian_spectrum(W0, SIG, g)
    with pytest.raises(GridTooCoarse):
        check_resolution(g, SIG)


def test_support_outside_grid_rejected():
    with pytest.raises(OutOfRange):
        gaussian_spectrum(W0 + 6 * SIG, SIG, grid(half=8 * SIG))


def test_grid_mismatch():
    s = gaussian_spectrum(W0, SIG, grid())
    f = constant_filter(0.5, grid(feature=SIG / 2))
    with pytest.raises(GridMismatch):
        apply_filter(s, f)


def test_aliasing_detected():
    g = grid()
    s = gaussian_spectrum(W0, SIG, g)
    with pytest.raises(AliasingRisk):
        coherence(s, [1.01 * np.pi / g.spacing])


def test_empty_spectrum_coherence():
    g = grid()
    with pytest.raises(EmptySpectrum):
        coherence(Spectrum.empty(g), [0.0])
    with pytest.raises(EmptySpectrum):
        transmit_probability(Spectrum.empty(g), constant_filter(1.0, g))


def test_step_filter_node_on_edge_is_half():
    g = FrequencyGrid(-2.0, 2.0, 5)
    f = step_filter(0.0, g)
    np.testing.assert_array_equal(f.transmission, [0, 0, 0.5, 1, 1])
    np.testing.assert_array_equal(step_filter(0.0, g, pass_above=False).transmission,
                                  [1, 1, 0.5, 0, 0])


def test_gaussian_bandpass_transmission_closed_form():
    # Gaussian spectrum through a Gaussian filter of the same centre
    g = grid(feature=SIG / 2)
    s = gaussian_spectrum(W0, SIG, g)
    f = gaussian_bandpass(W0, SIG / 2, g)
    sf = SIG / 2
    assert transmit_probability(s, f) == pytest.approx(sf / math.hypot(SIG, sf), rel=1e-10)


def test_filter_lookup_off_grid_is_zero():
    g = grid()
    f = rectangular_filter(W0 - SIG, W0 + SIG, g)
    np.testing.assert_array_equal(f.at([g.omega_min - 1e9, W0, g.omega_max + 1e9]), [0, 1, 0])


def test_pattern_requires_increasing_delays():
    with pytest.raises(ValueError):
        InterferencePattern([0.0, 0.0], [0.5, 0.5])


# --- properties -------------------------------------------------------------

G = grid()
S = gaussian_spectrum(W0, SIG, G)
offsets = st.floats(-3 * SIG, 3 * SIG)
widths = st.floats(SIG, 4 * SIG)


@settings(max_examples=50, deadline=None)
@given(offsets, widths, st.floats(0, 1))
def test_transmitted_plus_absorbed_is_input(off, width, peak):
    f = gaussian_bandpass(W0 + off, width, G, peak)
    t, a = apply_filter(S, f)
    np.testing.assert_allclose(t.density + a.density, S.density, rtol=0, atol=1e-15)
    assert t.total_weight + a.total_weight == pytest.approx(S.total_weight, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(offsets, widths, st.floats(0, 1))
def test_transmit_probability_in_unit_interval(off, width, peak):
    p = transmit_probability(S, gaussian_bandpass(W0 + off, width, G, peak))
    assert 0.0 <= p <= peak + 1e-12


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5e-13, 5e-13), min_size=1, max_size=20, unique=True))
def test_probability_pattern_bounded(delays):
    p = fringe_pattern(S, sorted(delays))
    assert np.all((0 <= p.values) & (p.values <= 1))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 10))
def test_probability_pattern_scale_invariant(k):
    t = np.linspace(0, 3e-13, 7)
    np.testing.assert_allclose(fringe_pattern(S.scaled(k), t).values,
                               fringe_pattern(S, t).values, atol=1e-12)


def test_gaussian_peak_ratio_and_weight():
    g = grid()
    s = gaussian_spectrum(W0, SIG, g, peak=2.5)
    i0 = int(np.argmin(np.abs(g.omega - W0)))
    assert g.omega[i0] == pytest.approx(W0, abs=1e-6 * g.spacing)
    assert s.density[i0] == s.density.max()
    i1 = i0 + POINTS_PER_SIGMA
    assert g.omega[i1] - g.omega[i0] == pytest.approx(SIG, rel=1e-12)
    assert s.density[i1] / s.density[i0] == pytest.approx(math.exp(-0.5), rel=1e-12)
    assert s.total_weight == pytest.approx(2.5 * SIG * math.sqrt(2 * math.pi), rel=1e-9)


def test_transparent_and_opaque_filters():
    g = grid()
    s = gaussian_spectrum(W0, SIG, g)
    t, a = apply_filter(s, constant_filter(1.0, g))
    np.testing.assert_array_equal(t.density, s.density)
    assert a.is_empty
    t, a = apply_filter(s, constant_filter(0.0, g))
    assert t.is_empty
    np.testing.assert_array_equal(a.density, s.density)
    assert transmit_probability(s, constant_filter(1.0, g)) == 1.0
    assert transmit_probability(s, constant_filter(0.0, g)) == 0.0


def test_step_at_center_transmits_half():
    g = grid()
    s = gaussian_spectrum(W0, SIG, g)
    assert transmit_probability(s, step_filter(W0, g)) == pytest.approx(0.5, abs=1e-9)


def test_narrow_bandpass_against_refined_grid():
    def prob(feature):
        g = grid(feature=feature)
        return transmit_probability(gaussian_spectrum(W0, SIG, g),
                                    gaussian_bandpass(W0, SIG / 20, g))

    assert prob(SIG / 20) == pytest.approx(prob(SIG / 200), abs=1e-9)


def test_doubling_points_changes_pattern_by_less_than_1e6():
    t = np.linspace(0, 4 / SIG, 9)
    g1 = FrequencyGrid(W0 - 8 * SIG, W0 + 8 * SIG, 257, SIG)
    g2 = FrequencyGrid(W0 - 8 * SIG, W0 + 8 * SIG, 513, SIG)
    p1 = fringe_pattern(gaussian_spectrum(W0, SIG, g1), t).values
    p2 = fringe_pattern(gaussian_spectrum(W0, SIG, g2), t).values
    assert np.max(np.abs(p1 - p2)) < 1e-6


@settings(max_examples=40, deadline=None)
@given(st.floats(-2 * SIG, 2 * SIG), st.floats(SIG, 1.2 * SIG), st.floats(0, 5),
       st.floats(0, 5))
def test_rate_form_is_linear(off, width, w1, w2):
    s2 = gaussian_spectrum(W0 + off, width, G)
    t = np.linspace(0, 3e-13, 7)
    combo = Spectrum(G, w1 * S.density + w2 * s2.density)
    np.testing.assert_allclose(fringe_rate(combo, t),
                               w1 * fringe_rate(S, t) + w2 * fringe_rate(s2, t),
                               rtol=0, atol=1e-10 * max(1.0, combo.total_weight))


@settings(max_examples=50, deadline=None)
@given(offsets, widths, st.floats(0, 1))
def test_completeness_pointwise(off, width, peak):
    t, a = apply_filter(S, gaussian_bandpass(W0 + off, width, G, peak))
    assert np.max(np.abs(t.density + a.density - S.density)) <= 1e-12 * S.density.max()
