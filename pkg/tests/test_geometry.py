import math

import pytest
from hypothesis import given, settings, strategies as st

from steersim.errors import DivisionByZeroTau, MissingField, NegativeTau
from steersim.geometry import (Layout, Verdict, collapse_arrival_vs_detection, kappa,
                               ordering, tau_of_flight)


def test_tau_and_kappa_at_desk_scale():
    tau = tau_of_flight(27.0, 15.0, 3e8)
    assert tau == pytest.approx(4e-8, rel=1e-15)
    assert kappa(12.0, tau) == pytest.approx(3e8, rel=1e-15)


def test_negative_tau():
    with pytest.raises(NegativeTau):
        tau_of_flight(10.0, 11.0, 3e8)


def test_zero_tau():
    with pytest.raises(DivisionByZeroTau):
        kappa(12.0, tau_of_flight(27.0, 27.0, 3e8))


def test_missing_alice_path():
    lay = Layout(path_s_bd=27.0, dist_f_bd=12.0, path_s_f=10.0)
    with pytest.raises(MissingField):
        lay.alice_path("polarization")


def test_ordering_verdicts():
    assert ordering(Layout(27.0, 12.0, path_s_f=10.0), "energy").verdict is \
        Verdict.ALICE_BEFORE_BOB
    assert ordering(Layout(27.0, 12.0, path_s_f=30.0), "energy").verdict is \
        Verdict.ALICE_AFTER_BOB
    assert ordering(Layout(27.0, 12.0, path_s_f=27.0 + 5e-10), "energy").verdict is \
        Verdict.SIMULTANEOUS


def test_instant_collapse_within_threshold_applies():
    lay = Layout(27.0, 12.0, path_s_f=15.0)
    assert collapse_arrival_vs_detection(lay, math.inf, 15.0)
    assert not collapse_arrival_vs_detection(lay.with_alice_path("energy", 16.0), math.inf, 15.0)


def test_arrival_tie_counts():
    # 15 m + 12 m * c / kappa = 27 m exactly when kappa = c
    lay = Layout(27.0, 12.0, path_s_f=15.0, light_speed=3e8)
    assert collapse_arrival_vs_detection(lay, 3e8, math.inf)
    assert not collapse_arrival_vs_detection(lay, 3e8 * (1 - 1e-9), math.inf)


def test_optical_transit_uses_optical_path():
    lay = Layout(27.0, 12.0, path_s_f=15.0, path_f_bd=20.0, light_speed=3e8,
                 collapse_transit="optical")
    assert not collapse_arrival_vs_detection(lay, 3e8, math.inf)
    assert collapse_arrival_vs_detection(lay, 3e8 * 20 / 12, math.inf)


def test_inconsistent_layout_rejected():
    with pytest.raises(ValueError):
        Layout(path_s_bd=1.0, dist_f_bd=12.0, path_s_f=1.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 100), st.floats(0, 100), st.floats(1e7, 1e10))
def test_tau_kappa_round_trip(bd, thr, c):
    if thr > bd:
        with pytest.raises(NegativeTau):
            tau_of_flight(bd, thr, c)
        return
    tau = tau_of_flight(bd, thr, c)
    assert tau >= 0
    if tau > 0:
        assert kappa(12.0, tau) * tau == pytest.approx(12.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 50), st.floats(0, 50), st.floats(1e7, 1e10))
def test_collapse_monotone_in_alice_path(p1, p2, k):
    lo, hi = sorted((p1, p2))
    lay = Layout(60.0, 12.0, path_s_f=lo, light_speed=3e8)
    if collapse_arrival_vs_detection(lay.with_alice_path("energy", hi), k, 40.0):
        assert collapse_arrival_vs_detection(lay, k, 40.0)


@pytest.mark.parametrize("sf, verdict", [(10.0, Verdict.ALICE_BEFORE_BOB),
                                         (30.0, Verdict.ALICE_AFTER_BOB),
                                         (20.0, Verdict.SIMULTANEOUS)])
def test_ordering_against_twenty_metre_bob(sf, verdict):
    assert ordering(Layout(20.0, 12.0, path_s_f=sf), "energy").verdict is verdict


def test_boundary_values():
    assert tau_of_flight(27.0, 27.0, 3e8) == 0.0
    with pytest.raises(NegativeTau):
        tau_of_flight(27.0, 30.0, 3e8)
    assert kappa(12.0, 4.0e-12) == pytest.approx(3.0e12, rel=1e-15)
    assert kappa(0.0, 1e-9) == 0.0


def test_beyond_threshold_never_collapses():
    lay = Layout(27.0, 12.0, path_s_f=16.0)
    assert not collapse_arrival_vs_detection(lay, math.inf, 15.0)
    assert not collapse_arrival_vs_detection(lay, 1e30, 15.0)


def test_light_speed_front_ties_at_detection():
    lay = Layout(27.0, 17.0, path_s_f=10.0, light_speed=3e8)
    assert collapse_arrival_vs_detection(lay, 3e8, math.inf)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 27), st.floats(1e6, 1e12), st.floats(1.0, 1e3))
def test_faster_collapse_never_undoes_arrival(sf, k, factor):
    lay = Layout(27.0, 12.0, path_s_f=sf, light_speed=3e8)
    if collapse_arrival_vs_detection(lay, k, 20.0):
        assert collapse_arrival_vs_detection(lay, k * factor, 20.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 26), st.floats(0, 26))
def test_kappa_strictly_increasing_in_threshold(a, b):
    # a larger threshold leaves less time of flight, so a faster bound
    lo, hi = sorted((a, b))
    if hi - lo < 1e-9:
        return
    assert kappa(12.0, tau_of_flight(27.0, lo, 3e8)) < kappa(12.0, tau_of_flight(27.0, hi, 3e8))


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 100), st.floats(0, 100))
def test_ordering_antisymmetric(x, y):
    v1 = ordering(Layout(y, 0.0, path_s_f=x), "energy").verdict
    v2 = ordering(Layout(x, 0.0, path_s_f=y), "energy").verdict
    swap = {Verdict.ALICE_BEFORE_BOB: Verdict.ALICE_AFTER_BOB,
            Verdict.ALICE_AFTER_BOB: Verdict.ALICE_BEFORE_BOB,
            Verdict.SIMULTANEOUS: Verdict.SIMULTANEOUS}
    assert v2 is swap[v1]


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-12, 1e-6), st.floats(1e-12, 1e-6))
def test_kappa_non_increasing_in_tau(t1, t2):
    lo, hi = sorted((t1, t2))
    assert kappa(12.0, hi) <= kappa(12.0, lo)
