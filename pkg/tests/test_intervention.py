import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowmech import AffineRule, design_rule, intervene, sustain_conditions
from flowmech.flow import nash_equilibrium, optimal_profile
from flowmech.intervention import (
    DegenerateTarget,
    InsufficientIntervention,
    UnsustainableTarget,
    slope_bound,
    utility_under_rule,
    verify_sustain_numeric,
)

import oracles
from helpers import MU, TYPES, scenario


def profiles(n):
    return [np.array(t) for t in itertools.product(TYPES, repeat=n)]


def test_intervene_examples():
    rule = AffineRule((2.0, 2.0), (1.0, 1.0), 5.0)
    assert intervene(rule, [1.0, 1.0]) == 0.0
    assert intervene(rule, [1.5, 1.0]) == pytest.approx(1.0)
    assert intervene(rule, [5.0, 5.0]) == 5.0
    assert intervene(rule, [0.2, 0.3]) == 0.0


def test_affine_rule_validation():
    with pytest.raises(ValueError):
        AffineRule((-1.0,), (1.0,), 1.0)
    with pytest.raises(ValueError):
        AffineRule((1.0, 1.0), (1.0,), 1.0)
    rule = AffineRule((1.0, 2.0), (0.5, 0.5), 3.0)
    assert AffineRule.from_dict(rule.to_dict()) == rule


@given(
    c=st.lists(st.floats(0, 10), min_size=3, max_size=3),
    target=st.lists(st.floats(0, 1.5), min_size=3, max_size=3),
    shift=st.lists(st.floats(0, 1.5), min_size=3, max_size=3),
    d0=st.floats(0, 5),
)
def test_region_identity(c, target, shift, d0):
    rule = AffineRule(c, target, d0)
    below = np.asarray(target) - np.asarray(shift) * np.asarray(target) / 1.5
    assert intervene(rule, below) == 0.0
    assert 0.0 <= intervene(rule, np.asarray(target) + shift) <= d0


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_optimal_target_sustained_for_every_profile(n):
    sc = scenario(n)
    for t in profiles(n):
        d = optimal_profile(sc, t)
        rule = AffineRule((n - 1.0,) * n, tuple(d), MU / (1 + TYPES[0]))
        assert sustain_conditions(rule, t, sc)


def test_no_slope_fails():
    sc = scenario(3)
    t = np.array([0.1, 1.0, 1.0])
    rule = AffineRule((0.0,) * 3, tuple(optimal_profile(sc, t)), MU)
    assert not sustain_conditions(rule, t, sc)


def test_boundary_example_two_users():
    sc = scenario(2)
    t = np.array([1.0, 1.0])
    rule = AffineRule((1.0, 1.0), (1.25, 1.25), MU)
    assert slope_bound([1.25, 1.25], t, MU) == pytest.approx([1.0, 1.0])
    assert sustain_conditions(rule, t, sc)
    assert oracles.scan_deviation(MU, rule.c, rule.target, MU, list(t), 0, 20000) <= 1e-6
    assert verify_sustain_numeric(rule, t, sc)[0]


def test_zero_target_rejected():
    sc = scenario(2)
    with pytest.raises(DegenerateTarget):
        sustain_conditions(AffineRule((1.0, 1.0), (0.0, 1.0), MU), [1.0, 1.0], sc)
    with pytest.raises(DegenerateTarget):
        design_rule([0.0, 1.0], sc, "general", t=[1.0, 1.0])


def test_design_optimal_two_users():
    sc = scenario(2)
    t = np.array([0.1, 1.0])
    rule = design_rule(optimal_profile(sc, t), sc, "optimal", t=t)
    assert rule.c == pytest.approx((1.0, 1.0), abs=1e-8)
    assert rule.c[0] > 1.0
    assert rule.d0_max == pytest.approx(MU / 1.1)
    with pytest.raises(ValueError):
        design_rule(nash_equilibrium(sc, t), sc, "optimal", t=t)
    with pytest.raises(InsufficientIntervention):
        design_rule(optimal_profile(sc, t), sc, "optimal", t=t, d0_max=1.0)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_design_general_at_nash(n):
    sc = scenario(n)
    for t in profiles(n):
        target = nash_equilibrium(sc, t)
        rule = design_rule(target, sc, "general", t=t)
        assert rule.d0_max == MU
        want = np.maximum(slope_bound(target, np.full(n, TYPES[-1]), MU), 0) + 1e-9
        assert rule.c == pytest.approx(tuple(want), abs=1e-15)
        assert sustain_conditions(rule, t, sc)
        assert verify_sustain_numeric(rule, t, sc)[0]


def test_design_general_errors():
    sc = scenario(2)
    t = np.array([1.0, 1.0])
    with pytest.raises(UnsustainableTarget):
        design_rule(nash_equilibrium(sc, t) * 1.01, sc, "general", t=t)
    small = nash_equilibrium(sc, t) * 0.2
    with pytest.raises(InsufficientIntervention):
        design_rule(small, sc, "general", t=t, d0_max=0.1)
    with pytest.raises(ValueError):
        design_rule(small, sc, "bogus", t=t)


def test_design_general_without_profile_uses_lowest_nash():
    sc = scenario(3)
    floor = TYPES[0] * MU / (1 + TYPES[0] + 2 * TYPES[1])
    design_rule([floor] * 3, sc, "general")
    with pytest.raises(UnsustainableTarget):
        design_rule([floor * 1.001] * 3, sc, "general")


def test_halved_slope_detected():
    sc = scenario(3)
    t = np.array([0.1, 1.0, 1.0])
    d = optimal_profile(sc, t)
    good = design_rule(d, sc, "optimal", t=t)
    bad = AffineRule(tuple(np.array(good.c) / 2), good.target, good.d0_max)
    ok, worst = verify_sustain_numeric(bad, t, sc)
    assert not ok
    user, action, gain = worst
    assert action > d[user] and gain > 1e-6
    assert oracles.scan_deviation(MU, bad.c, bad.target, bad.d0_max, list(t), user, 20000) > 1e-6


def test_silent_rule_does_not_sustain_optimum():
    sc = scenario(2)
    t = np.array([1.0, 1.0])
    rule = AffineRule((1.0, 1.0), tuple(optimal_profile(sc, t)), 0.0)
    assert not verify_sustain_numeric(rule, t, sc)[0]


def test_grid_size_precondition():
    sc = scenario(2)
    rule = AffineRule((1.0, 1.0), (1.0, 1.0), MU)
    with pytest.raises(ValueError):
        verify_sustain_numeric(rule, [1.0, 1.0], sc, grid_points=100)


def test_utility_branches():
    sc = scenario(2)
    t = np.array([1.0, 0.1])
    rule = AffineRule((2.0, 2.0), (1.0, 0.5), 1.0)
    # flat region: no intervention
    assert utility_under_rule(rule, [0.8, 0.5], t, 0, MU) == pytest.approx(0.8 * 3.7)
    # middle branch slope: t d^(t-1) (mu - sum - c(d - target)) - d^t (1 + c)
    x, h = 1.2, 1e-6
    num = (
        utility_under_rule(rule, [x + h, 0.5], t, 0, MU)
        - utility_under_rule(rule, [x - h, 0.5], t, 0, MU)
    ) / (2 * h)
    assert num == pytest.approx((MU - x - 0.5 - 2 * (x - 1.0)) - x * 3.0, rel=1e-6)
    # saturated: capacity reduced by d0_max
    assert utility_under_rule(rule, [2.0, 0.5], t, 0, MU) == pytest.approx(2.0 * (MU - 2.5 - 1.0))


targets = st.integers(2, 4).flatmap(
    lambda n: st.tuples(
        st.just(n),
        st.lists(st.sampled_from(TYPES), min_size=n, max_size=n),
        st.lists(st.floats(0.05, 1.0), min_size=n, max_size=n),
        st.lists(st.floats(0.0, 2.0), min_size=n, max_size=n),
        st.floats(0.0, MU),
    )
)


@settings(max_examples=200)
@given(targets)
def test_sustain_conditions_sound(case):
    n, t, frac, extra, d0 = case
    sc = scenario(n)
    t = np.array(t)
    target = nash_equilibrium(sc, t) * np.array(frac)
    base = np.maximum(slope_bound(target, t, MU), 0.0)
    rule = AffineRule(tuple(base * (0.8 + np.array(extra))), tuple(target), d0)
    if sustain_conditions(rule, t, sc):
        assert verify_sustain_numeric(rule, t, sc)[0]


@settings(max_examples=40)
@given(targets)
def test_quasi_concave_under_designed_rule(case):
    n, t, frac, _, _ = case
    sc = scenario(n)
    t = np.array(t)
    target = nash_equilibrium(sc, t) * np.array(frac)
    rule = design_rule(target, sc, "general", t=t)
    for i in range(n):
        grid = np.linspace(0, MU, 801)
        vals = []
        for x in grid:
            d = target.copy()
            d[i] = x
            vals.append(utility_under_rule(rule, d, t, i, MU))
        vals = np.array(vals)
        up = grid <= target[i]
        assert np.all(np.diff(vals[up]) >= -1e-9)
        assert np.all(np.diff(vals[~up]) <= 1e-9)


@settings(max_examples=40)
@given(targets)
def test_slope_condition_is_necessary(case):
    n, t, frac, _, _ = case
    sc = scenario(n)
    t = np.array(t)
    target = nash_equilibrium(sc, t) * np.minimum(np.array(frac), 0.9)
    bound = slope_bound(target, t, MU)
    c = np.maximum(bound, 0.0)
    i = int(np.argmax(bound))
    if bound[i] <= 0.05:
        return
    c[i] = 0.9 * bound[i]
    rule = AffineRule(tuple(c), tuple(target), MU)
    ok, worst = verify_sustain_numeric(rule, t, sc)
    assert not ok
    assert worst[1] > target[worst[0]]
