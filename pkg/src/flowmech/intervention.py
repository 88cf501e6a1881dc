"""Affine intervention rules and the conditions under which they sustain a target.

An affine rule injects ``clip(sum_i c_i (d_i - target_i), 0, d0_max)``
packets/s of its own traffic, so users who exceed their target congest the
server for everybody.  A rule *sustains* a target when the target is a Nash
equilibrium of the game with the rule in place and the rule stays silent
on the equilibrium path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .flow import FlowUtility, nash_equilibrium, optimal_profile
from .game import Scenario

SLOPE_MARGIN = 1e-9
COND_TOL = 1e-9
DEVIATION_TOL = 1e-6


class DegenerateTarget(ValueError):
    """A zero-rate target leaves the slope condition undefined."""


class UnsustainableTarget(ValueError):
    """The target exceeds the no-intervention equilibrium for some profile."""


class InsufficientIntervention(ValueError):
    """The device's maximum rate is too low for the requested rule."""


@dataclass(frozen=True)
class AffineRule:
    c: tuple[float, ...]
    target: tuple[float, ...]
    d0_max: float

    def __post_init__(self):
        c = tuple(float(x) for x in self.c)
        target = tuple(float(x) for x in self.target)
        if len(c) != len(target):
            raise ValueError("slopes and target must have the same length")
        if any(x < 0 for x in c) or any(x < 0 for x in target) or self.d0_max < 0:
            raise ValueError("affine rule parameters must be nonnegative")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "d0_max", float(self.d0_max))

    @classmethod
    def silent(cls, target: Sequence[float]) -> "AffineRule":
        """A rule that never intervenes."""
        return cls((0.0,) * len(target), tuple(target), 0.0)

    def to_dict(self) -> dict:
        return {"c": list(self.c), "target": list(self.target), "d0_max": self.d0_max}

    @classmethod
    def from_dict(cls, data: dict) -> "AffineRule":
        return cls(tuple(data["c"]), tuple(data["target"]), data["d0_max"])


def intervene(rule: AffineRule, d: Sequence[float]) -> float:
    excess = float(np.dot(rule.c, np.asarray(d, dtype=float) - rule.target))
    return min(max(excess, 0.0), rule.d0_max)


def utility_under_rule(rule: AffineRule, d, t, i: int, mu: float) -> float:
    """User i's power when the device reacts to ``d`` according to ``rule``."""
    d = np.asarray(d, dtype=float)
    t = np.asarray(t, dtype=float)
    return FlowUtility(mu).user(intervene(rule, d), d, t[i], i)


def slope_bound(target, t, mu: float) -> np.ndarray:
    """Smallest slopes that deter a marginal rise above the target."""
    target = np.asarray(target, dtype=float)
    t = np.asarray(t, dtype=float)
    return (t * (mu - target.sum()) - target) / target


def device_bound(c, target, t, mu: float) -> np.ndarray:
    """Smallest device rate keeping the saturated branch unprofitable."""
    c = np.asarray(c, dtype=float)
    target = np.asarray(target, dtype=float)
    t = np.asarray(t, dtype=float)
    return c * (t * (mu - target.sum()) - target) / (1.0 + t * (1.0 + c))


def sustain_conditions(rule: AffineRule, t, scenario: Scenario) -> bool:
    """Closed-form sufficient test that ``rule`` sustains its target at types ``t``."""
    target = np.asarray(rule.target)
    if np.any(target <= 0):
        raise DegenerateTarget("target rates must be positive")
    mu = scenario.mu
    if np.any(target > nash_equilibrium(scenario, t) + COND_TOL):
        return False
    c = np.asarray(rule.c)
    if np.any(c < slope_bound(target, t, mu) - COND_TOL):
        return False
    return bool(np.all(rule.d0_max >= device_bound(c, target, t, mu) - COND_TOL))


def type_free_rule(target, scenario: Scenario, d0_max: float | None = None) -> AffineRule:
    """Slopes and device rate sized for the highest type, so the rule does not
    depend on the (reported) types.  No check that the target is sustainable."""
    target = np.asarray(target, dtype=float)
    if np.any(target <= 0):
        raise DegenerateTarget("target rates must be positive")
    mu, top = scenario.mu, scenario.type_space.values[-1]
    slopes = np.maximum(slope_bound(target, np.full(len(target), top), mu), 0.0)
    # Limit of the device bound as the slope grows, at the highest type.
    need = max(0.0, float(np.max(mu - target.sum() - target / top)))
    if d0_max is None:
        d0_max = mu
    elif d0_max < need - COND_TOL:
        raise InsufficientIntervention(f"device rate {d0_max:g} below the required {need:g}")
    return AffineRule(tuple(slopes + SLOPE_MARGIN), tuple(target), d0_max)


def lowest_nash(scenario: Scenario) -> float:
    """Smallest equilibrium rate any user can have over all type profiles."""
    v = scenario.type_space.values
    return v[0] * scenario.mu / (1.0 + v[0] + (scenario.n - 1) * v[-1])


def design_rule(
    target,
    scenario: Scenario,
    mode: str = "general",
    t=None,
    d0_max: float | None = None,
) -> AffineRule:
    """Build an affine rule sustaining ``target`` whatever the users' types.

    ``mode="optimal"`` expects the manager optimum for the profile ``t`` and
    uses slopes ``n - 1`` with a device rate of ``mu / (1 + tau_1)``.
    ``mode="general"`` accepts a target below the no-intervention equilibrium
    of ``t`` (of every profile when ``t`` is omitted) and sizes slopes and
    device rate for the highest type, so the rule also holds against users
    who misreport.
    """
    target = np.asarray(target, dtype=float)
    mu, n = scenario.mu, len(target)
    if n != scenario.n:
        raise ValueError(f"target has {n} entries for {scenario.n} users")
    if np.any(target <= 0):
        raise DegenerateTarget("target rates must be positive")
    if mode == "optimal":
        if t is None or not np.allclose(
            target, optimal_profile(scenario, t), rtol=1e-9, atol=1e-12
        ):
            raise ValueError("optimal mode requires the manager-optimal target of t")
        need = mu / (1.0 + scenario.type_space.values[0])
        if d0_max is None:
            d0_max = need
        elif d0_max < need - COND_TOL:
            raise InsufficientIntervention(
                f"device rate {d0_max:g} below the required {need:g}"
            )
        return AffineRule((n - 1.0 + SLOPE_MARGIN,) * n, tuple(target), d0_max)
    if mode != "general":
        raise ValueError(f"unknown mode {mode!r}")
    cap = nash_equilibrium(scenario, t) if t is not None else lowest_nash(scenario)
    if np.any(target > cap + COND_TOL):
        raise UnsustainableTarget("target exceeds the no-intervention equilibrium")
    return type_free_rule(target, scenario, d0_max)


def deviation_grid(mu: float, grid_points: int, anchors=()) -> np.ndarray:
    """Uniform grid on [0, mu] refined tenfold within mu/100 of each anchor."""
    grid = [np.linspace(0.0, mu, grid_points)]
    half = mu / 100.0
    local = max(2, int(round(grid_points * 2 * half / mu)) * 10)
    for a in np.unique(np.asarray(anchors, dtype=float)):
        lo, hi = max(0.0, a - half), min(mu, a + half)
        grid.append(np.linspace(lo, hi, local))
        grid.append([a])
    return np.unique(np.concatenate(grid))


def verify_sustain_numeric(
    rule: AffineRule, t, scenario: Scenario, grid_points: int = 1000
):
    """Exhaustive unilateral-deviation scan of the complete-information game.

    Returns ``(ok, worst)`` where ``worst`` is ``None`` or a tuple
    ``(user, action, gain)`` for the most profitable deviation found.
    """
    if grid_points < 1000:
        raise ValueError("grid_points must be at least 1000")
    mu = scenario.mu
    target = np.asarray(rule.target)
    t = np.asarray(t, dtype=float)
    util = FlowUtility(mu)
    worst = None
    for i in range(len(target)):
        base = util.user(intervene(rule, target), target, t[i], i)
        grid = deviation_grid(mu, grid_points, [target[i]])
        others = target.sum() - target[i]
        vals = kernels.deviation_values(
            grid, t[i], mu, [others], [target[i]], [rule.c[i]], [rule.d0_max], [1.0]
        )
        g = int(np.argmax(vals))
        gain = float(vals[g] - base)
        if gain > DEVIATION_TOL and (worst is None or gain > worst[2]):
            worst = (i, float(grid[g]), gain)
    return worst is None, worst
