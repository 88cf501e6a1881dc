"""Direct mechanisms: users report types, the device suggests rates and
commits to an affine rule per reported profile.

All mechanisms here are symmetric, so every check is done for one
representative user per type over the multiset table of the others' types.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .flow import max_efficiency_value, optimal_rule
from .game import ActionRule, Scenario, TypeProfile, TypeSpace, expected_manager_value
from .intervention import (
    SLOPE_MARGIN,
    AffineRule,
    InsufficientIntervention,
    deviation_grid,
    type_free_rule,
)

IC_TOL = 1e-6
TRUTH_TOL = 1e-12
DEFAULT_GRID = 2000


@dataclass(frozen=True)
class DirectMechanism:
    """Suggested rates plus the affine rule attached to each reported multiset.

    ``slopes[k, l]`` is the slope applied to a type-``l`` user in multiset
    ``k``; ``d0_max[k]`` is that multiset's device rate.  Targets are the
    suggested rates themselves, so the rule is silent on the honest path.
    """

    scenario: Scenario
    suggested: ActionRule
    slopes: np.ndarray = field(repr=False)
    d0_max: np.ndarray = field(repr=False)
    apriori: bool = False

    def __post_init__(self):
        shape = self.scenario.profiles.counts.shape
        slopes = np.array(self.slopes, dtype=float)
        d0 = np.broadcast_to(np.asarray(self.d0_max, dtype=float), shape[:1]).copy()
        if slopes.shape != shape:
            raise ValueError(f"slopes must have shape {shape}")
        if np.any(slopes < 0) or np.any(d0 < 0):
            raise ValueError("slopes and device rates must be nonnegative")
        slopes = np.where(self.scenario.profiles.counts > 0, slopes, 0.0)
        for a in (slopes, d0):
            a.setflags(write=False)
        object.__setattr__(self, "slopes", slopes)
        object.__setattr__(self, "d0_max", d0)
        if self.apriori:
            if np.ptp(self.suggested.rates[self.scenario.profiles.counts > 0]) > 0:
                raise ValueError("a-priori mechanism must suggest one rate everywhere")

    def rule(self, counts) -> AffineRule:
        k = self.scenario.profiles.lookup(counts)
        vec = list(TypeProfile(tuple(int(c) for c in counts)).vector())
        return AffineRule(
            tuple(self.slopes[k, vec]), tuple(self.suggested.rates[k, vec]), self.d0_max[k]
        )

    @property
    def rules(self) -> dict[TypeProfile, AffineRule]:
        return {
            TypeProfile(tuple(int(c) for c in counts)): self.rule(counts)
            for counts in self.scenario.profiles.counts
        }

    def to_json(self) -> str:
        sc = self.scenario
        profiles = []
        for k, counts in enumerate(sc.profiles.counts):
            profiles.append(
                {
                    "counts": [int(c) for c in counts],
                    "suggested": [float(x) for x in self.suggested.rates[k]],
                    "rule": self.rule(counts).to_dict(),
                }
            )
        doc = {
            "types": list(sc.type_space.values),
            "probs": list(sc.type_space.probs),
            "n": sc.n,
            "mu": sc.mu,
            "apriori": self.apriori,
            "profiles": profiles,
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "DirectMechanism":
        doc = json.loads(text)
        sc = Scenario(doc["n"], TypeSpace(tuple(doc["types"]), tuple(doc["probs"])), doc["mu"])
        table = sc.profiles
        rates = np.zeros(table.counts.shape)
        slopes = np.zeros(table.counts.shape)
        d0 = np.zeros(len(table.counts))
        for entry in doc["profiles"]:
            k = table.lookup(entry["counts"])
            rates[k] = entry["suggested"]
            rule = AffineRule.from_dict(entry["rule"])
            vec = TypeProfile(tuple(entry["counts"])).vector()
            for pos, l in enumerate(vec):
                slopes[k, l] = rule.c[pos]
            d0[k] = rule.d0_max
        return cls(sc, ActionRule(sc, rates), slopes, d0, bool(doc["apriori"]))


def _report_arrays(scenario: Scenario, rates: np.ndarray):
    """Reporter's rate and total load for each (report l, others multiset c)."""
    table = scenario.profiles
    idx = table.own_index
    own = np.take_along_axis(rates[idx], np.arange(scenario.m)[:, None, None], axis=2)[..., 0]
    load = np.sum(table.counts * rates, axis=1)[idx]
    return own, load


def misreport_matrix(scenario: Scenario, mech_or_rule) -> np.ndarray:
    """``W[s, l]``: expected utility of a type-s user who reports l and obeys."""
    rule = getattr(mech_or_rule, "suggested", mech_or_rule)
    own, load = _report_arrays(scenario, rule.rates)
    return kernels.misreport_matrix(
        scenario.tau, scenario.mu, own, load, scenario.profiles.cond_weight
    )


def misreport_value(scenario: Scenario, mech, own_type: float, reported_type: float) -> float:
    s = scenario.type_space.index(own_type)
    l = scenario.type_space.index(reported_type)
    return float(misreport_matrix(scenario, mech)[s, l])


@dataclass(frozen=True)
class ICReport:
    """Outcome of the incentive-compatibility scan.

    ``margins[s, l]`` is the honest-obedient value of type s minus the best
    value reachable by reporting l and then playing any single rate.  The
    diagonal measures obedience; off-diagonal entries measure honesty.
    ``W`` holds the values of misreporting while obeying, and
    ``obedient_misreport_ok`` / ``honest_disobedience_ok`` are the two
    one-sided checks taken separately.
    """

    honest_ok: bool
    obedient_ok: bool
    worst_violation: tuple | None
    margins: np.ndarray
    W: np.ndarray
    obedient_misreport_ok: bool

    @property
    def ok(self) -> bool:
        return self.honest_ok and self.obedient_ok

    @property
    def honest_disobedience_ok(self) -> bool:
        return self.obedient_ok


def deviation_table(scenario: Scenario, mech: DirectMechanism, s: int, l: int, grid):
    """Expected utility of a type-s user who reports l and then plays each grid rate."""
    table = scenario.profiles
    idx = table.own_index[l]
    rates = mech.suggested.rates
    own = rates[idx, l]
    others = np.sum(table.counts * rates, axis=1)[idx] - own
    return kernels.deviation_values(
        grid,
        scenario.tau[s],
        scenario.mu,
        others,
        own,
        mech.slopes[idx, l],
        mech.d0_max[idx],
        table.cond_weight,
    )


def check_incentive_compatible(
    scenario: Scenario, mech: DirectMechanism, grid_points: int = DEFAULT_GRID
) -> ICReport:
    """Scan every (true type, report) pair against the best single deviation rate."""
    m = scenario.m
    W = misreport_matrix(scenario, mech)
    margins = np.empty((m, m))
    worst = None
    table = scenario.profiles
    for l in range(m):
        anchors = mech.suggested.rates[table.own_index[l], l]
        grid = deviation_grid(scenario.mu, grid_points, anchors)
        for s in range(m):
            vals = deviation_table(scenario, mech, s, l, grid)
            g = int(np.argmax(vals))
            best, action = float(vals[g]), float(grid[g])
            if W[s, l] >= best:
                best, action = float(W[s, l]), None
            margins[s, l] = W[s, s] - best
            gain = -margins[s, l]
            if gain > IC_TOL and (worst is None or gain > worst[3]):
                worst = (float(scenario.tau[s]), float(scenario.tau[l]), action, float(gain))
    off = ~np.eye(m, dtype=bool)
    honest_ok = bool(np.all(margins[off] >= -IC_TOL))
    obedient_ok = bool(np.all(np.diag(margins) >= -IC_TOL))
    misreport_ok = bool(np.all(np.diag(W)[:, None] - W >= -IC_TOL))
    return ICReport(honest_ok, obedient_ok, worst, margins, W, misreport_ok)


def truthful_at_optimum(scenario: Scenario):
    """Exact honesty test for the manager-optimal suggestion with no intervention.

    Returns ``(ok, violations)`` with one ``(true_type, report, gain)`` tuple
    per profitable misreport.
    """
    W = misreport_matrix(scenario, optimal_rule(scenario))
    tau = scenario.tau
    violations = []
    for s in range(scenario.m):
        for l in range(scenario.m):
            gain = W[s, l] - W[s, s]
            if gain > TRUTH_TOL * max(1.0, abs(W[s, s])):
                violations.append((float(tau[s]), float(tau[l]), float(gain)))
    return not violations, violations


def max_efficiency_terms(scenario: Scenario):
    """Left-hand side of the sufficient condition for each consecutive type
    pair and each multiset of the other users' types."""
    tau = scenario.tau
    table = scenario.profiles
    out = []
    for i in range(scenario.m - 1):
        lo, hi = tau[i], tau[i + 1]
        for c, others in enumerate(table.others):
            a = scenario.n + float(others @ tau)
            term = ((a + hi) / (a + lo)) ** (lo + 1.0) * (lo / hi) ** lo
            out.append((lo, hi, tuple(int(x) for x in others), term))
    return out


def max_efficiency_condition(scenario: Scenario) -> bool:
    return all(term >= 1.0 for *_, term in max_efficiency_terms(scenario))


def max_efficiency_mechanism(scenario: Scenario, d0_max: float | None = None) -> DirectMechanism:
    """Suggest the manager optimum and sustain it with slopes ``n - 1``."""
    need = scenario.mu / (1.0 + scenario.type_space.values[0])
    if d0_max is None:
        d0_max = need
    elif d0_max < need:
        raise InsufficientIntervention(f"device rate {d0_max:g} below the required {need:g}")
    shape = scenario.profiles.counts.shape
    slopes = np.full(shape, scenario.n - 1.0 + SLOPE_MARGIN)
    return DirectMechanism(scenario, optimal_rule(scenario), slopes, np.full(shape[0], d0_max))


def mechanism_from_rates(
    scenario: Scenario, rates: np.ndarray, d0_max: float | None = None, apriori: bool = False
) -> DirectMechanism:
    """Attach a type-free sustaining rule to every multiset of ``rates``."""
    table = scenario.profiles
    suggested = ActionRule(scenario, rates)
    slopes = np.zeros(table.counts.shape)
    d0 = np.zeros(len(table.counts))
    for k, counts in enumerate(table.counts):
        vec = list(TypeProfile(tuple(int(c) for c in counts)).vector())
        rule = type_free_rule(suggested.rates[k, vec], scenario, d0_max)
        for pos, l in enumerate(vec):
            slopes[k, l] = rule.c[pos]
        d0[k] = rule.d0_max
    return DirectMechanism(scenario, suggested, slopes, d0, apriori)


@dataclass
class AlgorithmTrace:
    iterations: int = 0
    updates: int = 0
    converged: bool = False
    stalled: bool = False
    history: list = field(default_factory=list)

    @property
    def diagnostic(self) -> str:
        if self.converged:
            return f"converged after {self.iterations} iteration(s)"
        if self.stalled:
            return (
                f"stalled at iteration {self.iterations}: a misreport is still "
                "profitable but every suggestion it could raise is at the equilibrium cap"
            )
        return f"stopped after {self.iterations} iteration(s) without converging"


def _profile_nash(scenario: Scenario) -> np.ndarray:
    tau = scenario.tau
    counts = scenario.profiles.counts
    cap = tau[None, :] * scenario.mu / (1.0 + counts @ tau)[:, None]
    return np.where(counts > 0, cap, 0.0)


def algorithm_converge(
    scenario: Scenario,
    epsilon: float | None = None,
    variant: str = "flow",
    d0_max: float | None = None,
    max_iter: int = 100_000,
    record: bool = False,
):
    """Raise suggestions from the optimum until no type gains by misreporting.

    ``variant="flow"`` raises the suggestion of the mimicked type;
    ``variant="general"`` raises the honest type's suggestion and, once that
    is capped, the other users' suggestions in the same profiles.  Each
    update is capped at the no-intervention equilibrium.  Returns the
    mechanism and an :class:`AlgorithmTrace`.
    """
    if variant not in ("flow", "general"):
        raise ValueError(f"unknown variant {variant!r}")
    mu = scenario.mu
    epsilon = mu / 1000.0 if epsilon is None else float(epsilon)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    d0_max = mu if d0_max is None else float(d0_max)
    if d0_max < mu:
        raise InsufficientIntervention("the algorithm needs a device rate of at least mu")
    table = scenario.profiles
    m = scenario.m
    cap = _profile_nash(scenario)
    rates = np.array(optimal_rule(scenario).rates)
    cw = table.cond_weight
    trace = AlgorithmTrace()

    def values():
        own, load = _report_arrays(scenario, rates)
        return kernels.misreport_matrix(scenario.tau, mu, own, load, cw)

    def raise_entries(rows, cols):
        before = rates[rows, cols].copy()
        rates[rows, cols] = np.minimum(before + epsilon, cap[rows, cols])
        return bool(np.any(rates[rows, cols] > before))

    while trace.iterations < max_iter:
        trace.iterations += 1
        triggered = moved = False
        for s in range(m):
            for l in range(m):
                W = values()
                if not W[s, s] < W[s, l]:
                    continue
                triggered = True
                if variant == "flow":
                    rows = table.own_index[l]
                    step = raise_entries(rows, np.full(len(rows), l))
                else:
                    rows = table.own_index[s]
                    live = cw > 0
                    if np.any(rates[rows[live], s] < cap[rows[live], s]):
                        step = raise_entries(rows, np.full(len(rows), s))
                    else:
                        r, c = np.nonzero(table.counts[rows] > 0)
                        step = raise_entries(rows[r], c)
                trace.updates += step
                moved |= step
        if record:
            trace.history.append(rates.copy())
        if not triggered:
            trace.converged = True
            break
        if not moved:
            trace.stalled = True
            break
    return mechanism_from_rates(scenario, rates, d0_max), trace


def nash_mechanism(scenario: Scenario) -> DirectMechanism:
    """Suggest the no-intervention equilibrium with a silent rule."""
    rates = _profile_nash(scenario)
    shape = rates.shape
    return DirectMechanism(scenario, ActionRule(scenario, rates), np.zeros(shape), np.zeros(shape[0]))


def manager_value_of(scenario: Scenario, mech: DirectMechanism) -> float:
    """Manager's expected utility under honest, obedient play."""
    return expected_manager_value(scenario, mech.suggested)


def efficiency_gap(scenario: Scenario, mech: DirectMechanism) -> float:
    return max_efficiency_value(scenario) - manager_value_of(scenario, mech)


__all__ = [
    "AlgorithmTrace",
    "DirectMechanism",
    "ICReport",
    "algorithm_converge",
    "check_incentive_compatible",
    "efficiency_gap",
    "manager_value_of",
    "max_efficiency_condition",
    "max_efficiency_mechanism",
    "max_efficiency_terms",
    "mechanism_from_rates",
    "misreport_matrix",
    "misreport_value",
    "nash_mechanism",
    "truthful_at_optimum",
]
