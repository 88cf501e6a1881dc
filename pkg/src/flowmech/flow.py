"""M/M/1 flow-control utilities and the benchmark operating points.

A user's utility is its power, ``d_i**t_i * (mu - load)``; the manager
scores a profile by the geometric mean of the users' (clamped) powers.  The
three reference profiles are the manager optimum, the complete-information
Nash equilibrium and the Bayesian equilibrium of the game without
intervention.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .game import ActionRule, Scenario, enumerate_profiles

COND_LIMIT = 1e12


class DegenerateBneSystem(np.linalg.LinAlgError):
    """The stacked first-order system is singular or its root is not interior."""


@dataclass(frozen=True)
class FlowUtility:
    mu: float

    def user(self, d0: float, d: Sequence[float], t_i: float, i: int) -> float:
        d = np.asarray(d, dtype=float)
        if d[i] < 0:
            raise ValueError("rates must be nonnegative")
        if t_i <= 0:
            raise ValueError("types must be positive")
        if d[i] == 0:
            return 0.0
        return float(d[i] ** t_i * (self.mu - d.sum() - d0))

    def manager(self, d0: float, d: Sequence[float], t: Sequence[float]) -> float:
        d = np.asarray(d, dtype=float)
        t = np.asarray(t, dtype=float)
        residual = self.mu - d.sum() - d0
        if residual <= 0 or np.any(d <= 0):
            return 0.0
        return float(residual * np.exp(np.sum(t * np.log(d)) / len(d)))

    def user_from_load(self, own, load, t_i, d0=0.0):
        """Vectorised user utility from its own rate and the total user load."""
        own = np.asarray(own, dtype=float)
        return np.power(own, t_i) * (self.mu - np.asarray(load) - d0)

    def manager_table(self, counts, rates, tau, d0=0.0):
        """Manager utility for every multiset row of ``counts``/``rates``."""
        counts = np.asarray(counts)
        rates = np.asarray(rates, dtype=float)
        n = counts.sum(axis=1)
        residual = self.mu - np.sum(counts * rates, axis=1) - d0
        present = counts > 0
        starved = np.any(present & (rates <= 0), axis=1)
        with np.errstate(divide="ignore"):
            logs = np.where(present, np.log(np.where(present, rates, 1.0)), 0.0)
        geo = np.exp(np.sum(counts * tau * logs, axis=1) / n)
        return np.where((residual > 0) & ~starved, residual * geo, 0.0)


def user_utility(mu: float, d0: float, d, t_i: float, i: int) -> float:
    return FlowUtility(mu).user(d0, d, t_i, i)


def manager_utility(mu: float, d0: float, d, t) -> float:
    return FlowUtility(mu).manager(d0, d, t)


def optimal_profile(scenario: Scenario, t) -> np.ndarray:
    """Manager-optimal rates: ``t_i mu / (n + sum t)``."""
    t = np.asarray(t, dtype=float)
    return t * scenario.mu / (len(t) + t.sum())


def nash_equilibrium(scenario: Scenario, t) -> np.ndarray:
    """Unique complete-information equilibrium: ``t_i mu / (1 + sum t)``."""
    t = np.asarray(t, dtype=float)
    return t * scenario.mu / (1.0 + t.sum())


def best_response(scenario: Scenario, d_minus_i, t_i: float) -> float:
    # Root of t/d - 1/(mu - sum d) = 0, clamped to the action set.
    rest = float(np.sum(d_minus_i))
    if rest >= scenario.mu:
        return 0.0
    return min(max(t_i * (scenario.mu - rest) / (1.0 + t_i), 0.0), scenario.mu)


@dataclass(frozen=True)
class BneSystem:
    """Stacked first-order conditions of the Bayesian game and their inverse.

    Rows are ordered user-major: entry ``i*m + l`` is user i's rate when its
    type is ``tau[l]``.  ``inv_diag`` and ``inv_common`` are the closed-form
    blocks such that ``inv(A) = blockdiag(inv_diag) - ones_blocks(inv_common)``.
    """

    n: int
    m: int
    A: np.ndarray
    b: np.ndarray
    inv_diag: np.ndarray
    inv_common: np.ndarray
    beta_mat: float

    def assembled_inverse(self) -> np.ndarray:
        n, m = self.n, self.m
        inv = np.tile(-self.inv_common, (n, n))
        for i in range(n):
            inv[i * m : (i + 1) * m, i * m : (i + 1) * m] += self.inv_diag
        return inv

    def condition_number(self) -> float:
        return float(np.linalg.cond(self.A))

    def solve_linear(self) -> np.ndarray:
        return np.linalg.solve(self.A, self.b)

    def solve_inverse(self) -> np.ndarray:
        return self.assembled_inverse() @ self.b


def bne_build(scenario: Scenario) -> BneSystem:
    n, m, mu = scenario.n, scenario.m, scenario.mu
    tau = scenario.tau
    p = scenario.type_space.p
    lam = np.diag(1.0 + tau)
    tp = np.outer(tau, p)
    A = np.tile(tp, (n, n))
    for i in range(n):
        A[i * m : (i + 1) * m, i * m : (i + 1) * m] = lam
    b = np.tile(mu * tau, n)

    lam_inv = np.diag(1.0 / (1.0 + tau))
    s = float(np.sum(p * tau / (1.0 + tau)))
    beta_mat = 1.0 / (-1.0 + s)
    inv_diag = lam_inv - beta_mat * lam_inv @ tp @ lam_inv
    y_inv = np.eye(m) - n / (1.0 + (n - 1) * s) * tp @ lam_inv
    inv_common = inv_diag @ y_inv @ tp @ inv_diag
    return BneSystem(n, m, A, b, inv_diag, inv_common, beta_mat)


def bne_solve(scenario: Scenario, system: BneSystem | None = None) -> np.ndarray:
    """Equilibrium rate per type value (shared by all users)."""
    system = system or bne_build(scenario)
    cond = system.condition_number()
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise DegenerateBneSystem(
            f"degenerate prior/type configuration (condition number {cond:.3g})"
        )
    d = system.solve_linear().reshape(scenario.n, scenario.m)
    if np.ptp(d, axis=0).max() > 1e-9 * scenario.mu:
        raise DegenerateBneSystem("equilibrium is not symmetric across users")
    rates = d[0]
    if np.any(rates <= 0) or np.any(rates >= scenario.mu):
        raise DegenerateBneSystem("equilibrium is not interior to (0, mu)")
    return rates


def bne_foc_residuals(scenario: Scenario, rates) -> np.ndarray:
    tau = scenario.tau
    p = scenario.type_space.p
    mean_other = float(np.dot(p, rates))
    return (1.0 + tau) * rates + tau * (scenario.n - 1) * mean_other - scenario.mu * tau


def optimal_rule(scenario: Scenario) -> ActionRule:
    return ActionRule.from_function(scenario, lambda t: optimal_profile(scenario, t))


def nash_rule(scenario: Scenario) -> ActionRule:
    return ActionRule.from_function(scenario, lambda t: nash_equilibrium(scenario, t))


def bne_rule(scenario: Scenario) -> ActionRule:
    rates = bne_solve(scenario)
    counts = scenario.profiles.counts
    return ActionRule(scenario, np.broadcast_to(rates, counts.shape))


def max_efficiency_value(scenario: Scenario) -> float:
    """Manager's expected utility when compliant users play the optimum."""
    util = FlowUtility(scenario.mu)
    total = 0.0
    for profile, w in enumerate_profiles(scenario):
        t = scenario.tau[list(profile.vector())]
        total += w * util.manager(0.0, optimal_profile(scenario, t), t)
    return total


@dataclass(frozen=True)
class TypeMetrics:
    tau: float
    throughput: float
    delay: float | None
    stable: bool


def per_type_metrics(scenario: Scenario, rule: ActionRule) -> list[TypeMetrics]:
    """Expected rate and M/M/1 sojourn time seen by a user of each type.

    A type is unstable when some profile it can face with positive
    probability loads the server to capacity; its delay is then ``None``.
    """
    table = scenario.profiles
    load = rule.load()
    out = []
    for l, tau in enumerate(scenario.type_space.values):
        idx = table.own_index[l]
        w = table.cond_weight
        live = w > 0
        thr = float(np.dot(w, rule.rates[idx, l]))
        residual = scenario.mu - load[idx]
        stable = bool(np.all(residual[live] > 0))
        delay = float(np.dot(w[live], 1.0 / residual[live])) if stable else None
        out.append(TypeMetrics(tau, thr, delay, stable))
    return out
