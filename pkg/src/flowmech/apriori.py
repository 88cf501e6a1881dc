"""Report-independent mechanism: one rate for everybody, chosen before any report.

The rate profile minimises the convex surrogate

    f(d) = -ln(mu - sum d) - sum_i ln sum_l P_l d_i**(tau_l / n),

the negated log of the manager's expected utility with the expectation
moved inside the product.  The objective is convex whenever the largest
type is at most ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .game import Scenario
from .mechanism import DirectMechanism, check_incentive_compatible, mechanism_from_rates

BOX_EPS = 1e-9
STEP_TOL = 1e-12
KKT_TOL = 1e-8


def _check_interior(scenario: Scenario, d) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if d.shape != (scenario.n,):
        raise ValueError(f"expected {scenario.n} rates, got shape {d.shape}")
    if np.any(d <= 0) or d.sum() >= scenario.mu:
        raise ValueError("interior point required")
    return d


def _moments(scenario: Scenario, d):
    """g, g' and g'' of ``g(x) = sum_l P_l x**(tau_l/n)`` at every entry of d."""
    a = scenario.tau / scenario.n
    p = scenario.type_space.p
    x = d[:, None]
    g = (p * x**a).sum(axis=1)
    g1 = (p * a * x ** (a - 1)).sum(axis=1)
    g2 = (p * a * (a - 1) * x ** (a - 2)).sum(axis=1)
    return g, g1, g2


def apriori_objective(scenario: Scenario, d) -> float:
    d = _check_interior(scenario, d)
    g, _, _ = _moments(scenario, d)
    return float(-np.log(scenario.mu - d.sum()) - np.sum(np.log(g)))


def apriori_gradient(scenario: Scenario, d) -> np.ndarray:
    d = _check_interior(scenario, d)
    g, g1, _ = _moments(scenario, d)
    return 1.0 / (scenario.mu - d.sum()) - g1 / g


def apriori_hessian(scenario: Scenario, d) -> np.ndarray:
    """Diagonal ``alpha_i`` plus a constant off-diagonal ``beta = 1/residual**2``."""
    d = _check_interior(scenario, d)
    g, g1, g2 = _moments(scenario, d)
    beta = 1.0 / (scenario.mu - d.sum()) ** 2
    alpha = beta - (g2 * g - g1**2) / g**2
    return np.diag(alpha - beta) + beta


def _project(d, mu):
    d = np.clip(d, BOX_EPS, mu - BOX_EPS)
    cap = mu - BOX_EPS
    if d.sum() <= cap:
        return d
    # Shift down uniformly until the capacity guard holds.
    lo, hi = 0.0, float(d.max())
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.clip(d - mid, BOX_EPS, None).sum() > cap:
            lo = mid
        else:
            hi = mid
    return np.clip(d - hi, BOX_EPS, None)


def _kkt_residual(scenario: Scenario, d) -> float:
    return float(np.linalg.norm(d - _project(d - apriori_gradient(scenario, d), scenario.mu)))


def minimize_projected_gradient(scenario: Scenario, max_iter: int = 10_000):
    """Projected gradient with a halving line search.

    Each trial step starts from the Barzilai-Borwein length and is halved
    until the Armijo condition holds.  Returns ``(d, iterations)``.
    """
    mu = scenario.mu
    d = np.full(scenario.n, mu / (2 * scenario.n))
    f = apriori_objective(scenario, d)
    grad = apriori_gradient(scenario, d)
    step = 1.0
    for it in range(1, max_iter + 1):
        if _kkt_residual(scenario, d) < KKT_TOL:
            return d, it - 1
        t = step
        while True:
            trial = _project(d - t * grad, mu)
            if trial.sum() < mu:
                f_trial = apriori_objective(scenario, trial)
                if f_trial <= f + 1e-4 * grad @ (trial - d):
                    break
            t *= 0.5
            if t < STEP_TOL:
                return d, it
        g_new = apriori_gradient(scenario, trial)
        s, y = trial - d, g_new - grad
        sy = float(s @ y)
        step = float(s @ s) / sy if sy > 0 else 1.0
        d, f, grad = trial, f_trial, g_new
    return d, max_iter


def golden_symmetric(scenario: Scenario) -> tuple[float, float]:
    """Golden-section search of the objective along ``d = x * ones``."""
    n, mu = scenario.n, scenario.mu

    def f(x):
        return apriori_objective(scenario, np.full(n, x))

    lo, hi = BOX_EPS, mu / n - BOX_EPS
    mid = mu / (2 * n)
    res = minimize_scalar(f, bracket=(lo, mid, hi), method="golden", options={"xtol": 1e-12})
    return float(res.x), float(res.fun)


@dataclass(frozen=True)
class AprioriSolution:
    mechanism: DirectMechanism
    rates: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    certified: bool
    bayes_sustained: bool

    @property
    def rate(self) -> float:
        return float(self.rates.mean())


def apriori_solve(
    scenario: Scenario, d0_max: float | None = None, grid_points: int = 10_000
) -> AprioriSolution:
    """Minimise the surrogate and sustain the result with a type-free rule.

    ``certified`` records whether convexity is guaranteed (largest type at
    most ``n``); ``bayes_sustained`` is the numeric verdict that no type can
    raise its expected utility by deviating from the suggested rate.
    """
    d, iters = minimize_projected_gradient(scenario)
    # The minimiser is symmetric; average away round-off before tabulating.
    rate = float(d.mean())
    rates = np.full(scenario.profiles.counts.shape, rate)
    mech = mechanism_from_rates(scenario, rates, d0_max, apriori=True)
    report = check_incentive_compatible(scenario, mech, grid_points)
    return AprioriSolution(
        mechanism=mech,
        rates=d,
        objective=apriori_objective(scenario, d),
        kkt_residual=_kkt_residual(scenario, d),
        iterations=iters,
        certified=bool(scenario.tau[-1] <= scenario.n),
        bayes_sustained=report.ok,
    )
