"""Randomised invariant suite behind ``flowmech verify``.

Each check returns ``(ok, detail)``.  Only properties that hold for the
model are included; known negative results (such as the joint
misreport-and-disobey deviation) are exercised by the test suite instead.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .apriori import apriori_gradient, apriori_hessian
from .experiments import ExperimentConfig
from .flow import (
    best_response,
    bne_build,
    bne_foc_residuals,
    bne_rule,
    bne_solve,
    max_efficiency_value,
    nash_equilibrium,
    optimal_profile,
)
from .game import Scenario, TypeSpace, expected_manager_value
from .intervention import design_rule, sustain_conditions, verify_sustain_numeric
from .mechanism import (
    algorithm_converge,
    manager_value_of,
    max_efficiency_mechanism,
    misreport_matrix,
    truthful_at_optimum,
)


def _random_types(rng, n):
    return rng.uniform(0.1, 1.0, size=n)


def check_nash_fixed_point(cfg, rng, trials=50):
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(1, 6))
        t = _random_types(rng, n)
        sc = Scenario(n, TypeSpace.uniform([0.1, 1.0]), cfg.mu)
        d = nash_equilibrium(sc, t)
        br = np.array([best_response(sc, np.delete(d, i), t[i]) for i in range(n)])
        worst = max(worst, float(np.max(np.abs(br - d))))
    return worst < 1e-10, f"max best-response gap {worst:.2e}"


def check_bne_system(cfg, rng):
    worst_inv = worst_foc = 0.0
    for n in sorted({2, 4, max(cfg.n_range)}):
        sc = cfg.scenario(n)
        sysm = bne_build(sc)
        eye = np.eye(n * sc.m)
        worst_inv = max(worst_inv, float(np.linalg.norm(sysm.A @ sysm.assembled_inverse() - eye)))
        worst_foc = max(worst_foc, float(np.max(np.abs(bne_foc_residuals(sc, bne_solve(sc))))))
    ok = worst_inv < 1e-8 and worst_foc < 1e-9
    return ok, f"inverse error {worst_inv:.2e}, FOC residual {worst_foc:.2e}"


def check_sustain_soundness(cfg, rng, trials=20):
    failures = 0
    for _ in range(trials):
        n = int(rng.integers(2, 5))
        sc = Scenario(n, cfg.type_space(), cfg.mu)
        t = rng.choice(sc.tau, size=n)
        target = nash_equilibrium(sc, t) * rng.uniform(0.3, 1.0, size=n)
        rule = design_rule(target, sc, "general", t=t)
        if not (sustain_conditions(rule, t, sc) and verify_sustain_numeric(rule, t, sc)[0]):
            failures += 1
    return failures == 0, f"{failures} of {trials} designed rules failed"


def check_optimal_sustain(cfg, rng):
    failures = 0
    for n in (2, 3):
        sc = cfg.scenario(n)
        for vec in np.ndindex(*(sc.m,) * n):
            t = sc.tau[list(vec)]
            rule = design_rule(optimal_profile(sc, t), sc, "optimal", t=t)
            failures += not verify_sustain_numeric(rule, t, sc)[0]
    return failures == 0, f"{failures} optimal-target rules failed the deviation scan"


def check_downward_truthful(cfg, rng):
    bad = 0
    for n in cfg.n_range:
        sc = cfg.scenario(n)
        _, viol = truthful_at_optimum(sc)
        bad += sum(1 for s, l, _ in viol if l < s)
    return bad == 0, f"{bad} profitable downward misreports"


def check_algorithm(cfg, rng):
    msgs = []
    ok = True
    for n in (2, 3, 4):
        sc = cfg.scenario(n)
        mech, trace = algorithm_converge(sc, cfg.epsilon, record=True)
        hist = np.array(trace.history)
        mono = bool(np.all(np.diff(hist, axis=0) >= 0)) if len(hist) > 1 else True
        W = misreport_matrix(sc, mech)
        honest = bool(np.all(np.diag(W)[:, None] - W >= -1e-6))
        ok &= trace.converged and mono and honest
        msgs.append(f"n={n}: {trace.iterations} it")
    return ok, ", ".join(msgs)


def check_hessian(cfg, rng, samples=500):
    n = max(2, int(np.ceil(max(cfg.types))))
    sc = cfg.scenario(n)
    worst_eig = np.inf
    dominance = True
    for _ in range(samples):
        d = rng.dirichlet(np.ones(n + 1))[:n] * sc.mu
        H = apriori_hessian(sc, d)
        off = H[0, 1]
        dominance &= bool(np.all(np.diag(H) >= off - 1e-12) and off >= 0)
        worst_eig = min(worst_eig, float(np.linalg.eigvalsh(H).min()))
        g = apriori_gradient(sc, d)
        if not np.all(np.isfinite(g)):
            return False, "non-finite gradient"
    return dominance and worst_eig >= -1e-10, f"min eigenvalue {worst_eig:.2e}"


def check_value_ordering(cfg, rng):
    vme = [max_efficiency_value(cfg.scenario(n)) for n in cfg.n_range]
    decreasing = all(b < a for a, b in zip(vme, vme[1:]))
    bad = 0
    for n, me in zip(cfg.n_range, vme):
        sc = cfg.scenario(n)
        mech, _ = algorithm_converge(sc, cfg.epsilon)
        alg = manager_value_of(sc, mech)
        bne = expected_manager_value(sc, bne_rule(sc))
        bad += not (me >= alg - 1e-12 and alg >= bne - 1e-12)
        opt = max_efficiency_mechanism(sc)
        bad += abs(manager_value_of(sc, opt) - me) > 1e-12
    return decreasing and bad == 0, f"decreasing={decreasing}, ordering failures={bad}"


CHECKS: dict[str, Callable] = {
    "nash-fixed-point": check_nash_fixed_point,
    "bne-system": check_bne_system,
    "sustain-soundness": check_sustain_soundness,
    "optimal-sustain": check_optimal_sustain,
    "downward-truthful": check_downward_truthful,
    "algorithm-monotone-honest": check_algorithm,
    "apriori-hessian": check_hessian,
    "value-ordering": check_value_ordering,
}


def run_all(cfg: ExperimentConfig, seed: int = 0, log=print) -> bool:
    rng = np.random.default_rng(seed)
    all_ok = True
    for name, fn in CHECKS.items():
        ok, detail = fn(cfg, rng)
        log(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        all_ok &= ok
    return all_ok
