"""Batch sweeps over the number of users and the prior, with CSV/JSON/SVG output."""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Sequence

import numpy as np

from .apriori import apriori_solve
from .flow import (
    FlowUtility,
    bne_rule,
    max_efficiency_value,
    nash_rule,
    optimal_profile,
    optimal_rule,
    per_type_metrics,
)
from .game import ActionRule, Scenario, TypeSpace, enumerate_profiles, expected_manager_value
from .intervention import design_rule, intervene
from .mechanism import algorithm_converge, check_incentive_compatible, manager_value_of

SCHEMES = ("compliant", "ne", "bne", "intervention-complete", "algorithm", "apriori")
MECHANISM_SCHEMES = ("algorithm", "apriori")


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    mu: float = 5.0
    types: tuple[float, ...] = (0.1, 1.0)
    probs: tuple[float, ...] | None = None
    n_range: tuple[int, ...] = tuple(range(2, 17))
    epsilon: float | None = None
    grid_points: int = 2000
    d0_max: float | None = None
    schemes: tuple[str, ...] = SCHEMES
    prob_step: float = 0.05
    n_fixed: int = 4
    n: int | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "types", tuple(float(v) for v in self.types))
        if self.probs is not None:
            object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        object.__setattr__(self, "n_range", tuple(int(n) for n in self.n_range))
        object.__setattr__(self, "schemes", tuple(self.schemes))
        if not self.schemes:
            raise ConfigError("schemes must be nonempty")
        unknown = set(self.schemes) - set(SCHEMES)
        if unknown:
            raise ConfigError(f"unknown schemes {sorted(unknown)}")
        if not self.n_range or min(self.n_range) < 1:
            raise ConfigError("n_range must be a nonempty list of positive integers")
        if not 0 < self.prob_step <= 1:
            raise ConfigError("prob_step must lie in (0, 1]")
        if self.grid_points < 1000:
            raise ConfigError("grid_points must be at least 1000")
        try:
            self.type_space()
            Scenario(1, self.type_space(), self.mu)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def type_space(self, probs: Sequence[float] | None = None) -> TypeSpace:
        probs = probs if probs is not None else self.probs
        if probs is None:
            return TypeSpace.uniform(self.types)
        return TypeSpace(self.types, tuple(probs))

    def scenario(self, n: int, probs: Sequence[float] | None = None) -> Scenario:
        return Scenario(n, self.type_space(probs), self.mu)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        data = dict(data)
        if "n_range" in data and isinstance(data["n_range"], dict):
            r = data["n_range"]
            data["n_range"] = range(int(r["start"]), int(r["stop"]) + 1)
        try:
            return cls(**data)
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)


@dataclass
class SweepRow:
    x: float
    scheme: str
    V0: float
    throughput: list[float]
    delay: list[float | None]
    stable: bool
    ic: bool | None = None
    runtime: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if self.V0 < 0:
            raise ValueError("manager value must be nonnegative")


def _complete_information_value(scenario: Scenario) -> float:
    """Manager value when each profile's optimum is sustained by its own affine rule."""
    util = FlowUtility(scenario.mu)
    total = 0.0
    for profile, w in enumerate_profiles(scenario):
        t = scenario.tau[list(profile.vector())]
        d = optimal_profile(scenario, t)
        rule = design_rule(d, scenario, "optimal", t=t)
        total += w * util.manager(intervene(rule, d), d, t)
    return total


def _metrics_row(x, scheme, scenario, rule: ActionRule, value, ic, start) -> SweepRow:
    mets = per_type_metrics(scenario, rule)
    return SweepRow(
        x=x,
        scheme=scheme,
        V0=value,
        throughput=[mt.throughput for mt in mets],
        delay=[mt.delay for mt in mets],
        stable=all(mt.stable for mt in mets),
        ic=ic,
        runtime=time.perf_counter() - start,
    )


def evaluate_scheme(
    config: ExperimentConfig, scenario: Scenario, scheme: str, x, check_ic: bool = True
) -> SweepRow:
    start = time.perf_counter()
    ic = None
    if scheme == "compliant":
        rule = optimal_rule(scenario)
        value = max_efficiency_value(scenario)
    elif scheme == "ne":
        rule = nash_rule(scenario)
        value = expected_manager_value(scenario, rule)
    elif scheme == "bne":
        rule = bne_rule(scenario)
        value = expected_manager_value(scenario, rule)
    elif scheme == "intervention-complete":
        rule = optimal_rule(scenario)
        value = _complete_information_value(scenario)
    elif scheme == "algorithm":
        mech, _ = algorithm_converge(scenario, config.epsilon, "flow", config.d0_max)
        rule = mech.suggested
        value = manager_value_of(scenario, mech)
        if check_ic:
            ic = check_incentive_compatible(scenario, mech, config.grid_points).ok
    elif scheme == "apriori":
        sol = apriori_solve(scenario, config.d0_max, config.grid_points)
        rule = sol.mechanism.suggested
        value = manager_value_of(scenario, sol.mechanism)
        if check_ic:
            ic = sol.bayes_sustained
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return _metrics_row(x, scheme, scenario, rule, value, ic, start)


def sweep_users(config: ExperimentConfig, check_ic: bool = True) -> list[SweepRow]:
    """One row per (n, scheme), in ascending n then configured scheme order."""
    rows = []
    for n in config.n_range:
        scenario = config.scenario(n)
        for scheme in config.schemes:
            rows.append(evaluate_scheme(config, scenario, scheme, n, check_ic))
    return rows


def probability_grid(step: float) -> list[float]:
    count = int(round(1.0 / step))
    return [round(k * step, 12) for k in range(count + 1)]


def sweep_probability(
    config: ExperimentConfig, n_fixed: int | None = None, check_ic: bool = True
) -> list[SweepRow]:
    """Rows over the low-type probability for a two-type set and fixed n."""
    if len(config.types) != 2:
        raise ConfigError("the probability sweep needs exactly two types")
    n = config.n_fixed if n_fixed is None else n_fixed
    rows = []
    for p in probability_grid(config.prob_step):
        scenario = config.scenario(n, (p, 1.0 - p))
        for scheme in config.schemes:
            rows.append(evaluate_scheme(config, scenario, scheme, p, check_ic))
    return rows


def metrics(config: ExperimentConfig) -> list[SweepRow]:
    """Per-type throughput and delay for every scheme over the n sweep."""
    return sweep_users(config, check_ic=False)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return repr(float(v))


def _pick(values, k):
    # first and last type; for two types these are low and high
    return values[0] if k == "low" else values[-1]


def rows_to_csv(rows: Sequence[SweepRow], x_name: str = "n") -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        [x_name, "scheme", "V0", "thr_low", "thr_high", "delay_low", "delay_high", "stable", "ic"]
    )
    for r in rows:
        x = str(int(r.x)) if x_name == "n" else repr(float(r.x))
        writer.writerow(
            [
                x,
                r.scheme,
                _fmt(r.V0),
                _fmt(_pick(r.throughput, "low")),
                _fmt(_pick(r.throughput, "high")),
                _fmt(_pick(r.delay, "low")),
                _fmt(_pick(r.delay, "high")),
                _fmt(r.stable),
                _fmt(r.ic),
            ]
        )
    return buf.getvalue()


def rows_to_json(rows: Sequence[SweepRow], x_name: str = "n") -> str:
    out = []
    for r in rows:
        d = asdict(r)
        d.pop("runtime")
        d[x_name] = int(d.pop("x")) if x_name == "n" else d.pop("x")
        out.append(d)
    return json.dumps(out, indent=1)


_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def rows_to_svg(rows: Sequence[SweepRow], x_label: str = "n", y_label: str = "V0") -> str:
    """Minimal line chart of V0 against x, one polyline per scheme."""
    width, height, pad = 720, 420, 60
    schemes = list(dict.fromkeys(r.scheme for r in rows))
    xs = [r.x for r in rows]
    ys = [r.V0 for r in rows]
    x0, x1 = min(xs), max(xs)
    y0, y1 = 0.0, max(ys) * 1.05 or 1.0
    x1 = x1 if x1 > x0 else x0 + 1

    def px(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def py(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - 2 * pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2}" y="{height - 15}" text-anchor="middle">{x_label}</text>',
        f'<text x="15" y="{height / 2}" transform="rotate(-90 15 {height / 2})" '
        f'text-anchor="middle">{y_label}</text>',
    ]
    for tick in np.linspace(x0, x1, 6):
        parts.append(
            f'<text x="{px(tick):.1f}" y="{height - pad + 18}" text-anchor="middle" '
            f'font-size="11">{tick:.3g}</text>'
        )
    for tick in np.linspace(y0, y1, 6):
        parts.append(
            f'<text x="{pad - 6}" y="{py(tick) + 4:.1f}" text-anchor="end" '
            f'font-size="11">{tick:.3g}</text>'
        )
    for k, scheme in enumerate(schemes):
        color = _COLORS[k % len(_COLORS)]
        pts = " ".join(f"{px(r.x):.2f},{py(r.V0):.2f}" for r in rows if r.scheme == scheme)
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{pts}"/>')
        parts.append(
            f'<text x="{width - pad + 6}" y="{pad + 16 * k}" font-size="11" '
            f'fill="{color}">{scheme}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
