"""Command-line entry point: ``flowmech <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import verify
from .experiments import (
    ConfigError,
    ExperimentConfig,
    metrics,
    rows_to_csv,
    rows_to_json,
    rows_to_svg,
    sweep_probability,
    sweep_users,
)
from .flow import bne_build, bne_foc_residuals, bne_solve, nash_equilibrium, optimal_profile
from .intervention import design_rule


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _table(rows, args, x_name):
    text = rows_to_json(rows, x_name) + "\n" if args.format == "json" else rows_to_csv(rows, x_name)
    _emit(text, args.out)
    if args.plot:
        with open(args.plot, "w") as fh:
            fh.write(rows_to_svg(rows, x_name))


def _n(cfg: ExperimentConfig, args) -> int:
    if args.n is not None:
        return args.n
    return cfg.n if cfg.n is not None else cfg.n_range[0]


def cmd_sweep_n(cfg, args):
    _table(sweep_users(cfg), args, "n")
    return 0


def cmd_sweep_prob(cfg, args):
    _table(sweep_probability(cfg, args.n), args, "p_low")
    return 0


def cmd_metrics(cfg, args):
    _table(metrics(cfg), args, "n")
    return 0


def cmd_verify(cfg, args):
    ok = verify.run_all(cfg, args.seed, log=lambda s: print(s, file=sys.stderr))
    return 0 if ok else 1


def cmd_solve_bne(cfg, args):
    sc = cfg.scenario(_n(cfg, args))
    system = bne_build(sc)
    rates = bne_solve(sc, system)
    stacked = np.tile(rates, sc.n)
    doc = {
        "n": sc.n,
        "types": list(sc.type_space.values),
        "rates": [float(x) for x in stacked],
        "per_type": [float(x) for x in rates],
        "foc_residuals": [float(x) for x in bne_foc_residuals(sc, rates)],
        "condition_number": system.condition_number(),
    }
    _emit(json.dumps(doc, indent=1) + "\n", args.out)
    return 0


def cmd_design_rule(cfg, args):
    n = _n(cfg, args)
    sc = cfg.scenario(n)
    if args.profile:
        t = np.array([float(x) for x in args.profile.split(",")])
        if len(t) != n:
            raise ConfigError(f"profile has {len(t)} types for n={n}")
        for v in t:
            sc.type_space.index(v)
    else:
        t = np.full(n, sc.tau[-1])
    if args.mode == "optimal":
        target = optimal_profile(sc, t)
    elif args.target:
        target = np.array([float(x) for x in args.target.split(",")])
    else:
        target = nash_equilibrium(sc, t)
    rule = design_rule(target, sc, args.mode, t=t, d0_max=cfg.d0_max)
    _emit(json.dumps(rule.to_dict(), indent=1) + "\n", args.out)
    return 0


COMMANDS = {
    "sweep-n": cmd_sweep_n,
    "sweep-prob": cmd_sweep_prob,
    "metrics": cmd_metrics,
    "verify": cmd_verify,
    "solve-bne": cmd_solve_bne,
    "design-rule": cmd_design_rule,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flowmech", description=__doc__)
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON experiment configuration")
    parser.add_argument("--out", help="output file (default: stdout)")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--plot", help="write an SVG line chart of V0")
    parser.add_argument("--seed", type=int, default=None, help="seed for randomised checks")
    parser.add_argument("--n", type=int, default=None, help="number of users")
    parser.add_argument("--mode", choices=("optimal", "general"), default="optimal")
    parser.add_argument("--profile", help="comma-separated type values (design-rule)")
    parser.add_argument("--target", help="comma-separated target rates (design-rule)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
        if args.seed is None:
            args.seed = cfg.seed
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, KeyError) as exc:
        print(f"flowmech: configuration error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"flowmech: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
