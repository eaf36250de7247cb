"""Command-line interface.

Subcommands:
  nash GAME.json          solve and print the equilibrium of a game file
  simulate CONFIG.json    run one experiment from a config file
  experiment PRESET       run a named preset (mp, mp-gda, cmp-interior,
                          cmp-continuous, cmp-boundary)
  check                   run the invariant battery

Exit codes: 0 success, 1 violated checks or failed runs, 2 config errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .checks import run_checks
from .dynamics import FieldKind, IntegratorConfig
from .experiments import (
    PRESET_NAMES,
    ExperimentConfig,
    preset_config,
    run_experiment,
)
from .game import PayoffMatrix, equilibrium_segment, solve_nash


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reactivegames",
        description="Learning dynamics in zero-sum games with one reactive player",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_nash = sub.add_parser("nash", help="solve a game file for its equilibrium")
    p_nash.add_argument("game", help="path to a game JSON file")

    p_sim = sub.add_parser("simulate", help="run an experiment from a config file")
    p_sim.add_argument("config", nargs="?", help="path to an experiment config JSON")
    p_sim.add_argument("--config", dest="config_opt", help="alternative to the positional path")
    _common_overrides(p_sim)

    p_exp = sub.add_parser("experiment", help="run a named preset experiment")
    p_exp.add_argument("preset", nargs="?", choices=PRESET_NAMES)
    p_exp.add_argument("--preset", dest="preset_opt", choices=PRESET_NAMES)
    _common_overrides(p_exp)

    sub.add_parser("check", help="run the invariant battery")
    return parser


def _common_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="output directory for CSVs and the summary")
    p.add_argument("--seed", type=int, help="override the initial-condition seed")
    p.add_argument("--dt", type=float, help="override the integrator step")
    p.add_argument("--horizon", type=float, help="override the integration horizon")
    p.add_argument("--field", choices=[k.value for k in FieldKind],
                   help="override the learning field")


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    integ = cfg.integrator
    if args.dt is not None or args.horizon is not None:
        integ = IntegratorConfig(
            dt=args.dt if args.dt is not None else integ.dt,
            horizon=args.horizon if args.horizon is not None else integ.horizon,
            floor_eps=integ.floor_eps,
            renormalize=integ.renormalize,
        )
    changes = {"integrator": integ}
    if args.seed is not None:
        changes["ic_seed"] = args.seed
        changes["ic_states"] = None
    if args.field is not None:
        changes["field_kind"] = FieldKind(args.field)
    if args.out is not None:
        changes["output_path"] = args.out
    return replace(cfg, **changes)


def _cmd_nash(args) -> int:
    game = PayoffMatrix.from_json(Path(args.game).read_text())
    eq = solve_nash(game)
    print(f"x_star: {[float(v) for v in eq.x_star]}")
    print(f"y_star: {[float(v) for v in eq.y_star]}")
    print(f"value: {eq.value}")
    print(f"support_x: {list(eq.support_x)}")
    print(f"support_y: {list(eq.support_y)}")
    print(f"degenerate: {eq.degenerate}")
    if eq.degenerate:
        print(f"null_space_dim: {len(eq.null_space_coeffs)}")
        for a in eq.null_space_coeffs:
            print(f"  coeffs: {[float(v) for v in a]}")
        seg = equilibrium_segment(game, eq)
        if seg is not None:
            print(f"segment_base_y: {[float(v) for v in seg.base_y]}")
            print(f"segment_alt_y:  {[float(v) for v in seg.alt_y]}")
    return 0


def _report_run(results) -> int:
    n = len(results)
    n_conv_y = sum(1 for _, r in results if r.converged_y)
    n_conv_x = sum(1 for _, r in results if r.converged_x_st)
    n_aborted = sum(1 for _, r in results if r.aborted_at is not None)
    print(f"trajectories: {n}")
    print(f"converged_y: {n_conv_y}/{n}")
    print(f"converged_x_st: {n_conv_x}/{n}")
    if n_aborted:
        print(f"aborted: {n_aborted}/{n}")
        return 1
    return 0


def _cmd_simulate(args) -> int:
    path = args.config_opt or args.config
    if path is None:
        print("simulate: missing config path", file=sys.stderr)
        return 2
    cfg = ExperimentConfig.from_file(path)
    cfg = _apply_overrides(cfg, args)
    results = run_experiment(cfg)
    return _report_run(results)


def _cmd_experiment(args) -> int:
    name = args.preset_opt or args.preset
    if name is None:
        print("experiment: missing preset name", file=sys.stderr)
        return 2
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.dt is not None:
        overrides["dt"] = args.dt
    if args.horizon is not None:
        overrides["horizon"] = args.horizon
    if args.field is not None:
        overrides["field"] = args.field
    out = args.out if args.out is not None else f"runs/{name}"
    cfg = preset_config(name, output_path=out, **overrides)
    results = run_experiment(cfg)
    print(f"output: {out}")
    return _report_run(results)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "nash":
            return _cmd_nash(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "experiment":
            return _cmd_experiment(args)
        if args.command == "check":
            return 0 if run_checks() else 1
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
