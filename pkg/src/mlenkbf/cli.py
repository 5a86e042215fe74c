"""Command-line interface.

Subcommands::

    validate   structural checks + stability diagnostics for a model config
    simulate   generate one observation path and dump it as CSV
    filter     run one filter (single-level or multilevel) over a fresh path
    sweep      cost-vs-MSE grid across variants and accuracies
    poc        propagation-of-chaos discrepancy across ensemble sizes
    plan       print the level/particle allocation for a target accuracy

Exit codes: 0 success, 1 usage or config errors, 2 runtime errors.  All
commands are deterministic in their config and seed; ``--threads`` is a
worker-count hint and never affects results.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from ._rng import mix64
from .errors import BadConfig, EnkbfError
from .harness import (
    PUBLIC_VARIANTS,
    PocConfig,
    SweepConfig,
    cost_mse_sweep,
    poc_sweep,
    write_poc_csv,
    write_rates_csv,
)
from .model import model_from_json, random_model, stability_report
from .multilevel import ml_estimate, plan_allocation, plan_to_json
from .paths import generate_path, write_path_csv
from .records import write_run_csv
from .ensemble import run_single_level

__all__ = ["main"]

_PATH_BRANCH = 0x9A7
_FILTER_BRANCH = 0xF117


class _Usage(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); we map usage errors to 1
        raise _Usage(message)


def _build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", help="output file (or prefix for sweep)")
    common.add_argument("--threads", type=int, default=1,
                        help="worker-count hint; results never depend on it")
    common.add_argument("--quiet", action="store_true",
                        help="suppress informational output")

    p = _Parser(prog="mlenkbf", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version="%(prog)s 0.1.0")
    sub = p.add_subparsers(dest="command", metavar="command")
    sub.add_parser("validate", parents=[common],
                   help="check a model config and print diagnostics")
    sub.add_parser("simulate", parents=[common],
                   help="generate an observation path CSV")
    sub.add_parser("filter", parents=[common],
                   help="run one filter and dump its trajectory")
    sub.add_parser("sweep", parents=[common],
                   help="cost-vs-MSE sweep; writes <out>_sweep.csv and <out>_rates.csv")
    sub.add_parser("poc", parents=[common],
                   help="propagation-of-chaos discrepancy sweep")
    plan = sub.add_parser("plan", parents=[common],
                          help="print the multilevel allocation for an accuracy")
    plan.add_argument("--eps", type=float, required=True,
                      help="target accuracy in (0, 1)")
    plan.add_argument("--c0", type=float, default=1.0,
                      help="particle-count constant (default 1)")
    plan.add_argument("--n-min", type=int, default=2,
                      help="minimum particles per level (default 2)")
    return p


def _load_config(args) -> dict:
    if not args.config:
        raise _Usage(f"{args.command} requires --config")
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as e:
        raise _Usage(f"cannot read config file {args.config}: {e.strerror}") from e
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as e:
        raise _Usage(f"config file {args.config} is not valid JSON: {e}") from e
    if not isinstance(cfg, dict):
        raise _Usage(f"config file {args.config} must hold a JSON object")
    return cfg


def _resolve_model(cfg: dict):
    if "model" not in cfg:
        raise BadConfig("config is missing the 'model' key")
    spec = cfg["model"]
    if isinstance(spec, dict) and "random" in spec:
        r = spec["random"]
        for k in ("d_x", "d_y", "seed"):
            if k not in r:
                raise BadConfig(f"model.random is missing '{k}'")
        return random_model(int(r["d_x"]), int(r["d_y"]), int(r["seed"]))
    return model_from_json(spec)


def _require(cfg: dict, *keys):
    missing = [k for k in keys if k not in cfg]
    if missing:
        raise BadConfig(f"config is missing keys: {', '.join(missing)}")


def _seed_of(cfg: dict, args) -> int:
    if args.seed is not None:
        return args.seed
    if "seed" not in cfg:
        raise BadConfig("config has no 'seed' and --seed was not given")
    return int(cfg["seed"])


def _open_out(args):
    if args.out:
        return open(args.out, "w", newline="")
    return None


def _cmd_validate(args) -> int:
    cfg = _load_config(args)
    model = _resolve_model(cfg)
    report = stability_report(model)
    text = report.to_json()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    if not args.quiet and not report.satisfies_assumptions:
        print("note: stability/rank assumptions not satisfied; "
              "convergence rates are not guaranteed", file=sys.stderr)
    return 0


def _cmd_simulate(args) -> int:
    cfg = _load_config(args)
    model = _resolve_model(cfg)
    _require(cfg, "T", "level_gen")
    path = generate_path(model, int(cfg["T"]), int(cfg["level_gen"]),
                         _seed_of(cfg, args))
    fh = _open_out(args)
    try:
        write_path_csv(path, fh if fh is not None else sys.stdout)
    finally:
        if fh is not None:
            fh.close()
    return 0


def _cmd_filter(args) -> int:
    cfg = _load_config(args)
    model = _resolve_model(cfg)
    _require(cfg, "T", "variant")
    variant = cfg["variant"]
    if variant not in PUBLIC_VARIANTS:
        raise BadConfig(
            f"unknown variant {variant!r}; expected one of {sorted(PUBLIC_VARIANTS)}")
    kind, engine = PUBLIC_VARIANTS[variant]
    T = int(cfg["T"])
    seed = _seed_of(cfg, args)
    path_seed = mix64(seed, _PATH_BRANCH)
    filter_seed = mix64(seed, _FILTER_BRANCH)
    if kind == "single":
        _require(cfg, "level", "N")
        level = int(cfg["level"])
        level_gen = int(cfg.get("level_gen", level + 2))
        path = generate_path(model, T, level_gen, path_seed)
        rec = run_single_level(model, path, int(cfg["N"]), level, engine,
                               filter_seed)
    else:
        _require(cfg, "eps")
        plan = plan_allocation(float(cfg["eps"]), float(cfg.get("c0", 1.0)),
                               int(cfg.get("n_min", 2)))
        base = int(cfg.get("base_level", 0))
        level_gen = int(cfg.get("level_gen", base + plan.L + 2))
        path = generate_path(model, T, level_gen, path_seed)
        rec = ml_estimate(model, path, plan, engine, filter_seed,
                          base_level=base)
    rec = replace(rec, variant=variant)
    fh = _open_out(args)
    try:
        write_run_csv(rec, fh if fh is not None else sys.stdout)
    finally:
        if fh is not None:
            fh.close()
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_config(args)
    if not args.out:
        raise _Usage("sweep requires --out (prefix for the result files)")
    model = _resolve_model(cfg)
    _require(cfg, "T", "eps_grid", "variants", "reps")
    sweep_cfg = SweepConfig(
        model=model, T=int(cfg["T"]),
        eps_grid=tuple(float(e) for e in cfg["eps_grid"]),
        variants=tuple(cfg["variants"]),
        reps=int(cfg["reps"]), base_seed=_seed_of(cfg, args),
        c0=float(cfg.get("c0", 1.0)),
        c_single=float(cfg.get("c_single", 1.0)),
        headroom=int(cfg.get("headroom", 2)),
        n_min=int(cfg.get("n_min", 2)),
        base_level=int(cfg.get("base_level", 2)),
    )
    sweep_path = f"{args.out}_sweep.csv"
    rates_path = f"{args.out}_rates.csv"
    with open(sweep_path, "w", newline="") as fh:
        rows, fits = cost_mse_sweep(sweep_cfg, out_fh=fh)
    with open(rates_path, "w", newline="") as fh:
        write_rates_csv(fits, fh)
    if not args.quiet:
        for variant, fit in fits.items():
            print(f"{variant}: ln-cost vs ln-MSE slope {fit.slope:+.3f} "
                  f"(r2 {fit.r2:.4f}, {fit.n_points} points)")
        print(f"wrote {sweep_path} and {rates_path}")
    return 0


def _cmd_poc(args) -> int:
    cfg = _load_config(args)
    model = _resolve_model(cfg)
    _require(cfg, "T", "level", "n_grid", "reps")
    poc_cfg = PocConfig(
        model=model, T=int(cfg["T"]), level=int(cfg["level"]),
        n_grid=tuple(int(n) for n in cfg["n_grid"]),
        reps=int(cfg["reps"]), base_seed=_seed_of(cfg, args),
    )
    rows, fit = poc_sweep(poc_cfg)
    fh = _open_out(args)
    try:
        write_poc_csv(rows, fh if fh is not None else sys.stdout)
    finally:
        if fh is not None:
            fh.close()
    if not args.quiet:
        print(f"discrepancy vs N slope {fit.slope:+.3f} (r2 {fit.r2:.4f})")
    return 0


def _cmd_plan(args) -> int:
    plan = plan_allocation(args.eps, args.c0, args.n_min)
    text = plan_to_json(plan)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


_COMMANDS = {
    "validate": _cmd_validate,
    "simulate": _cmd_simulate,
    "filter": _cmd_filter,
    "sweep": _cmd_sweep,
    "poc": _cmd_poc,
    "plan": _cmd_plan,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise _Usage("a command is required (see --help)")
    except _Usage as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except _Usage as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except BadConfig as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except EnkbfError as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
