"""Command line entry point.

Subcommands: ``mission``, ``batch``, ``surface``, ``lqr``, ``oracle``.
Exit status is 0 on success, 1 for usage or configuration errors and 2 for
runtime failures.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import controller, estimator, oracle
from .config import ConfigError, parse_config
from .lqr import NonConvergentError

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

SURFACE_N = list(range(1, 51))
SURFACE_S = [round(0.05 * i, 2) for i in range(21)]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mwsmpc", description="Mission-wide scenario SMPC experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, config=True, seed=True, out=True):
        if config:
            p.add_argument("--config", required=True, help="run configuration file")
        if seed:
            p.add_argument("--seed", type=int, default=None, help="override the config seed")
        if out:
            p.add_argument("--out", default="out", help="output directory (default: out)")

    p = sub.add_parser("mission", help="run one mission and write its trace")
    common(p)
    p = sub.add_parser("batch", help="run many missions and write summary CSVs")
    common(p)
    p.add_argument("--missions", type=int, default=None, help="override the config mission count")
    p.add_argument("--workers", type=int, default=1, help="worker processes (default: 1)")
    p.add_argument("--traces", action="store_true", help="also write one trace CSV per mission")
    p = sub.add_parser("surface", help="write the stage-wise bound grid")
    common(p, config=False, seed=False)
    p = sub.add_parser("lqr", help="print the LQR gain and terminal cost")
    common(p, seed=False, out=False)
    p = sub.add_parser("oracle", help="run exact checks on random finite chains")
    common(p, config=False, out=False)
    p.add_argument("--instances", type=int, default=1000)
    return parser


def _fmt_row(row) -> str:
    return "[" + ", ".join(f"{v:.4f}" for v in row) + "]"


def _load(args):
    cfg = parse_config(args.config)
    spec = cfg.spec
    if getattr(args, "seed", None) is not None:
        if args.seed < 0:
            raise ConfigError("must be non-negative", "seed")
        spec = replace(spec, seed=args.seed)
    return cfg, spec


def cmd_lqr(args, out):
    cfg, _ = _load(args)
    design = cfg.lqr_design()
    K = np.atleast_2d(design.K)
    print("K = " + (_fmt_row(K[0]) if K.shape[0] == 1 else "[" + ", ".join(_fmt_row(r) for r in K) + "]"),
          file=out)
    print("Q_N = [" + ", ".join(_fmt_row(r) for r in design.P) + "]", file=out)
    return EXIT_OK


def cmd_surface(args, out):
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "swps_surface.csv")
    estimator.write_surface_csv(path, SURFACE_N, SURFACE_S)
    print(f"wrote {path}", file=out)
    return EXIT_OK


def cmd_mission(args, out):
    cfg, spec = _load(args)
    trace = controller.run_mission(spec, cfg.system, cfg.poly, cfg.lqr_design(), cfg.s0)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "mission_trace.csv")
    controller.write_trace_csv(path, trace, cfg.poly)
    status = "safe" if trace.success else f"unsafe (first violation at step {trace.first_violation})"
    print(f"mission {status}; fallbacks: {int(trace.fallback_flags.sum())}; wrote {path}", file=out)
    return EXIT_OK


def cmd_batch(args, out):
    cfg, spec = _load(args)
    missions = cfg.missions if args.missions is None else args.missions
    if missions < 1:
        raise ConfigError("must be at least 1", "missions")
    os.makedirs(args.out, exist_ok=True)
    trace_dir = os.path.join(args.out, "traces") if args.traces else None
    result = controller.run_batch(spec, cfg.system, cfg.poly, cfg.lqr_design(), cfg.s0, missions,
                                  workers=args.workers, trace_dir=trace_dir)
    controller.write_summary_csv(os.path.join(args.out, "batch_summary.csv"), result)
    controller.write_steps_csv(os.path.join(args.out, "batch_steps.csv"), result)
    print(f"missions {result.missions}  successes {result.successes}  ratio {result.ratio:.4f}  "
          f"certified {result.s_certified:.4f}", file=out)
    print(f"QP statuses {result.status_counts}; max KKT stationarity {result.max_stationarity:.2e}, "
          f"complementarity {result.max_complementarity:.2e}, violation {result.max_violation:.2e}",
          file=out)
    return EXIT_OK


def run_oracle_checks(n_instances: int, seed: int = 0) -> dict:
    """Counts of failed instances per exact check on random chains."""
    rng = np.random.default_rng(seed)
    failures = {"dp_vs_enumeration": 0, "survivor_identity": 0, "switching_bound": 0, "boole": 0}
    for _ in range(n_instances):
        chain = oracle.random_chain(rng)
        s0 = 0
        if abs(oracle.exact_mwps(chain, s0) - oracle.enumerate_mwps(chain, s0)) > 1e-12:
            failures["dp_vs_enumeration"] += 1
        for k in range(1, chain.horizon):
            lhs, rhs = oracle.check_lemma1(chain, s0, k)
            if abs(lhs - rhs) > 1e-12:
                failures["survivor_identity"] += 1
                break
        mwps, bound = oracle.check_boole(chain, s0)
        if mwps < bound - 1e-12:
            failures["boole"] += 1
        gammas = rng.uniform(0.8, 1.0, chain.horizon - 1)
        policies = oracle.random_policy_switches(rng, chain, gammas)
        mwps, bound = oracle.check_prop1(policies, chain.safe_mask, gammas, s0)
        if mwps < bound - 1e-12:
            failures["switching_bound"] += 1
    return failures


def cmd_oracle(args, out):
    if args.instances < 1:
        raise ConfigError("must be at least 1", "instances")
    failures = run_oracle_checks(args.instances, 0 if args.seed is None else args.seed)
    for name, count in failures.items():
        print(f"{'PASS' if count == 0 else 'FAIL'}  {name}: {count} failures / {args.instances}", file=out)
    return EXIT_OK if not any(failures.values()) else EXIT_RUNTIME


COMMANDS = {"mission": cmd_mission, "batch": cmd_batch, "surface": cmd_surface,
            "lqr": cmd_lqr, "oracle": cmd_oracle}


def dispatch(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=err)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=err)
        return EXIT_CONFIG
    except (controller.MissionConfigError, NonConvergentError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_RUNTIME


def main():
    sys.exit(dispatch())
