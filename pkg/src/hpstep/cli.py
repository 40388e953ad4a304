"""Command-line interface.

Subcommands: describe, solve, converge, timing, stability, demo.  Options
given on the command line override config-file keys.  Exit codes: 0 on
success, 2 on configuration errors, 3 on numerical divergence.
"""

import argparse
import sys

from . import drivers
from .config import apply_overrides, parse_config
from .drivers import RunConfig
from .errors import ConfigError, DivergenceError, HpstepError


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="hpstep",
        description="Hierarchical Poincare-Steklov elliptic solver with "
                    "IMEX Runge-Kutta time stepping")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in (
            ("describe", "print the domain tree summary"),
            ("solve", "integrate once and dump the final field"),
            ("converge", "time-refinement convergence table"),
            ("timing", "build/solve wall-time scaling table"),
            ("stability", "step-map spectra, one CSV per dt"),
            ("demo", "field snapshots at configured times")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("-c", "--config", help="config file (INI sections "
                       "[problem] [tree] [time] [output])")
        p.add_argument("--problem")
        p.add_argument("--k", type=float)
        p.add_argument("--epsilon", type=float)
        p.add_argument("--kappa", type=float)
        p.add_argument("--bc")
        p.add_argument("--manufactured")
        p.add_argument("--n1", type=int)
        p.add_argument("--n2", type=int)
        p.add_argument("--p", type=int)
        p.add_argument("--tableau")
        p.add_argument("--formulation",
                       choices=["stage", "slope", "slope-penalized"])
        p.add_argument("--dt", help="time step, or comma list")
        p.add_argument("--t-final", dest="t_final", type=float)
        p.add_argument("--out-dir", dest="out_dir")
        p.add_argument("--run-name", dest="run_name")
        p.add_argument("--snapshots", help="comma list of snapshot times")
        p.add_argument("--sizes", help="comma list of per-side leaf counts")
        p.add_argument("--repeats", type=int)
        p.add_argument("--resample", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int,
                       help="fork-join build threads (default "
                            "HPSTEP_NUM_THREADS)")
        p.add_argument("--full", action="store_true",
                       help="timing: include the 64x64 configuration")
    return ap


def _configure(args):
    cfg = parse_config(args.config) if args.config else RunConfig()
    if not args.config:
        cfg.problem_params = {}
    return apply_overrides(cfg, args)


def cmd_describe(cfg, args):
    spec = cfg.load_problem()
    tree = cfg.make_tree(spec)
    print(tree.describe())
    print(f"problem: {spec.name} (ncomp={spec.ncomp}, bc={spec.bc_mode})")
    return 0


def cmd_solve(cfg, args):
    report = drivers.run_solve(cfg)
    print(f"t = {report['t']:g}  max|u| = {report['max_abs']:.6g}")
    if "max_error" in report:
        print(f"max error = {report['max_error']:.6e}  "
              f"l2 error = {report['l2_error']:.6e}")
    print(f"snapshot: {report['snapshot']}")
    return 0


def cmd_converge(cfg, args):
    rows = drivers.run_convergence(cfg)
    print(f"{'dt':>12} {'max_error':>14} {'order':>8}  flags")
    for r in rows:
        err = f"{r['max_error']:.6e}" if r["max_error"] is not None else "-"
        order = f"{r['observed_order']:.2f}" if r["observed_order"] else ""
        flags = " ".join(x for x in (r["saturated"], r["error"]) if x)
        print(f"{r['dt']:>12g} {err:>14} {order:>8}  {flags}")
    print(f"table: {cfg.out_path('convergence')}")
    return 0


def cmd_timing(cfg, args):
    rows = drivers.run_timing(cfg, include_full=args.full)
    print(f"{'n':>4} {'N':>8} {'build_s':>10} {'per_step_s':>12}  note")
    for r in rows:
        b = f"{r['build_seconds']:.4f}" if r["build_seconds"] else "-"
        s = (f"{r['per_step_solve_seconds']:.5f}"
             if r["per_step_solve_seconds"] else "-")
        print(f"{r['n_side']:>4} {r['N']:>8} {b:>10} {s:>12}  {r['note']}")
    solved = [r for r in rows if r["per_step_solve_seconds"]]
    if len(solved) >= 2:
        slope = drivers.loglog_slope([r["N"] for r in solved],
                                     [r["per_step_solve_seconds"]
                                      for r in solved])
        bslope = drivers.loglog_slope([r["N"] for r in solved],
                                      [r["build_seconds"] for r in solved])
        print(f"solve-time log-log slope: {slope:.3f}   "
              f"build slope: {bslope:.3f}")
    print(f"table: {cfg.out_path('timing')}")
    return 0


def cmd_stability(cfg, args):
    if not getattr(args, "dt", None) and len(cfg.dt_list) <= 1:
        cfg.dt_list = (1.0, 1e-2, 1e-4, 1e-6)
    specs = drivers.run_stability_scan(cfg)
    for sp in specs:
        print(f"dt={sp.dt:<10g} rho={sp.spectral_radius:.12f} "
              f"zero_count={sp.zero_count} (n_free={sp.n_free})")
    return 0


def cmd_demo(cfg, args):
    state, written = drivers.run_demo(cfg)
    print(f"completed to t={state.t:g}, max|u|={abs(state.u).max():.6g}")
    for t, path in written:
        print(f"  snapshot t={t:g}: {path}")
    return 0


_COMMANDS = {
    "describe": cmd_describe,
    "solve": cmd_solve,
    "converge": cmd_converge,
    "timing": cmd_timing,
    "stability": cmd_stability,
    "demo": cmd_demo,
}


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        cfg = _configure(args)
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"numerical divergence: {exc}", file=sys.stderr)
        return 3
    except HpstepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
