"""Benchmark drivers: convergence studies, solve-time scaling, stability
scans and field-snapshot demos, with deterministic CSV/snapshot outputs.

All floats in CSV files are printed with 17 significant digits; files are
named ``<run-name>-<table>.csv``.  Snapshots are plain text: a header with
the grid geometry and time, then values in global DOF order.
"""

import os
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DivergenceError
from .gridfn import GridFunction
from .operators import EllipticDiscretization
from .problems import get_problem
from .solver import build
from .stability import (MAX_FREE_DOFS, analyze, assemble_step_map,
                        write_spectrum_csv)
from .timestep import TimeStepper
from .tree import ROLE_INTERIOR, build_tree


@dataclass
class RunConfig:
    """Flat run configuration (see README for the config-file keys)."""

    problem: str = "heat2d-homog"
    problem_params: dict = field(default_factory=dict)
    n1: int = 4
    n2: int = 4
    p: int = 12
    tableau: str = "ARK4(3)6L[2]SA"
    formulation: str = "stage"
    dt_list: tuple = (0.1,)
    t_final: float = 0.5
    out_dir: str = "."
    run_name: str = "run"
    snapshot_times: tuple = ()
    sizes: tuple = (4, 8, 16, 32)
    repeats: int = 3
    resample: int = 0
    seed: int = 0
    threads: int = None

    def load_problem(self):
        return get_problem(self.problem, **self.problem_params)

    def make_tree(self, spec, n_side=None):
        n1 = n_side if n_side is not None else self.n1
        n2 = n_side if n_side is not None else self.n2
        if spec.dim == 1:
            return build_tree(spec.bounds, n1, None, self.p)
        return build_tree(spec.bounds, n1, n2, self.p)

    def out_path(self, table, ext="csv"):
        os.makedirs(self.out_dir, exist_ok=True)
        return os.path.join(self.out_dir, f"{self.run_name}-{table}.{ext}")


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.17g}"
    return "" if v is None else str(v)


def write_csv(path, columns, rows):
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row.get(c)) for c in columns) + "\n")


def _steps_for(dt, t_final):
    nsteps = int(round(t_final / dt))
    if nsteps < 1 or abs(nsteps * dt - t_final) > 1e-12 * max(1.0, abs(t_final)):
        raise ConfigError(
            f"dt={dt:g} does not divide t_final={t_final:g} "
            f"(steps*dt - T = {nsteps * dt - t_final:.3e})")
    return nsteps


def solution_errors(tree, spec, t, u):
    """Max and discrete-L2 error against the exact solution.

    The max runs over every DOF of the grid; leaf corner points carry no
    DOFs, so they are excluded by construction.
    """
    ref = spec.exact(t, tree.points)
    err = np.abs(np.asarray(u) - ref)
    return float(err.max()), float(np.sqrt(np.mean(err**2)))


def run_convergence(cfg):
    """Time-refinement study; returns rows sorted by dt descending."""
    spec = cfg.load_problem()
    if spec.exact is None:
        raise ConfigError(
            f"problem {spec.name} has no exact solution for convergence")
    tree = cfg.make_tree(spec)
    disc = EllipticDiscretization(tree, spec.coeffs)
    problem = spec.parabolic()
    rows = []
    for dt in sorted(cfg.dt_list, reverse=True):
        nsteps = _steps_for(dt, cfg.t_final)
        row = {"dt": dt, "steps": nsteps, "max_error": None,
               "l2_error": None, "observed_order": None,
               "saturated": "", "error": ""}
        try:
            stepper = TimeStepper(tree, problem, cfg.tableau, dt,
                                  formulation=cfg.formulation, disc=disc,
                                  threads=cfg.threads)
            state = stepper.run(stepper.initial_state(), nsteps)
            emax, el2 = solution_errors(tree, spec, state.t, state.u)
            row["max_error"], row["l2_error"] = emax, el2
        except DivergenceError as exc:
            row["error"] = f"diverged at step {exc.step}"
        rows.append(row)

    errs = [r["max_error"] for r in rows if r["max_error"] is not None]
    floor = min(errs) if errs else 0.0
    prev = None
    for r in rows:
        e = r["max_error"]
        if e is not None:
            if prev is not None and e > 0:
                r["observed_order"] = float(np.log2(prev / e))
            # near the error floor AND no longer improving: the row reports
            # discretization/roundoff noise, not time-integration error
            if e < 5.0 * floor and (r["observed_order"] is not None
                                    and r["observed_order"] < 1.0):
                r["saturated"] = "saturated"
        prev = e
    write_csv(cfg.out_path("convergence"),
              ["dt", "steps", "max_error", "l2_error", "observed_order",
               "saturated", "error"], rows)
    return rows


def observed_orders(rows, tail=3):
    """Orders between consecutive unsaturated, converged rows.

    Returns ``(all_orders, median_of_last_tail)``; the median of the last
    few pre-saturation pairs is the headline number (early pairs are
    routinely pre-asymptotic).
    """
    orders = []
    for prev, cur in zip(rows, rows[1:]):
        ok = all(r["max_error"] is not None and not r["saturated"]
                 for r in (prev, cur))
        if ok and cur["observed_order"] is not None:
            orders.append(cur["observed_order"])
    if not orders:
        return [], None
    return orders, float(np.median(orders[-tail:]))


def run_timing(cfg, include_full=False):
    """Build/solve wall-time scaling on the 2D heat operator with BE.

    Leaf grids are p x p (11 x 11 in the reference configuration), the
    subdomain grid doubles per row, and per-step solve times are medians of
    at least three repetitions.  Memory exhaustion truncates the table.
    """
    spec = get_problem("heat2d-homog").stability_twin()
    problem = spec.parabolic()
    sizes = list(cfg.sizes) + ([64] if include_full and 64 not in cfg.sizes
                               else [])
    rng = np.random.default_rng(cfg.seed)
    dt = 0.01
    rows = []
    for n in sizes:
        row = {"n_side": n, "N": (n * (cfg.p - 1) + 1) ** 2, "N_dof": None,
               "build_seconds": None, "per_step_solve_seconds": None,
               "note": ""}
        try:
            tree = cfg.make_tree(spec, n_side=n)
            row["N_dof"] = tree.N
            disc = EllipticDiscretization(tree, spec.coeffs)
            t0 = time.perf_counter()
            ops = build(tree, spec.coeffs, sigma=1.0, dt_gamma=dt, disc=disc,
                        threads=cfg.threads)
            row["build_seconds"] = time.perf_counter() - t0
            u = rng.standard_normal(tree.N)
            u[tree.boundary_ids] = 0.0
            fb = np.zeros(tree.boundary_ids.size)
            ops.solve_with_body_load(fb, u)  # warm-up
            reps = []
            for _ in range(max(3, cfg.repeats)):
                t0 = time.perf_counter()
                u = ops.solve_with_body_load(fb, u)
                reps.append(time.perf_counter() - t0)
            row["per_step_solve_seconds"] = float(np.median(reps))
        except MemoryError:
            row["note"] = "skipped: memory exhausted"
            rows.append(row)
            break
        rows.append(row)
    write_csv(cfg.out_path("timing"),
              ["n_side", "N", "N_dof", "build_seconds",
               "per_step_solve_seconds", "note"], rows)
    return rows


def loglog_slope(xs, ys):
    xs, ys = np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float))
    return float(np.polyfit(xs, ys, 1)[0])


def run_stability_scan(cfg):
    """Step-map spectra for each dt; one CSV per dt."""
    spec = cfg.load_problem()
    twin = spec.stability_twin()
    tree = cfg.make_tree(twin)
    n_free = tree.free_ids.size
    if n_free > MAX_FREE_DOFS:
        raise ConfigError(
            f"stability scan refused: {n_free} free DOFs exceed the dense "
            f"assembly limit of {MAX_FREE_DOFS} (shrink n1/n2/p)")
    disc = EllipticDiscretization(tree, twin.coeffs)
    out = []
    for dt in cfg.dt_list:
        M = assemble_step_map(tree, twin.parabolic(), cfg.tableau, dt,
                              formulation=cfg.formulation, disc=disc)
        sp = analyze(M, dt=dt, scheme=cfg.tableau, problem=spec.name,
                     formulation=cfg.formulation)
        write_spectrum_csv(sp, cfg.out_path(f"stability-dt{dt:g}"))
        out.append(sp)
    return out


def write_snapshot(path, tree, spec, t, u, resample=0):
    """Plain-text field dump; optionally also a uniform-grid resample."""
    with open(path, "w") as fh:
        fh.write(f"# hpstep snapshot problem={spec.name} t={t:.17g}\n")
        if tree.dim == 1:
            fh.write(f"# dim=1 p={tree.p} n1={tree.n1} "
                     f"bounds={tree.bounds[0][0]:.17g} {tree.bounds[0][1]:.17g}\n")
        else:
            fh.write(f"# dim=2 p={tree.p} n1={tree.n1} n2={tree.n2} "
                     f"bounds={tree.bounds[0][0]:.17g} {tree.bounds[0][1]:.17g} "
                     f"{tree.bounds[1][0]:.17g} {tree.bounds[1][1]:.17g}\n")
        vv = np.atleast_2d(u)
        fh.write(f"# ncomp={vv.shape[0]} N={tree.N} order=global-dof\n")
        for comp in vv:
            fh.write(" ".join(f"{v:.17g}" for v in comp) + "\n")
    if resample:
        gf = GridFunction(tree, np.asarray(u))
        lo = [tree.bounds[d][0] for d in range(tree.dim)]
        hi = [tree.bounds[d][1] for d in range(tree.dim)]
        if tree.dim == 1:
            pts = np.linspace(lo[0], hi[0], resample)[:, None]
        else:
            gx = np.linspace(lo[0], hi[0], resample)
            gy = np.linspace(lo[1], hi[1], resample)
            pts = np.column_stack([m.ravel() for m in np.meshgrid(gx, gy)])
        vals = np.atleast_2d(gf.sample(pts))
        root, _ = os.path.splitext(path)
        with open(root + "-uniform.txt", "w") as fh:
            fh.write(f"# uniform resample n={resample} t={t:.17g}\n")
            for comp in vals:
                fh.write(" ".join(f"{v:.17g}" for v in comp) + "\n")


def run_demo(cfg):
    """March to t_final, dumping snapshots at the configured times."""
    spec = cfg.load_problem()
    tree = cfg.make_tree(spec)
    problem = spec.parabolic()
    dt = cfg.dt_list[0]
    nsteps = _steps_for(dt, cfg.t_final)
    stepper = TimeStepper(tree, problem, cfg.tableau, dt,
                          formulation=cfg.formulation, threads=cfg.threads)
    state = stepper.initial_state()
    targets = sorted(cfg.snapshot_times)
    written = []

    def maybe_snapshot(state):
        while targets and state.t >= targets[0] - 0.5 * dt:
            tsnap = targets.pop(0)
            path = cfg.out_path(f"snapshot-t{tsnap:g}", ext="txt")
            write_snapshot(path, tree, spec, state.t, state.u,
                           resample=cfg.resample)
            written.append((state.t, path))

    maybe_snapshot(state)
    try:
        for _ in range(nsteps):
            state = stepper.step(state)
            maybe_snapshot(state)
    except DivergenceError:
        path = cfg.out_path("snapshot-last", ext="txt")
        write_snapshot(path, tree, spec, state.t, state.u,
                       resample=cfg.resample)
        raise
    return state, written


def run_solve(cfg):
    """Single integration to t_final; final snapshot plus error report."""
    spec = cfg.load_problem()
    tree = cfg.make_tree(spec)
    stepper = TimeStepper(tree, spec.parabolic(), cfg.tableau,
                          cfg.dt_list[0], formulation=cfg.formulation,
                          threads=cfg.threads)
    nsteps = _steps_for(cfg.dt_list[0], cfg.t_final)
    state = stepper.run(stepper.initial_state(), nsteps)
    path = cfg.out_path(f"snapshot-t{state.t:g}", ext="txt")
    write_snapshot(path, tree, spec, state.t, state.u, resample=cfg.resample)
    report = {"t": state.t, "snapshot": path,
              "max_abs": float(np.max(np.abs(state.u)))}
    if spec.exact is not None:
        emax, el2 = solution_errors(tree, spec, state.t, state.u)
        report["max_error"], report["l2_error"] = emax, el2
    return report
