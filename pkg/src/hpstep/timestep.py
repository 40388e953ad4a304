"""IMEX time stepping on the HPS spatial discretization.

Two formulations of the ESDIRK/ERK pairs are provided.  The stage
formulation solves for stage solutions directly,

    (I - dt*gamma*L) u_i = u^n + dt*sum_{j<i} a_ij L u_j
                               + dt*sum_{j<i} ahat_ij (q_j + g_j),

with stage boundary values f(t^n + c_i dt), and assembles the update from
the b-row.  The slope formulation solves for slope variables k_i (boundary
values f_t, i.e. the time derivative of the Dirichlet data), optionally with
explicit slopes l_i for the nonlinear term, and optionally with flux-jump
penalization on the interface equations so discontinuities inherited from
u^n decay instead of persisting.

Backward Euler is a single fully implicit stage: the new solution is the
direct solve output, which keeps the interface treatment exactly consistent
with flux continuity (the configuration whose one-step map carries one zero
eigenvalue per interface).

All L-applications on right-hand sides are leaf-local spectral evaluations
with interface averaging, the same convention used for the nonlinear term's
first derivatives.
"""

import numpy as np

from .errors import DivergenceError, UnsupportedConfigurationError
from .operators import EllipticDiscretization
from .solver import HpsOperatorSet
from .tableaux import ButcherPair, load_tableau

DIVERGENCE_LIMIT = 1e12


class ParabolicProblem:
    """Problem data for ``u_t = L u + q + g(u)`` with Dirichlet data ``f``.

    ``coeffs`` stores the elliptic form ``A = -L`` (diffusion-positive
    convention).  All field callables are vectorized over point arrays:
    ``q(t, pts)``, ``f(t, pts)``, ``f_t(t, pts)``, ``u0(pts)`` return
    ``(n,)`` for scalar problems or ``(ncomp, n)`` for systems.  The
    nonlinear term ``g(t, u, u_x[, u_y])`` receives stacked ``(ncomp, n)``
    arrays and uses derivatives of order at most one.
    """

    def __init__(self, coeffs, q=None, g=None, f=None, f_t=None, u0=None,
                 time_independent_bc=False, ncomp=1, name="problem"):
        self.coeffs = coeffs
        self.q = q
        self.g = g
        self.f = f
        self.f_t = f_t
        self.u0 = u0
        self.time_independent_bc = time_independent_bc
        self.ncomp = ncomp
        self.name = name

    @property
    def is_linear(self):
        return self.g is None


def evaluate_nonlinear(disc, problem, t, u):
    """Pointwise nonlinear term with leaf-local spectral derivatives.

    Interface points receive the average of the two abutting leaves'
    derivative values.  Returns zeros when the problem has no ``g``.
    """
    u = np.asarray(u, dtype=float)
    squeeze = u.ndim == 1
    U = np.atleast_2d(u)
    if problem.g is None:
        out = np.zeros_like(U)
    else:
        grads = disc.gradient(U)
        out = np.asarray(problem.g(t, U, *grads), dtype=float)
    return out[0] if squeeze else out


class StepperState:
    """Time, solution and the operator set the solution is marching with."""

    def __init__(self, t, u):
        self.t = float(t)
        self.u = np.asarray(u, dtype=float)


class TimeStepper:
    """Fixed-step IMEX integrator bound to one tree/problem/tableau.

    The HPS operator set for the shifted operator ``I - dt*gamma*L`` is
    built once per ``dt`` and reused for every implicit stage of every
    step; changing ``dt`` rebuilds it (a mismatched shift is never reused
    silently).
    """

    def __init__(self, tree, problem, tableau, dt, formulation="stage",
                 disc=None, threads=None):
        if formulation not in ("stage", "slope", "slope-penalized"):
            raise UnsupportedConfigurationError(
                f"unknown formulation {formulation!r}")
        self.tree = tree
        self.problem = problem
        self.pair = (tableau if isinstance(tableau, ButcherPair)
                     else load_tableau(tableau))
        self.formulation = formulation
        self.penalized = formulation == "slope-penalized"
        self.disc = disc or EllipticDiscretization(tree, problem.coeffs)
        self.threads = threads
        self._step_count = 0

        if formulation != "stage":
            if not problem.is_linear and not problem.time_independent_bc:
                raise UnsupportedConfigurationError(
                    "slope formulation with a nonlinear term requires "
                    "time-independent boundary data (slope variables have "
                    "no boundary interpretation otherwise)")
            if (problem.is_linear and not problem.time_independent_bc
                    and problem.f is not None and problem.f_t is None):
                raise UnsupportedConfigurationError(
                    "slope formulation with time-dependent boundary data "
                    "requires f_t")
        if not problem.is_linear and self.pair.Ahat is None \
                and self.pair.s > 1:
            raise UnsupportedConfigurationError(
                f"tableau {self.pair.name} has no explicit half for g")

        self._bnd_pts = tree.points[tree.boundary_ids]
        self._all_pts = tree.points
        self.dt = None
        self.ops = None
        self.ops_id = None
        self.set_dt(dt)

    # -- operator cache ------------------------------------------------------

    @property
    def shift(self):
        return self.dt * self.pair.gamma

    def set_dt(self, dt):
        """Set the step size, rebuilding the cached operator set."""
        if dt <= 0:
            raise ValueError(f"dt must be positive, got {dt}")
        if self.dt == dt and self.ops is not None:
            return
        self.dt = float(dt)
        self.ops = HpsOperatorSet(self.disc, sigma=1.0,
                                  dt_gamma=self.dt * self.pair.gamma,
                                  threads=self.threads)
        if self.formulation != "stage" and self.ops_id is None:
            # identity operator on the tree: explicit slope assignments are
            # solved through the same hierarchical machinery, which supplies
            # constraint-consistent interface values
            self.ops_id = HpsOperatorSet(self.disc, sigma=1.0, dt_gamma=0.0,
                                         threads=self.threads)

    def _check_ops(self):
        if self.ops is None or self.ops.dt_gamma != self.dt * self.pair.gamma \
                or self.ops.sigma != 1.0:
            raise UnsupportedConfigurationError(
                "cached operator set does not match dt*gamma; call set_dt")

    # -- field evaluation ----------------------------------------------------

    def _stack(self, vals, npts):
        k = self.problem.ncomp
        if vals is None:
            return np.zeros((k, npts))
        arr = np.asarray(vals, dtype=float)
        return arr.reshape(k, npts) if arr.ndim > 1 or k == 1 \
            else np.broadcast_to(arr, (k, npts))

    def _bc(self, t):
        if self.problem.f is None:
            return np.zeros((self.problem.ncomp, self._bnd_pts.shape[0]))
        return self._stack(self.problem.f(t, self._bnd_pts),
                           self._bnd_pts.shape[0])

    def _bc_t(self, t):
        if self.problem.time_independent_bc or self.problem.f is None:
            return np.zeros((self.problem.ncomp, self._bnd_pts.shape[0]))
        return self._stack(self.problem.f_t(t, self._bnd_pts),
                           self._bnd_pts.shape[0])

    def _q(self, t):
        if self.problem.q is None:
            return 0.0
        return self._stack(self.problem.q(t, self._all_pts), self.tree.N)

    def _g(self, t, u):
        if self.problem.g is None:
            return 0.0
        grads = self.disc.gradient(u)
        return np.asarray(self.problem.g(t, u, *grads), dtype=float)

    def _guard(self, u):
        mx = np.max(np.abs(u)) if u.size else 0.0
        if not np.isfinite(mx) or mx > DIVERGENCE_LIMIT:
            raise DivergenceError(
                f"solution diverged at step {self._step_count} "
                f"(max|u| = {mx:.3e})", step=self._step_count)

    def initial_state(self):
        u0 = self._stack(self.problem.u0(self._all_pts), self.tree.N)
        return StepperState(0.0, u0 if self.problem.ncomp > 1 else u0[0])

    # -- stepping ------------------------------------------------------------

    def step(self, state):
        """Advance one step of size dt, returning a new state."""
        self._check_ops()
        u = np.atleast_2d(np.asarray(state.u, dtype=float))
        if self.pair.s == 1:
            unew = self._step_backward_euler(state.t, u)
        elif self.formulation == "stage":
            unew = self._step_stage(state.t, u)
        else:
            unew = self._step_slope(state.t, u)
        self._step_count += 1
        self._guard(unew)
        out = unew if np.asarray(state.u).ndim > 1 else unew[0]
        return StepperState(state.t + self.dt, out)

    def run(self, state, nsteps):
        for _ in range(nsteps):
            state = self.step(state)
        return state

    def _step_backward_euler(self, t, u):
        dt = self.dt
        t1 = t + dt
        r = u + dt * (self._q(t1) + self._g(t, u))
        return self.ops.solve_with_body_load(self._bc(t1), r)

    def _step_stage(self, t, u):
        # The b-row update: since the implicit table is stiffly accurate
        # (b equals its last row), the update equals the last stage plus an
        # explicit correction Δt*sum_j (bhat_j - ahat_sj)(q_j + g_j).  This
        # form is exact at interior collocation points and keeps interface
        # values bounded by the last solve (quadrature of leaf-averaged
        # second derivatives at interface DOFs is unstable: those rows are
        # algebraic constraints, not ODE components).
        pair, dt, disc = self.pair, self.dt, self.disc
        s = pair.s
        k, N = u.shape
        Lu = np.empty((s, k, N))
        QG = np.empty((s, k, N))
        Lu[0] = disc.apply_lop(u)
        QG[0] = self._q(t + pair.c[0] * dt) + self._g(t + pair.c[0] * dt, u)
        ui = u
        for i in range(1, s):
            ti = t + pair.c[i] * dt
            r = u + dt * (
                np.tensordot(pair.A[i, :i], Lu[:i], axes=1)
                + np.tensordot(pair.Ahat[i, :i], QG[:i], axes=1))
            ui = self.ops.solve_with_body_load(self._bc(ti), r)
            self._guard(ui)
            if i < s - 1:
                Lu[i] = disc.apply_lop(ui)
            QG[i] = self._q(ti) + self._g(ti, ui)
        unew = ui + dt * np.tensordot(pair.bhat - pair.Ahat[s - 1],
                                      QG, axes=1)
        unew[:, self.tree.boundary_ids] = self._bc(t + dt)
        return unew

    def _slope_assign(self, bc, body, jump, dt):
        """Explicit slope assignment k = body, solved through the tree.

        The identity-operator sweep copies ``body`` at leaf interiors and
        fills interface values from the flux-continuity equations (with the
        penalty term when active), instead of evaluating leaf-averaged
        derivatives at the interface DOFs.
        """
        if jump is not None:
            return self.ops_id.solve_penalized(bc, body, jump, dt)
        return self.ops_id.solve_with_body_load(bc, body)

    def _step_slope(self, t, u):
        pair, dt, disc = self.pair, self.dt, self.disc
        s = pair.s
        k, N = u.shape
        nonlinear = not self.problem.is_linear
        jump = disc.flux_jump(u) if self.penalized else None

        Lun = disc.apply_lop(u)
        K = np.empty((s, k, N))
        LK = np.empty((s, k, N))
        K[0] = self._slope_assign(self._bc_t(t + pair.c[0] * dt),
                                  Lun + self._q(t + pair.c[0] * dt), jump, dt)
        LK[0] = disc.apply_lop(K[0])
        if nonlinear:
            Ls = np.empty((s, k, N))
            Lvals = np.empty((s, k, N))
            l0 = self._slope_assign(np.zeros((k, self._bnd_pts.shape[0])),
                                    self._g(t + pair.c[0] * dt, u), None, dt)
            Lvals[0] = l0
            Ls[0] = disc.apply_lop(l0)

        for i in range(1, s):
            ti = t + pair.c[i] * dt
            r = Lun + dt * np.tensordot(pair.A[i, :i], LK[:i], axes=1) \
                + self._q(ti)
            if nonlinear:
                r = r + dt * np.tensordot(pair.Ahat[i, :i], Ls[:i], axes=1)
            bc = self._bc_t(ti)
            if self.penalized:
                ki = self.ops.solve_penalized(bc, r, jump, dt)
            else:
                ki = self.ops.solve_with_body_load(bc, r)
            self._guard(ki)
            K[i] = ki
            if i < s - 1 or nonlinear:
                LK[i] = disc.apply_lop(ki)
            if nonlinear:
                v = u + dt * np.tensordot(pair.A[i, :i + 1], K[:i + 1], axes=1) \
                    + dt * np.tensordot(pair.Ahat[i, :i], Lvals[:i], axes=1)
                li = self._slope_assign(
                    np.zeros((k, self._bnd_pts.shape[0])),
                    self._g(ti, v), None, dt)
                Lvals[i] = li
                Ls[i] = disc.apply_lop(li)

        unew = u + dt * np.tensordot(pair.b, K, axes=1)
        if nonlinear:
            unew = unew + dt * np.tensordot(pair.bhat, Lvals, axes=1)
        return unew


def scalar_stability_function(pair, z):
    """Amplification factor of the implicit half on ``u' = lambda*u``."""
    return pair.stability_function(z)
