import numpy as np
import pytest

from hpstep.errors import (DivergenceError, UnknownTableauError,
                           UnsupportedConfigurationError)
from hpstep.operators import EllipticDiscretization, OperatorCoefficients
from hpstep.solver import build
from hpstep.tableaux import ButcherPair, available_tableaux, load_tableau
from hpstep.timestep import (ParabolicProblem, TimeStepper, evaluate_nonlinear,
                             scalar_stability_function)
from hpstep.tree import build_tree

UNIT = ((0.0, 1.0), (0.0, 1.0))


# -- tableaux ----------------------------------------------------------------

def test_unknown_tableau_lists_available():
    with pytest.raises(UnknownTableauError) as exc:
        load_tableau("RK99")
    for name in available_tableaux():
        assert name in str(exc.value)


def test_backward_euler_pair():
    be = load_tableau("BE")
    assert be.s == 1 and be.gamma == 1.0
    assert np.array_equal(be.A, [[1.0]])
    assert np.array_equal(be.b, [1.0])
    assert np.array_equal(be.c, [1.0])
    assert be.Ahat is None


def test_ark4_structure():
    p = load_tableau("ARK4(3)6L[2]SA")
    assert p.s == 6 and p.gamma == 0.25
    assert abs(p.b.sum() - 1.0) < 1e-13
    assert abs(p.b @ p.c - 0.5) < 1e-13
    assert np.allclose(np.diag(p.A)[1:], 0.25, atol=0)
    assert np.array_equal(p.b, p.A[-1])  # stiffly accurate
    assert np.array_equal(p.bhat, p.b)


def test_ark5_loads_by_alias():
    p = load_tableau("ARK5")
    assert p.name == "ARK5(4)8L[2]SA"
    assert p.s == 8 and p.order == 5 and p.embedded_order == 4


def test_corrupted_coefficient_rejected():
    p = load_tableau("ARK4")
    A = p.A.copy()
    A[2, 1] += 1e-6
    with pytest.raises(ValueError):
        ButcherPair("bad", A, p.b, p.c, p.gamma, order=4,
                    Ahat=p.Ahat, bhat=p.bhat)
    bad_b = p.b.copy()
    bad_b[3] += 1e-6
    with pytest.raises(ValueError):
        ButcherPair("bad", p.A, bad_b, p.c, p.gamma, order=4,
                    Ahat=p.Ahat, bhat=bad_b)


def test_stability_function_backward_euler():
    be = load_tableau("BE")
    assert abs(scalar_stability_function(be, -1.0) - 0.5) < 1e-15
    for z in (-10.0, -0.5 + 0.3j):
        assert abs(be.stability_function(z) - 1.0 / (1.0 - z)) < 1e-14


@pytest.mark.parametrize("name", ["BE", "ARK4", "ARK5"])
def test_stability_function_consistency_and_L_stability(name):
    p = load_tableau(name)
    assert abs(p.stability_function(0.0) - 1.0) < 1e-14
    zs = -np.logspace(-4, 6, 300)
    mags = [abs(p.stability_function(z)) for z in zs]
    assert max(mags) <= 1.0 + 1e-12
    assert mags[-1] < 0.05  # strong damping far on the negative axis


# -- steppers ----------------------------------------------------------------

def heat1d_problem(p=16, leaves=1):
    tree = build_tree((0.0, 1.0), leaves, None, p)
    coeffs = OperatorCoefficients(c11=1.0, dim=1)
    prob = ParabolicProblem(
        coeffs=coeffs, u0=lambda pts: np.sin(np.pi * pts[:, 0]),
        time_independent_bc=True)
    return tree, prob


def test_backward_euler_eigenfunction_decay():
    tree, prob = heat1d_problem()
    st = TimeStepper(tree, prob, "BE", dt=0.01)
    s1 = st.step(st.initial_state())
    ref = np.sin(np.pi * tree.points[:, 0]) / (1 + np.pi ** 2 * 0.01)
    assert np.abs(s1.u - ref).max() <= 1e-6


def test_small_step_consistency():
    tree, prob = heat1d_problem()
    st = TimeStepper(tree, prob, "ARK4", dt=1e-9)
    s0 = st.initial_state()
    s1 = st.step(s0)
    assert np.abs(s1.u - s0.u).max() < 1e-7


def test_ark4_one_step_richardson_ratio():
    # local error of one ARK4 step should shrink ~2^5 under halving
    tree = build_tree(UNIT, 1, 1, 16)
    coeffs = OperatorCoefficients(c11=1.0, c22=1.0, dim=2)
    uex = lambda t, pts: (np.sin(np.pi * pts[:, 0]) * np.sin(np.pi * pts[:, 1])
                          * np.exp(-t))
    q = lambda t, pts: (-1 + 2 * np.pi ** 2) * uex(t, pts)
    prob = ParabolicProblem(coeffs=coeffs, q=q, u0=lambda pts: uex(0.0, pts),
                            time_independent_bc=True)
    errs = []
    for dt in (0.00625, 0.003125):
        # small enough that the nonstiff local error dominates, large
        # enough to stay well above the elliptic solver's accuracy floor
        st = TimeStepper(tree, prob, "ARK4", dt=dt)
        s = st.step(st.initial_state())
        errs.append(np.abs(s.u - uex(dt, tree.points)).max())
    ratio = errs[0] / errs[1]
    assert 32 * 0.8 <= ratio <= 32 * 1.2


def test_stage_and_slope_agree_one_step():
    tree, prob = heat1d_problem(p=14, leaves=2)
    sa = TimeStepper(tree, prob, "ARK4", dt=0.02, formulation="stage")
    sb = TimeStepper(tree, prob, "ARK4", dt=0.02, formulation="slope")
    ua = sa.step(sa.initial_state()).u
    ub = sb.step(sb.initial_state()).u
    assert np.abs(ua - ub).max() <= 1e-8


@pytest.mark.parametrize("form", ["stage", "slope", "slope-penalized"])
@pytest.mark.parametrize("tableau", ["BE", "ARK4"])
def test_steady_state_preserved(form, tableau):
    # L u = 0 for u = x with static matching BC: the state must not move
    tree = build_tree((0.0, 1.0), 2, None, 12)
    coeffs = OperatorCoefficients(c11=1.0, dim=1)
    prob = ParabolicProblem(
        coeffs=coeffs, u0=lambda pts: pts[:, 0],
        f=lambda t, pts: pts[:, 0], f_t=lambda t, pts: 0.0 * pts[:, 0],
        time_independent_bc=True)
    st = TimeStepper(tree, prob, tableau, dt=0.1, formulation=form)
    s = st.run(st.initial_state(), 5)
    assert np.abs(s.u - tree.points[:, 0]).max() <= 1e-12


def test_divergence_guard():
    tree, prob = heat1d_problem()
    st = TimeStepper(tree, prob, "BE", dt=0.01)
    bad = st.initial_state()
    bad.u = bad.u + 1e13
    with pytest.raises(DivergenceError) as exc:
        st.step(bad)
    assert exc.value.step is not None


def test_changing_dt_rebuilds_operator_set():
    tree, prob = heat1d_problem()
    st = TimeStepper(tree, prob, "ARK4", dt=0.1)
    ops1 = st.ops
    assert ops1.dt_gamma == 0.1 * st.pair.gamma
    st.set_dt(0.05)
    assert st.ops is not ops1
    assert st.ops.dt_gamma == 0.05 * st.pair.gamma


def test_mismatched_shift_never_reused_silently():
    tree, prob = heat1d_problem()
    st = TimeStepper(tree, prob, "ARK4", dt=0.1)
    st.ops = build(tree, prob.coeffs, sigma=1.0, dt_gamma=0.123)
    with pytest.raises(UnsupportedConfigurationError):
        st.step(st.initial_state())


def test_nonlinear_slope_requires_static_bc():
    tree = build_tree(UNIT, 1, 1, 8)
    coeffs = OperatorCoefficients(c11=1.0, c22=1.0, dim=2)
    prob = ParabolicProblem(
        coeffs=coeffs, ncomp=1,
        g=lambda t, u, ux, uy: -u * ux,
        f=lambda t, pts: np.sin(t) * pts[:, 0],
        f_t=lambda t, pts: np.cos(t) * pts[:, 0],
        u0=lambda pts: pts[:, 0], time_independent_bc=False)
    with pytest.raises(UnsupportedConfigurationError):
        TimeStepper(tree, prob, "ARK4", dt=0.1, formulation="slope")
    # the stage formulation accepts the same problem
    TimeStepper(tree, prob, "ARK4", dt=0.1, formulation="stage")


# -- nonlinear evaluation ------------------------------------------------------

def test_evaluate_nonlinear_zero_without_g():
    tree, prob = heat1d_problem()
    disc = EllipticDiscretization(tree, prob.coeffs)
    out = evaluate_nonlinear(disc, prob, 0.0, np.ones(tree.N))
    assert np.array_equal(out, np.zeros(tree.N))


def test_evaluate_nonlinear_linear_field_exact():
    # g = -u u_x with u = x: exactly -x on a single leaf
    tree = build_tree((0.0, 1.0), 1, None, 10)
    coeffs = OperatorCoefficients(c11=1.0, dim=1)
    prob = ParabolicProblem(coeffs=coeffs,
                            g=lambda t, u, ux: -u * ux,
                            u0=lambda pts: pts[:, 0],
                            time_independent_bc=True)
    disc = EllipticDiscretization(tree, coeffs)
    out = evaluate_nonlinear(disc, prob, 0.0, tree.points[:, 0])
    assert np.abs(out + tree.points[:, 0]).max() < 1e-11


def test_evaluate_nonlinear_burgers_symbolic_oracle():
    import sympy as sp
    x, y = sp.symbols("x y")
    u_expr = sp.sin(2 * x) * sp.cos(y)
    v_expr = sp.cos(x) * sp.sin(3 * y) / 2
    gu = -(u_expr * sp.diff(u_expr, x) + v_expr * sp.diff(u_expr, y))
    gv = -(u_expr * sp.diff(v_expr, x) + v_expr * sp.diff(v_expr, y))
    fu, fv = (sp.lambdify((x, y), e, "numpy") for e in (u_expr, v_expr))
    fgu, fgv = (sp.lambdify((x, y), e, "numpy") for e in (gu, gv))

    tree = build_tree(UNIT, 2, 2, 20)
    coeffs = OperatorCoefficients(c11=0.1, c22=0.1, dim=2)

    def g(t, u, ux, uy):
        return np.stack([-(u[0] * ux[0] + u[1] * uy[0]),
                         -(u[0] * ux[1] + u[1] * uy[1])])

    prob = ParabolicProblem(coeffs=coeffs, g=g, ncomp=2,
                            u0=lambda pts: np.zeros((2, pts.shape[0])),
                            time_independent_bc=True)
    disc = EllipticDiscretization(tree, coeffs)
    X, Y = tree.points[:, 0], tree.points[:, 1]
    U = np.stack([fu(X, Y), fv(X, Y)])
    out = evaluate_nonlinear(disc, prob, 0.0, U)
    ref = np.stack([fgu(X, Y), fgv(X, Y)])
    assert np.abs(out - ref).max() <= 1e-9
