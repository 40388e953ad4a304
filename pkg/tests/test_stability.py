import numpy as np
import pytest

from hpstep.errors import UnsupportedConfigurationError
from hpstep.operators import EllipticDiscretization, OperatorCoefficients
from hpstep.problems import get_problem
from hpstep.stability import analyze, assemble_step_map, spectrum_csv_lines
from hpstep.timestep import ParabolicProblem
from hpstep.tree import build_tree


@pytest.fixture(scope="module")
def varcoef_twin():
    return get_problem("varcoef1d").stability_twin()


def test_analyze_identity():
    sp = analyze(np.eye(12))
    assert sp.spectral_radius == 1.0
    assert sp.zero_count == 0
    assert sp.eigenvalues.size == 12


def test_zero_operator_single_leaf_map_is_identity():
    # nothing evolves: one backward Euler step is the identity
    tree = build_tree((0.0, 1.0), 1, None, 10)
    coeffs = OperatorCoefficients(c11=0.0, dim=1)
    prob = ParabolicProblem(coeffs=coeffs, u0=lambda pts: 0 * pts[:, 0],
                            time_independent_bc=True)
    M = assemble_step_map(tree, prob, "BE", 0.3)
    assert np.abs(M - np.eye(M.shape[0])).max() < 1e-12
    sp = analyze(M)
    assert abs(sp.spectral_radius - 1.0) < 1e-12
    assert np.abs(sp.eigenvalues - 1.0).max() < 1e-12


def test_backward_euler_heat_single_leaf_spectrum_in_unit_interval():
    tree = build_tree((0.0, 1.0), 1, None, 8)
    coeffs = OperatorCoefficients(c11=1.0, dim=1)
    prob = ParabolicProblem(coeffs=coeffs, u0=lambda pts: 0 * pts[:, 0],
                            time_independent_bc=True)
    M = assemble_step_map(tree, prob, "BE", 0.05)
    sp = analyze(M)
    ev = sp.eigenvalues
    assert np.abs(ev.imag).max() < 1e-10
    assert np.all(ev.real > 0.0) and np.all(ev.real < 1.0)


@pytest.mark.parametrize("dt", [1.0, 1e-2, 1e-4, 1e-6])
def test_backward_euler_varcoef_bounded_and_interface_nullspace(dt, varcoef_twin):
    twin = varcoef_twin
    tree = build_tree(twin.bounds, 8, None, 12)
    M = assemble_step_map(tree, twin.parabolic(), "BE", dt)
    sp = analyze(M, dt=dt, scheme="BE", problem="varcoef1d")
    assert sp.spectral_radius <= 1.0 + 1e-10
    assert sp.zero_count == 7


def test_single_leaf_has_no_zero_eigenvalues(varcoef_twin):
    twin = varcoef_twin
    tree = build_tree(twin.bounds, 1, None, 12)
    M = assemble_step_map(tree, twin.parabolic(), "BE", 1e-2)
    assert analyze(M).zero_count == 0


@pytest.mark.parametrize("form", ["stage", "slope", "slope-penalized"])
def test_ark4_step_map_bounded(form, varcoef_twin):
    twin = varcoef_twin
    tree = build_tree(twin.bounds, 8, None, 12)
    disc = EllipticDiscretization(tree, twin.coeffs)
    for dt in (1.0, 1e-2):
        M = assemble_step_map(tree, twin.parabolic(), "ARK4", dt,
                              formulation=form, disc=disc)
        sp = analyze(M, dt=dt)
        assert sp.spectral_radius <= 1.0 + 1e-8


def test_map_assembly_is_linear(varcoef_twin):
    twin = varcoef_twin
    tree = build_tree(twin.bounds, 4, None, 10)
    M = assemble_step_map(tree, twin.parabolic(), "BE", 1e-2)
    rng = np.random.default_rng(0)
    x = rng.standard_normal(M.shape[0])
    assert np.abs(M @ (0.7 * x) - 0.7 * (M @ x)).max() <= 1e-12 * np.abs(M @ x).max() / 0.7


def test_nonhomogeneous_problem_rejected():
    spec = get_problem("varcoef1d")
    tree = build_tree(spec.bounds, 4, None, 10)
    with pytest.raises(UnsupportedConfigurationError):
        assemble_step_map(tree, spec.parabolic(), "BE", 0.1)


def test_size_guard():
    twin = get_problem("heat2d-homog").stability_twin()
    tree = build_tree(twin.bounds, 8, 8, 12)  # 7520 free DOFs
    with pytest.raises(UnsupportedConfigurationError):
        assemble_step_map(tree, twin.parabolic(), "BE", 0.1)


def test_spectrum_csv_format():
    sp = analyze(np.diag([0.5, -0.25]), dt=0.1, scheme="BE",
                 problem="varcoef1d")
    lines = spectrum_csv_lines(sp)
    assert lines[0].startswith("#") and "zero_count" in lines[0]
    assert lines[1] == "re,im,modulus"
    assert len(lines) == 4
    # eigenvalues sorted by modulus descending
    assert lines[2].startswith("0.5")
