import numpy as np
import pytest

from hpstep.errors import ConfigError
from hpstep.problems import builtin_problems, get_problem


def test_catalog_contents():
    names = {p.name for p in builtin_problems()}
    assert {"convdiff1d-k1", "varcoef1d", "heat2d-inhomog", "heat2d-homog",
            "burgers2d-travel", "burgers2d-diffusive",
            "burgers2d-rotating"} <= names


def test_every_exact_problem_passes_residual_check():
    for spec in builtin_problems():
        if spec._residual_factors is None:
            continue
        assert spec.verify_manufactured(n=200) <= 1e-8, spec.name


def test_varcoef_residual_sampled():
    spec = get_problem("varcoef1d")
    assert spec.verify_manufactured(n=200) <= 1e-8


def test_convdiff_initial_condition_value():
    spec = get_problem("convdiff1d", k=1)
    val = spec.u0(np.array([[0.0]]))[0]
    assert abs(val - np.sin(1.0) * np.cos(1.0)) < 1e-14


def test_convdiff_bc_formula():
    spec = get_problem("convdiff1d", k=100)
    t, xs = 0.3, np.array([[0.0], [2.0]])
    ref = np.sin(1 + 1.7 * np.pi * xs[:, 0]) * np.cos(1 + t**2 * xs[:, 0]) \
        * (1 + t**3 * xs[:, 0])
    assert np.allclose(spec.f(t, xs), ref, atol=1e-14)


def test_convdiff_shock_variant_has_no_source():
    spec = get_problem("convdiff1d", k=100, manufactured=False)
    assert spec.q is None and spec.exact is None
    assert spec.f is not None  # boundary data stays the printed formula
    assert spec.name.endswith("shock")


def test_burgers_travel_front_value():
    spec = get_problem("burgers2d-travel")
    pt = np.array([[0.25, 0.25]])  # x = y, t = 0: exponent vanishes
    eps = 0.1
    expect_u = 3 / 4 - 1 / (4 * (1 + 1 / (32 * eps)))
    vals = spec.exact(0.0, pt)
    assert abs(vals[0, 0] - expect_u) < 1e-14
    assert abs(vals[1, 0] - (3 / 2 - expect_u)) < 1e-14


def test_burgers_diffusive_pair_is_exact_without_source():
    # the decaying pair solves the PDE itself: manufactured source ~ 0
    spec = get_problem("burgers2d-diffusive")
    pts = spec.sample_points(100, seed=1)
    for t in (0.0, 0.5):
        assert np.abs(spec.q(t, pts)).max() < 1e-10


def test_burgers_rotating_initial_speed_profile():
    spec = get_problem("burgers2d-rotating")
    pts = np.array([[0.5, -0.25], [0.0, 0.0]])
    u = spec.u0(pts)
    r2 = 0.5**2 + 0.25**2
    assert abs(u[0, 0] - 5 * 0.25 * np.exp(-3 * r2)) < 1e-14
    assert abs(u[1, 0] - 5 * 0.5 * np.exp(-3 * r2)) < 1e-14
    assert u[0, 1] == 0.0 and u[1, 1] == 0.0
    assert spec.time_independent_bc and spec.f is None


def test_heat2d_homog_truly_homogeneous():
    spec = get_problem("heat2d-homog")
    edges = np.array([[0.0, 0.3], [1.0, 0.7], [0.4, 0.0], [0.9, 1.0]])
    assert np.abs(spec.exact(0.8, edges)).max() < 1e-14
    assert spec.f is None and spec.time_independent_bc


def test_stability_twin_strips_data_and_reaction():
    spec = get_problem("varcoef1d")
    assert spec.coeffs.c is not None
    twin = spec.stability_twin()
    assert twin.q is None and twin.f is None and twin.g is None
    assert twin.coeffs.c is None  # indefinite reaction dropped
    assert twin.time_independent_bc
    # heat keeps its (absent) reaction untouched
    heat_twin = get_problem("heat2d-homog").stability_twin()
    assert heat_twin.coeffs.c is None


def test_unknown_problem_and_bad_params():
    with pytest.raises(ConfigError):
        get_problem("nosuch")
    with pytest.raises(ConfigError):
        get_problem("convdiff1d", bogus=1)


def test_problem_parameters_reach_factory():
    spec = get_problem("convdiff1d", k=100)
    assert spec.params["k"] == 100
    spec = get_problem("burgers2d-travel", epsilon=0.2)
    assert spec.params["epsilon"] == 0.2
