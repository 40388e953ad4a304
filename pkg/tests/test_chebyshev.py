import numpy as np
import pytest

from hpstep.chebyshev import (barycentric_interpolate, cheb_nodes, diff_matrix,
                              diff_matrix_general, interpolate, laplacian_2d)
from hpstep.errors import InvalidGridError, OutOfDomainError


def test_degenerate_order_rejected():
    with pytest.raises(InvalidGridError):
        cheb_nodes(2, (-1, 1))
    with pytest.raises(InvalidGridError):
        cheb_nodes(5, (1, 1))


def test_p3_nodes():
    g = cheb_nodes(3, (-1, 1))
    assert np.array_equal(g.nodes, [1.0, 0.0, -1.0])


def test_p5_nodes_mapped():
    g = cheb_nodes(5, (0, 2))
    s = np.sqrt(2) / 2
    assert np.allclose(g.nodes, [2.0, 1 + s, 1.0, 1 - s, 0.0], atol=1e-15)
    assert g.nodes[0] == 2.0 and g.nodes[-1] == 0.0


def test_nodes_symmetric():
    g = cheb_nodes(17, (-3, 5))
    mid = 0.5 * (g.a + g.b)
    assert np.allclose(g.nodes + g.nodes[::-1], 2 * mid, atol=0)


def test_first_derivative_of_constant_and_x():
    g = cheb_nodes(14, (0, 2))
    D = diff_matrix(g, 1)
    assert np.abs(D @ np.ones(g.p)).max() < 1e-12
    assert np.abs(D @ g.nodes - 1.0).max() < 1e-12


def test_p3_first_derivative_closed_form():
    # closed-form barycentric differentiation on {1, 0, -1}
    D = diff_matrix(cheb_nodes(3, (-1, 1)), 1)
    ref = np.array([[1.5, -2.0, 0.5], [0.5, 0.0, -0.5], [-0.5, 2.0, -1.5]])
    assert np.allclose(D, ref, atol=1e-14)


@pytest.mark.parametrize("p", [5, 9, 16])
def test_polynomial_exactness(p):
    g = cheb_nodes(p, (-1.5, 0.5))
    D1, D2 = diff_matrix(g, 1), diff_matrix(g, 2)
    x = g.nodes
    for k in range(p):
        f = x**k
        df = k * x ** max(k - 1, 0) if k else np.zeros(p)
        d2f = k * (k - 1) * x ** max(k - 2, 0) if k >= 2 else np.zeros(p)
        assert np.abs(D1 @ f - df).max() < 1e-9
        assert np.abs(D2 @ f - d2f).max() < 1e-8


@pytest.mark.parametrize("p", [8, 16, 24])
def test_second_derivative_matches_squared_first(p):
    g = cheb_nodes(p, (0, 1))
    D1, D2 = diff_matrix(g, 1), diff_matrix(g, 2)
    scale = np.abs(D2).max()
    assert np.abs(D2 - D1 @ D1).max() / scale < 1e-10


def test_dirichlet_spectrum_matches_continuum():
    # u'' = lambda u on [-1,1], u(+-1) = 0: lambda_k = -k^2 pi^2 / 4
    g = cheb_nodes(24, (-1, 1))
    D2 = diff_matrix(g, 2)[1:-1, 1:-1]
    ev = np.linalg.eigvals(D2)
    ev = ev[np.argsort(-ev.real)]
    for k in range(1, 9):
        lam = -(k * np.pi / 2) ** 2
        assert abs(ev[k - 1].real - lam) / abs(lam) < 1e-6
        assert abs(ev[k - 1].imag) < 1e-8 * np.abs(D2).max()


@pytest.mark.parametrize("p", [8, 16, 24, 32])
def test_dirichlet_spectrum_real_negative_distinct(p):
    g = cheb_nodes(p, (-1, 1))
    D2 = diff_matrix(g, 2)[1:-1, 1:-1]
    ev = np.linalg.eigvals(D2)
    assert np.all(np.abs(ev.imag) < 1e-8 * np.abs(D2).max())
    assert np.all(ev.real < 0)
    se = np.sort(ev.real)
    assert np.min(np.diff(se)) > 1e-10 * np.abs(se).max()


def test_laplacian_2d_constant_and_quadratic():
    gx, gy = cheb_nodes(10, (0, 1)), cheb_nodes(10, (0, 2))
    L = laplacian_2d(gx, gy)
    xx = np.repeat(gx.nodes, gy.p)
    yy = np.tile(gy.nodes, gx.p)
    assert np.abs(L @ np.ones(L.shape[0])).max() < 1e-9
    interior = ((xx > 1e-12) & (xx < 1 - 1e-12)
                & (yy > 1e-12) & (yy < 2 - 1e-12))
    r = L @ (xx**2 + yy**2)
    assert np.abs(r[interior] - 4.0).max() < 1e-8


def test_laplacian_2d_interior_spectrum_is_pairwise_sums():
    # eigenvalues of the Dirichlet-restricted tensor operator are sums of
    # the 1D Dirichlet spectrum
    p = 9
    gx = gy = cheb_nodes(p, (0, 1))
    D2 = diff_matrix(gx, 2)
    E = D2[1:-1, 1:-1]
    sig = np.sort(np.linalg.eigvals(E).real)
    idx = np.arange(p)
    keep = np.array([(i * p + j) for i in range(1, p - 1)
                     for j in range(1, p - 1)])
    L = laplacian_2d(gx, gy)[np.ix_(keep, keep)]
    ev = np.sort(np.linalg.eigvals(L).real)
    expected = np.sort(np.add.outer(sig, sig).ravel())
    assert np.abs(ev - expected).max() < 1e-6 * np.abs(expected).max()


def test_interpolation_polynomial_exactness():
    g = cheb_nodes(6, (-1, 1))
    vals = g.nodes**3
    mids = 0.5 * (g.nodes[:-1] + g.nodes[1:])
    out = interpolate(g, vals, mids)
    assert np.abs(out - mids**3).max() < 1e-13


def test_interpolation_reproduces_nodes():
    g = cheb_nodes(11, (0, 3))
    vals = np.cos(g.nodes)
    out = interpolate(g, vals, g.nodes)
    assert np.array_equal(out, vals)


def test_interpolation_sin_spectral():
    g = cheb_nodes(16, (0, 2))
    pts = np.linspace(0, 2, 100)
    out = interpolate(g, np.sin(g.nodes), pts)
    assert np.abs(out - np.sin(pts)).max() < 1e-12


def test_interpolation_out_of_domain():
    g = cheb_nodes(8, (0, 1))
    with pytest.raises(OutOfDomainError):
        interpolate(g, np.ones(8), [1.5])


def test_general_nodes_differentiation():
    # arbitrary subset of nodes (as used for edge-tangential rows)
    nodes = cheb_nodes(12, (0, 1)).nodes[1:-1]
    D = diff_matrix_general(nodes, 1)
    f = nodes**4
    assert np.abs(D @ f - 4 * nodes**3).max() < 1e-9
    out = barycentric_interpolate(nodes, f, [0.4, 0.6])
    assert np.abs(out - np.array([0.4, 0.6]) ** 4).max() < 1e-12
