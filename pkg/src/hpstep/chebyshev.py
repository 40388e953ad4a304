"""Chebyshev collocation primitives.

Nodes, first/second differentiation matrices on arbitrary intervals,
tensor-product 2D operators and barycentric interpolation.  Node ordering is
descending: ``x_0 = b`` down to ``x_{p-1} = a``, matching the cosine formula
``cos(j*pi/(p-1))`` mapped affinely onto ``[a, b]``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidGridError, OutOfDomainError


@dataclass(frozen=True)
class ChebGrid1D:
    """Chebyshev-Gauss-Lobatto grid of ``p`` points on ``[a, b]``."""

    p: int
    interval: tuple
    nodes: np.ndarray  # descending, nodes[0] == b, nodes[-1] == a

    @property
    def a(self):
        return self.interval[0]

    @property
    def b(self):
        return self.interval[1]


def cheb_nodes(p, interval):
    """Build the p-point Chebyshev grid on ``interval = (a, b)``.

    Endpoints are exact and the node set is exactly symmetric about the
    interval midpoint.
    """
    a, b = float(interval[0]), float(interval[1])
    if p < 3:
        raise InvalidGridError(f"need at least 3 collocation points, got p={p}")
    if not a < b:
        raise InvalidGridError(f"empty interval ({a}, {b})")
    xi = np.cos(np.pi * np.arange(p) / (p - 1))
    xi = 0.5 * (xi - xi[::-1])  # enforce exact antisymmetry
    xi[0], xi[-1] = 1.0, -1.0
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * xi
    nodes[0], nodes[-1] = b, a
    return ChebGrid1D(p=p, interval=(a, b), nodes=nodes)


def lobatto_weights(p):
    """Barycentric weights of the CGL nodes (descending order)."""
    w = np.ones(p)
    w[1::2] = -1.0
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def barycentric_weights(nodes):
    """Barycentric weights for arbitrary distinct nodes, scaled to unit max."""
    x = np.asarray(nodes, dtype=float)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    # log-scale the products to dodge overflow for larger node sets
    logw = -np.sum(np.log(np.abs(diff)), axis=1)
    sign = np.prod(np.sign(diff), axis=1)
    w = sign * np.exp(logw - logw.max())
    return w / np.max(np.abs(w))


def diff_matrix_general(nodes, order=1, weights=None):
    """Differentiation matrix on arbitrary distinct nodes.

    Uses the barycentric representation with the negative-sum trick for the
    diagonal, and the first-order recursion for the second derivative.
    """
    x = np.asarray(nodes, dtype=float)
    n = x.size
    w = barycentric_weights(x) if weights is None else np.asarray(weights, float)
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    wratio = w[None, :] / w[:, None]
    D1 = wratio / dx
    np.fill_diagonal(D1, 0.0)
    np.fill_diagonal(D1, -D1.sum(axis=1))
    if order == 1:
        return D1
    if order == 2:
        d1 = np.diag(D1)
        D2 = 2.0 * (wratio * d1[:, None] - D1) / dx
        np.fill_diagonal(D2, 0.0)
        np.fill_diagonal(D2, -D2.sum(axis=1))
        return D2
    raise ValueError(f"order must be 1 or 2, got {order}")


def diff_matrix(grid, order=1):
    """First- or second-derivative spectral matrix on a ChebGrid1D.

    Exact on polynomials of degree <= p-1; the order-2 matrix is built
    directly from the barycentric weights (squaring the order-1 matrix is
    kept as a test oracle only).
    """
    return diff_matrix_general(grid.nodes, order=order,
                               weights=lobatto_weights(grid.p))


def laplacian_2d(gx, gy):
    """Kronecker-sum second-derivative operator on the tensor grid.

    Ordering is x-major: entry ``i * gy.p + j`` corresponds to the point
    ``(gx.nodes[i], gy.nodes[j])``, consistent with the leaf numbering used
    by the domain tree.
    """
    D2x = diff_matrix(gx, order=2)
    D2y = diff_matrix(gy, order=2)
    return np.kron(D2x, np.eye(gy.p)) + np.kron(np.eye(gx.p), D2y)


def interpolate(grid, values, points):
    """Barycentric interpolation of nodal ``values`` at query ``points``.

    Exact for polynomials of degree <= p-1 and reproduces nodal values
    exactly at the nodes.  Queries outside ``[a, b]`` raise
    :class:`OutOfDomainError`.
    """
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    a, b = grid.interval
    eps = 1e-12 * (b - a)
    if np.any(pts < a - eps) or np.any(pts > b + eps):
        raise OutOfDomainError(
            f"query outside interval [{a}, {b}]: "
            f"range [{pts.min()}, {pts.max()}]")
    return barycentric_interpolate(grid.nodes, values,
                                   np.clip(pts, a, b),
                                   weights=lobatto_weights(grid.p))


def barycentric_interpolate(nodes, values, points, weights=None):
    """Second-form barycentric interpolation on arbitrary nodes."""
    x = np.asarray(nodes, dtype=float)
    f = np.asarray(values, dtype=float)
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    w = barycentric_weights(x) if weights is None else np.asarray(weights, float)
    d = pts[:, None] - x[None, :]
    exact = np.isclose(d, 0.0, rtol=0.0, atol=1e-14 * max(1.0, np.abs(x).max()))
    d = np.where(exact, 1.0, d)
    c = w[None, :] / d
    out = (c @ f) / c.sum(axis=1)
    hit_rows, hit_cols = np.nonzero(exact)
    out[hit_rows] = f[hit_cols]
    return out
