"""Variable-coefficient elliptic operators and their spectral discretization.

The coefficient convention throughout the package is

    A u = -c11 u_xx - c22 u_yy + c1 u_x + c2 u_y + c u

with ellipticity ``c11 > 0`` (and ``c22 > 0`` in 2D); the mixed-derivative
term is not supported, which is what allows leaf corner points to be dropped.
Parabolic problems store the elliptic form ``A = -L`` of their right-hand
side operator, so the time stepper sees the diffusion-positive ``L = -A``.

Besides the per-leaf collocation blocks consumed by the fast solver, this
module assembles the full sparse system (interior rows apply ``A``,
interface rows impose flux continuity, boundary rows are identity) used as
the brute-force oracle.
"""

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .chebyshev import diff_matrix, diff_matrix_general
from .errors import HpstepError
from .tree import ROLE_BOUNDARY, ROLE_INTERFACE, ROLE_INTERIOR


def _as_field(v):
    """Normalize a coefficient entry: None, scalar, or callable."""
    if v is None or callable(v):
        return v
    return float(v)


class OperatorCoefficients:
    """Scalar coefficient fields of the elliptic operator ``A``.

    Each field is a constant or a vectorized callable of the space
    coordinates (``f(x)`` in 1D, ``f(x, y)`` in 2D).  Time dependence is not
    supported; coefficients are frozen at build time.
    """

    def __init__(self, c11, c22=None, c1=None, c2=None, c=None, dim=2):
        self.dim = dim
        self.c11 = _as_field(c11)
        self.c22 = _as_field(c22)
        self.c1 = _as_field(c1)
        self.c2 = _as_field(c2)
        self.c = _as_field(c)
        if dim == 1 and (self.c22 is not None or self.c2 is not None):
            raise ValueError("c22/c2 are meaningless for 1D operators")

    @property
    def fields(self):
        return {"c11": self.c11, "c22": self.c22, "c1": self.c1,
                "c2": self.c2, "c": self.c}

    @property
    def is_constant(self):
        return not any(callable(v) for v in self.fields.values())

    def _eval_field(self, v, pts):
        n = pts.shape[0]
        if v is None:
            return np.zeros(n)
        if callable(v):
            return np.broadcast_to(np.asarray(v(*pts.T), dtype=float), (n,)).copy()
        return np.full(n, v)

    def evaluate(self, points):
        """Evaluate all fields at ``points`` of shape (n, dim)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = {k: self._eval_field(v, pts) for k, v in self.fields.items()}
        if self.dim == 1:
            out["c22"] = np.zeros(pts.shape[0])
            out["c2"] = np.zeros(pts.shape[0])
        return out

    def check_ellipticity(self, points):
        """Sample-based ellipticity check: c11 > 0 (and c22 > 0 in 2D)."""
        vals = self.evaluate(points)
        bad = vals["c11"] <= 0
        if self.dim == 2:
            bad = bad | (vals["c22"] <= 0)
        if np.any(bad):
            raise HpstepError(
                f"operator is not elliptic at {int(bad.sum())} of "
                f"{bad.size} sample points (c11/c22 must be positive)")

    def negated(self):
        """Coefficients of ``-A`` (converts between the elliptic operator
        and the parabolic right-hand side operator ``L = -A``)."""
        def neg(v):
            if v is None:
                return None
            if callable(v):
                return lambda *xy, _f=v: -np.asarray(_f(*xy), dtype=float)
            return -v
        return OperatorCoefficients(
            c11=neg(self.c11), c22=neg(self.c22), c1=neg(self.c1),
            c2=neg(self.c2), c=neg(self.c), dim=self.dim)


def shift_reaction(coeffs, sigma, dt_gamma):
    """Coefficients of ``sigma*I - dt_gamma*L`` where ``L = -A[coeffs]``.

    Equals ``sigma*I + dt_gamma*A`` in the shared convention: second- and
    first-order fields scale by ``dt_gamma``; the reaction field becomes
    ``sigma + dt_gamma*c``.
    """
    def scale(v):
        if v is None:
            return None
        if callable(v):
            return lambda *xy, _f=v: dt_gamma * np.asarray(_f(*xy), dtype=float)
        return dt_gamma * v

    c = coeffs.c
    if c is None:
        c_new = sigma
    elif callable(c):
        c_new = lambda *xy, _f=c: sigma + dt_gamma * np.asarray(_f(*xy), dtype=float)
    else:
        c_new = sigma + dt_gamma * c
    return OperatorCoefficients(
        c11=scale(coeffs.c11), c22=scale(coeffs.c22), c1=scale(coeffs.c1),
        c2=scale(coeffs.c2), c=c_new, dim=coeffs.dim)


class LeafStencil:
    """Grid-only local operators of one leaf, shared by all congruent leaves.

    Local ordering is interior points first (tensor order), then edge
    points (tensor order); ``m = ni + nb`` points in total.  Derivative rows
    at edge points exist in two flavours: the normal-direction rows used for
    flux extraction come from the full tensor-product matrices (exact, since
    they never touch corner columns), while tangential rows used only for
    pointwise evaluation are built from the edge's own p-2 nodes.
    """

    def __init__(self, tree):
        self.dim = tree.dim
        self.p = p = tree.p
        self.ni = tree.ni
        self.nb = tree.nb
        self.m = self.ni + self.nb
        gx = tree.leaf_gx

        if self.dim == 1:
            D1 = diff_matrix(gx, 1)
            D2 = diff_matrix(gx, 2)
            perm = np.r_[np.arange(1, p - 1), [0, p - 1]]
            ix = np.ix_(perm, perm)
            self.D1x, self.D2x = D1[ix], D2[ix]
            self.D1y = self.D2y = None
            self.Ex1, self.Ex2 = self.D1x, self.D2x
            self.Ey1 = self.Ey2 = None
            # flux rows: du/dx at both endpoints
            self.D_bnd = self.D1x[self.ni:, :]
            # local coordinates relative to the leaf's lower corner
            self.local_xy = (gx.nodes - gx.a)[perm][:, None]
            return

        gy = tree.leaf_gy
        D1x_1d, D2x_1d = diff_matrix(gx, 1), diff_matrix(gx, 2)
        D1y_1d, D2y_1d = diff_matrix(gy, 1), diff_matrix(gy, 2)
        Ipx, Ipy = np.eye(p), np.eye(p)
        D1x_t = np.kron(D1x_1d, Ipy)
        D2x_t = np.kron(D2x_1d, Ipy)
        D1y_t = np.kron(Ipx, D1y_1d)
        D2y_t = np.kron(Ipx, D2y_1d)

        xi, yi = np.meshgrid(np.arange(p), np.arange(p), indexing="ij")
        xi, yi = xi.ravel(), yi.ravel()
        corner = ((xi == 0) | (xi == p - 1)) & ((yi == 0) | (yi == p - 1))
        interior = (xi >= 1) & (xi <= p - 2) & (yi >= 1) & (yi <= p - 2)
        edge = ~corner & ~interior
        t = np.arange(p * p)
        perm = np.r_[t[interior], t[edge]]
        ix = np.ix_(perm, perm)
        self.D1x, self.D2x = D1x_t[ix], D2x_t[ix]
        self.D1y, self.D2y = D1y_t[ix], D2y_t[ix]

        xi_l, yi_l = xi[perm], yi[perm]
        self.xi, self.yi = xi_l, yi_l
        on_vert = (xi_l == 0) | (xi_l == p - 1)   # east/west edges
        on_horz = (yi_l == 0) | (yi_l == p - 1)   # north/south edges

        # flux extraction rows (normal direction, coordinate-signed)
        bnd = np.arange(self.ni, self.m)
        self.D_bnd = np.where(on_vert[bnd, None], self.D1x[bnd], self.D1y[bnd])

        # evaluation operators valid at every local point: replace the
        # (corner-touching) tangential rows by edge-local 1D rows
        xin, yin = gx.nodes[1:p - 1], gy.nodes[1:p - 1]
        ex1, ex2 = diff_matrix_general(xin, 1), diff_matrix_general(xin, 2)
        ey1, ey2 = diff_matrix_general(yin, 1), diff_matrix_general(yin, 2)
        self.Ex1, self.Ex2 = self.D1x.copy(), self.D2x.copy()
        self.Ey1, self.Ey2 = self.D1y.copy(), self.D2y.copy()
        loc = np.arange(self.m)
        for yi_edge in (0, p - 1):              # north/south: tangential x
            rows = loc[on_horz & (yi_l == yi_edge)]
            order = np.argsort(xi_l[rows])
            rows = rows[order]                  # xi = 1 .. p-2
            for E, e in ((self.Ex1, ex1), (self.Ex2, ex2)):
                E[rows, :] = 0.0
                E[np.ix_(rows, rows)] = e
        for xi_edge in (0, p - 1):              # east/west: tangential y
            rows = loc[on_vert & (xi_l == xi_edge)]
            order = np.argsort(yi_l[rows])
            rows = rows[order]                  # yi = 1 .. p-2
            for E, e in ((self.Ey1, ey1), (self.Ey2, ey2)):
                E[rows, :] = 0.0
                E[np.ix_(rows, rows)] = e

        self.local_xy = np.column_stack([
            (gx.nodes - gx.a)[xi_l], (gy.nodes - gy.a)[yi_l]])


class EllipticDiscretization:
    """Per-leaf collocation blocks of ``A`` on a domain tree.

    Coefficient values are evaluated once per leaf and cached; for constant
    coefficients a single leaf's blocks serve the whole tree.
    """

    def __init__(self, tree, coeffs):
        if coeffs.dim != tree.dim:
            raise ValueError(f"operator is {coeffs.dim}D but tree is {tree.dim}D")
        self.tree = tree
        self.coeffs = coeffs
        self.stencil = LeafStencil(tree)
        self._val_cache = {}
        self._base_cache = {}
        # local-to-global map per leaf, interior block then boundary block
        self.leaf_gidx = np.hstack([tree.leaf_int_gidx, tree.leaf_bnd_gidx])

    def _leaf_key(self, leaf_id):
        return "const" if self.coeffs.is_constant else leaf_id

    def leaf_points(self, leaf_id):
        """Physical coordinates of one leaf's m local points."""
        node = self.tree.nodes[self.tree.leaves[leaf_id]]
        lo = np.array([node.box[d][0] for d in range(self.tree.dim)])
        return lo[None, :] + self.stencil.local_xy

    def leaf_values(self, leaf_id):
        key = self._leaf_key(leaf_id)
        if key not in self._val_cache:
            self._val_cache[key] = self.coeffs.evaluate(self.leaf_points(leaf_id))
        return self._val_cache[key]

    def leaf_interior_rows(self, leaf_id):
        """Rows of the collocated ``A`` at one leaf's interior points (ni x m)."""
        key = self._leaf_key(leaf_id)
        if key not in self._base_cache:
            st = self.stencil
            v = self.leaf_values(leaf_id)
            ii = slice(0, st.ni)
            rows = -v["c11"][ii, None] * st.D2x[ii]
            if self.tree.dim == 2:
                rows = rows - v["c22"][ii, None] * st.D2y[ii]
            if self.coeffs.c1 is not None:
                rows = rows + v["c1"][ii, None] * st.D1x[ii]
            if self.tree.dim == 2 and self.coeffs.c2 is not None:
                rows = rows + v["c2"][ii, None] * st.D1y[ii]
            if self.coeffs.c is not None:
                rows[:, :st.ni] += np.diag(v["c"][ii])
            self._base_cache[key] = rows
        return self._base_cache[key]

    def leaf_blocks(self, leaf_id):
        """(A_ii, A_ib) of one leaf in the local (J_i, J_b) ordering."""
        rows = self.leaf_interior_rows(leaf_id)
        return rows[:, :self.stencil.ni], rows[:, self.stencil.ni:]

    def apply_lop(self, u):
        """Apply ``L = -A`` to a global grid vector, leaf-locally.

        Interface values are the average of the two abutting leaves'
        evaluations; tangential derivatives at edge points use the edge's
        own nodes.  Accepts (N,) or (k, N) stacked fields.
        """
        st, tree = self.stencil, self.tree
        u = np.asarray(u, dtype=float)
        squeeze = u.ndim == 1
        U = np.atleast_2d(u)[:, self.leaf_gidx]       # (k, L, m)
        vals = np.stack([
            np.column_stack([self.leaf_values(l)[f] for f in
                             ("c11", "c22", "c1", "c2", "c")])
            for l in range(tree.leaf_count)])          # (L, m, 5)
        out = vals[..., 0] * (U @ st.Ex2.T)
        if tree.dim == 2:
            out = out + vals[..., 1] * (U @ st.Ey2.T)
        if self.coeffs.c1 is not None:
            out = out - vals[..., 2] * (U @ st.Ex1.T)
        if tree.dim == 2 and self.coeffs.c2 is not None:
            out = out - vals[..., 3] * (U @ st.Ey1.T)
        if self.coeffs.c is not None:
            out = out - vals[..., 4] * U
        res = _scatter_average(tree, self.leaf_gidx, out)
        return res[0] if squeeze else res

    def gradient(self, u):
        """Leaf-local spectral gradient with interface averaging.

        Returns ``(u_x,)`` in 1D or ``(u_x, u_y)`` in 2D, each shaped
        like ``u``.
        """
        st, tree = self.stencil, self.tree
        u = np.asarray(u, dtype=float)
        squeeze = u.ndim == 1
        U = np.atleast_2d(u)[:, self.leaf_gidx]
        ux = _scatter_average(tree, self.leaf_gidx, U @ st.Ex1.T)
        if tree.dim == 1:
            return (ux[0],) if squeeze else (ux,)
        uy = _scatter_average(tree, self.leaf_gidx, U @ st.Ey1.T)
        return (ux[0], uy[0]) if squeeze else (ux, uy)

    def flux_jump(self, u):
        """Interface flux jumps of a grid vector (lower side minus upper).

        Uses the same normal-derivative rows as the DtN operators; entries
        at non-interface DOFs are zero.  Accepts (N,) or (k, N).
        """
        st, tree = self.stencil, self.tree
        u = np.asarray(u, dtype=float)
        squeeze = u.ndim == 1
        U = np.atleast_2d(u)[:, self.leaf_gidx]
        v = U @ st.D_bnd.T                             # (k, L, nb)
        v = v * tree.leaf_bnd_sign[None, :, :]
        k = v.shape[0]
        out = np.zeros((k, tree.N))
        cols = tree.leaf_bnd_gidx.ravel()
        for i in range(k):
            out[i] = np.bincount(cols, weights=v[i].ravel(), minlength=tree.N)
        return out[0] if squeeze else out


def _scatter_average(tree, leaf_gidx, vals):
    """Average per-leaf values (k, L, m) onto the global grid."""
    k = vals.shape[0]
    out = np.empty((k, tree.N))
    cols = leaf_gidx.ravel()
    for i in range(k):
        out[i] = np.bincount(cols, weights=vals[i].ravel(), minlength=tree.N)
    return out / tree.multiplicity[None, :]


def leaf_matrix(disc, leaf_id):
    """Full local collocation matrix A of one leaf (m x m).

    Rows at interior points apply the operator; edge rows are identity
    placeholders (the solver consumes interior rows only).  Columns follow
    the local (J_i, J_b) ordering.
    """
    st = disc.stencil
    A = np.zeros((st.m, st.m))
    A[:st.ni] = disc.leaf_interior_rows(leaf_id)
    A[st.ni:, st.ni:] = np.eye(st.nb)
    return A


class GlobalSparse:
    """Sparse collocation system of the whole grid (the brute-force oracle).

    Row semantics by role: interior rows apply ``A``; interface rows are the
    flux-continuity difference (lower-side leaf trace minus upper-side) with
    zero right-hand side; domain-boundary rows are identity (Dirichlet).
    """

    def __init__(self, matrix, role, tree):
        self.matrix = matrix
        self.role = role
        self.tree = tree
        self._lu = None

    def build_rhs(self, boundary_values, interior_source=None,
                  interface_values=None):
        rhs = np.zeros(self.tree.N)
        bid = self.tree.boundary_ids
        rhs[bid] = np.asarray(boundary_values, dtype=float)
        if interior_source is not None:
            src = np.asarray(interior_source, dtype=float)
            mask = self.role == ROLE_INTERIOR
            rhs[mask] = src[mask] if src.shape == rhs.shape else src
        if interface_values is not None:
            iv = np.asarray(interface_values, dtype=float)
            mask = self.role == ROLE_INTERFACE
            rhs[mask] = iv[mask] if iv.shape == rhs.shape else iv
        return rhs

    def solve(self, rhs):
        if self._lu is None:
            self._lu = scipy.sparse.linalg.splu(self.matrix.tocsc())
        return self._lu.solve(np.asarray(rhs, dtype=float))


def assemble_global(tree, coeffs, disc=None):
    """Assemble the N x N sparse system for ``A`` on the tree."""
    if disc is None:
        disc = EllipticDiscretization(tree, coeffs)
    st = disc.stencil
    rows, cols, data = [], [], []
    for lid in range(tree.leaf_count):
        lg = disc.leaf_gidx[lid]
        a_rows = disc.leaf_interior_rows(lid)
        rows.append(np.repeat(lg[:st.ni], st.m))
        cols.append(np.tile(lg, st.ni))
        data.append(a_rows.ravel())
        # flux-continuity contributions of this leaf's interface points
        sign = tree.leaf_bnd_sign[lid]
        act = np.nonzero(sign != 0.0)[0]
        if act.size:
            d = sign[act, None] * st.D_bnd[act]
            rows.append(np.repeat(lg[st.ni + act], st.m))
            cols.append(np.tile(lg, act.size))
            data.append(d.ravel())
    bid = tree.boundary_ids
    rows.append(bid)
    cols.append(bid)
    data.append(np.ones(bid.size))
    mat = scipy.sparse.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(tree.N, tree.N)).tocsr()
    return GlobalSparse(matrix=mat, role=tree.role, tree=tree)
