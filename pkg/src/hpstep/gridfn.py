"""Grid functions: solution vectors on the global grid.

A :class:`GridFunction` wraps one or more components of nodal values,
restrictable to any tree node and interpolable off-grid (per-leaf
barycentric interpolation; the two corner-free edge rows of a 2D leaf are
interpolated from their p-2 available nodes).
"""

import numpy as np

from .chebyshev import barycentric_interpolate, lobatto_weights
from .errors import OutOfDomainError


class GridFunction:
    """Nodal values of shape (N,) or (ncomp, N) bound to a domain tree."""

    def __init__(self, tree, values):
        values = np.asarray(values, dtype=float)
        if values.shape[-1] != tree.N:
            raise ValueError(
                f"values must have trailing dimension {tree.N}, got {values.shape}")
        self.tree = tree
        self.values = values

    @property
    def ncomp(self):
        return 1 if self.values.ndim == 1 else self.values.shape[0]

    def restrict(self, node):
        """Values at a tree node's DOFs: (interior ids, boundary ids)."""
        tree = self.tree
        ids_i = tree.interior_ids(node) if not node.is_leaf else node.gidx_int
        return self.values[..., ids_i], self.values[..., node.gidx_bnd]

    def sample(self, points):
        """Interpolate at physical query points of shape (n, dim) or (n,)."""
        tree = self.tree
        pts = np.asarray(points, dtype=float)
        if tree.dim == 1:
            pts = pts.reshape(-1, 1)
        else:
            pts = np.atleast_2d(pts)
        lo = np.array([tree.bounds[d][0] for d in range(tree.dim)])
        hi = np.array([tree.bounds[d][1] for d in range(tree.dim)])
        eps = 1e-12 * (hi - lo).max()
        if np.any(pts < lo - eps) or np.any(pts > hi + eps):
            raise OutOfDomainError("query point outside the domain")
        pts = np.clip(pts, lo, hi)

        vv = np.atleast_2d(self.values)
        out = np.empty((vv.shape[0], pts.shape[0]))
        counts = (tree.n1,) if tree.dim == 1 else (tree.n1, tree.n2)
        widths = (hi - lo) / np.array(counts)
        cells = np.clip(((pts - lo) / widths).astype(int), 0,
                        np.array(counts) - 1)
        if tree.dim == 1:
            leaf_of = {tree.leaf_cell(tree.nodes[i])[0]: tree.nodes[i].leaf_id
                       for i in tree.leaves}
            keys = cells[:, 0]
            lids = np.array([leaf_of[k] for k in keys])
        else:
            leaf_of = {tree.leaf_cell(tree.nodes[i]): tree.nodes[i].leaf_id
                       for i in tree.leaves}
            lids = np.array([leaf_of[(a, b)] for a, b in cells])

        for lid in np.unique(lids):
            sel = lids == lid
            out[:, sel] = self._sample_leaf(lid, pts[sel], vv)
        return out[0] if self.values.ndim == 1 else out

    def _sample_leaf(self, lid, pts, vv):
        tree = self.tree
        node = tree.nodes[tree.leaves[lid]]
        p = tree.p
        gx = tree.leaf_gx
        xs = node.box[0][0] + (gx.nodes - gx.a)
        wts = lobatto_weights(p)
        if tree.dim == 1:
            loc = np.concatenate([node.gidx_int, node.gidx_bnd])
            # local order: interior x_1..x_{p-2}, then endpoints x_0, x_{p-1}
            order = np.r_[np.arange(1, p - 1), [0, p - 1]]
            vals = np.empty((vv.shape[0], p))
            vals[:, order] = vv[:, loc]
            return np.stack([
                barycentric_interpolate(xs, vals[k], pts[:, 0], weights=wts)
                for k in range(vv.shape[0])])

        gy = tree.leaf_gy
        ys = node.box[1][0] + (gy.nodes - gy.a)
        full = np.full((vv.shape[0], p, p), np.nan)
        xi, yi = np.meshgrid(np.arange(p), np.arange(p), indexing="ij")
        corner = ((xi == 0) | (xi == p - 1)) & ((yi == 0) | (yi == p - 1))
        interior = (xi >= 1) & (xi <= p - 2) & (yi >= 1) & (yi <= p - 2)
        edge = ~corner & ~interior
        full.reshape(vv.shape[0], -1)[:, interior.ravel()] = vv[:, node.gidx_int]
        full.reshape(vv.shape[0], -1)[:, edge.ravel()] = vv[:, node.gidx_bnd]

        nq = pts.shape[0]
        out = np.empty((vv.shape[0], nq))
        win = lobatto_weights(p)
        for k in range(vv.shape[0]):
            # pass 1: interpolate along x on every y-row (edge rows j=0, p-1
            # have p-2 values, interior rows have all p)
            rows = np.empty((p, nq))
            for j in range(p):
                if j in (0, p - 1):
                    rows[j] = barycentric_interpolate(
                        xs[1:p - 1], full[k, 1:p - 1, j], pts[:, 0])
                else:
                    rows[j] = barycentric_interpolate(
                        xs, full[k, :, j], pts[:, 0], weights=win)
            # pass 2: interpolate the row values along y at each query
            d = pts[:, 1][None, :] - ys[:, None]
            exact = np.abs(d) < 1e-14 * max(1.0, np.abs(ys).max())
            d = np.where(exact, 1.0, d)
            cmat = win[:, None] / d
            res = (cmat * rows).sum(axis=0) / cmat.sum(axis=0)
            hit = exact.any(axis=0)
            if np.any(hit):
                jhit = exact.argmax(axis=0)
                res[hit] = rows[jhit[hit], np.nonzero(hit)[0]]
            out[k] = res
        return out
