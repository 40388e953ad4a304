"""Hierarchical Poincare-Steklov build and solve stages.

Build: per-leaf solution operators ``S = -A_ii^{-1} A_ib`` and
Dirichlet-to-Neumann maps ``T = D S``-style, merged upward through the tree
by Schur complements of the shared-interface blocks:

    S = (T_a33 - T_b33)^{-1} [-T_a31 | T_b32]
    T = blkdiag(T_a11, T_b22) + [T_a13; T_b23] S

Fluxes are coordinate-signed (d/dx on vertical edges, d/dy on horizontal),
so the interface condition is a plain difference of the two children's
values.  Body loads are handled by an upward pass of per-leaf particular
solutions with zero trace whose interface flux mismatches are absorbed at
each merge, followed by the standard downward sweep.

The whole operator set is built for one shifted operator
``sigma*I - dt_gamma*L`` and is reusable for unlimited solves.
"""

import hashlib
import os
import pickle

import numpy as np

from .errors import HpstepError, InvalidStepError
from .linalg import DenseFactorization
from .operators import EllipticDiscretization

FORMAT_VERSION = 1


class LeafOperators:
    """Solution/DtN operators of one leaf (views into the stacked arrays)."""

    def __init__(self, S, T, Aii_factor, D_edge):
        self.S = S                    # (ni, nb) interior <- boundary
        self.T = T                    # (nb, nb) flux <- boundary
        self.Aii_factor = Aii_factor  # retained for body loads
        self.D_edge = D_edge          # (nb, ni+nb) flux extraction rows


class MergeOperators:
    """Interface operators of one parent node."""

    def __init__(self, S, X33_factor, Tstack, T=None):
        self.S = S                    # (|J3|, |J1|+|J2|)
        self.X33_factor = X33_factor  # factor of (T_a33 - T_b33)
        self.Tstack = Tstack          # [T_a13; T_b23], maps interface -> outer flux
        self.T = T                    # outer DtN, retained only on request


def build_leaf(disc, leaf_id, sigma=0.0, dt_gamma=1.0):
    """Leaf operators of the shifted operator ``sigma*I + dt_gamma*A``."""
    st = disc.stencil
    A_ii, A_ib = disc.leaf_blocks(leaf_id)
    A_ii = sigma * np.eye(st.ni) + dt_gamma * A_ii
    A_ib = dt_gamma * A_ib
    node = disc.tree.nodes[disc.tree.leaves[leaf_id]]
    fac = DenseFactorization(A_ii, context=f"leaf node {node.index}")
    S = -fac.solve(A_ib)
    D_bi, D_bb = st.D_bnd[:, :st.ni], st.D_bnd[:, st.ni:]
    T = D_bi @ S + D_bb
    return LeafOperators(S=S, T=T, Aii_factor=fac, D_edge=st.D_bnd)


def merge(T_alpha, T_beta, node):
    """Merge two children's DtN operators across their shared interface."""
    i1a, i3a = node.i1a, node.i3a
    i2b, i3b = node.i2b, node.i3b
    X33 = T_alpha[np.ix_(i3a, i3a)] - T_beta[np.ix_(i3b, i3b)]
    fac = DenseFactorization(X33, context=f"merge node {node.index}")
    rhs = np.hstack([-T_alpha[np.ix_(i3a, i1a)], T_beta[np.ix_(i3b, i2b)]])
    S = fac.solve(rhs)
    Tstack = np.vstack([T_alpha[np.ix_(i1a, i3a)], T_beta[np.ix_(i2b, i3b)]])
    n1, n2 = i1a.size, i2b.size
    T = np.zeros((n1 + n2, n1 + n2))
    T[:n1, :n1] = T_alpha[np.ix_(i1a, i1a)]
    T[n1:, n1:] = T_beta[np.ix_(i2b, i2b)]
    T += Tstack @ S
    return MergeOperators(S=S, X33_factor=fac, Tstack=Tstack, T=T)


class HpsOperatorSet:
    """Per-node operators for one shifted elliptic operator.

    Read-only after construction; any number of concurrent solves may share
    one instance.
    """

    def __init__(self, disc, sigma, dt_gamma, keep_dtn=False, threads=None):
        self.disc = disc
        self.tree = disc.tree
        self.sigma = float(sigma)
        self.dt_gamma = float(dt_gamma)
        self.keep_dtn = keep_dtn
        tree = self.tree
        st = disc.stencil
        self.D_bi = st.D_bnd[:, :st.ni]
        self._build(threads)

    @property
    def shift(self):
        """The dt*gamma value the operator set realizes (with sigma weight)."""
        return self.dt_gamma

    def _build(self, threads):
        tree, disc = self.tree, self.disc
        L = tree.leaf_count
        nthreads = threads if threads is not None else _env_threads()

        if disc.coeffs.is_constant:
            leaf0 = build_leaf(disc, 0, self.sigma, self.dt_gamma)
            self.S_leaf = np.broadcast_to(leaf0.S, (L,) + leaf0.S.shape)
            self.T_leaf = np.broadcast_to(leaf0.T, (L,) + leaf0.T.shape)
            self.leaf_factors = [leaf0.Aii_factor] * L
            self._shared_leaf_factor = leaf0.Aii_factor
        else:
            ops = _parallel_map(lambda l: build_leaf(disc, l, self.sigma,
                                                     self.dt_gamma),
                                range(L), nthreads)
            self.S_leaf = np.stack([o.S for o in ops])
            self.T_leaf = np.stack([o.T for o in ops])
            self.leaf_factors = [o.Aii_factor for o in ops]
            self._shared_leaf_factor = None

        # upward merges, level-synchronized
        self.merges = {}
        transient_T = {}

        def T_of(node_idx):
            node = tree.nodes[node_idx]
            if node.is_leaf:
                return self.T_leaf[node.leaf_id]
            return transient_T[node_idx]

        for level in range(tree.level_count - 2, -1, -1):
            parents = [i for i in tree.levels[level]
                       if not tree.nodes[i].is_leaf]

            def do_merge(idx):
                node = tree.nodes[idx]
                return idx, merge(T_of(node.children[0]),
                                  T_of(node.children[1]), node)

            for idx, mo in _parallel_map(do_merge, parents, nthreads):
                node = tree.nodes[idx]
                transient_T[idx] = mo.T
                if not self.keep_dtn and idx != 0:
                    mo.T = None
                self.merges[idx] = mo
                for c in node.children:
                    if not tree.nodes[c].is_leaf and not self.keep_dtn:
                        transient_T.pop(c, None)
        self.root_T = transient_T.get(0)
        # parents ordered root-first for the downward sweep
        self.parent_order = [i for lvl in tree.levels for i in lvl
                             if not tree.nodes[i].is_leaf]

    # -- solves ------------------------------------------------------------

    def _boundary_values(self, f):
        tree = self.tree
        f = np.asarray(f, dtype=float)
        nbd = tree.boundary_ids.size
        if f.ndim == 0:
            return np.full((1, nbd), float(f))
        if f.shape[-1] == tree.N:
            return np.atleast_2d(f)[:, tree.boundary_ids]
        if f.shape[-1] == nbd:
            return np.atleast_2d(f)
        raise ValueError(
            f"boundary data must have trailing size {nbd} or {tree.N}, "
            f"got {f.shape}")

    def solve_homogeneous(self, f):
        """Downward sweep with boundary data only (no body load)."""
        return self._solve(f, None, None, None)

    def solve_with_body_load(self, f, g):
        """Solve with boundary data ``f`` and interior source ``g``.

        ``g`` is read at leaf-interior DOFs of a full grid vector; interface
        continuity equations keep zero right-hand side.
        """
        return self._solve(f, g, None, None)

    def solve_penalized(self, f, g, flux_jump, dt):
        """Body-load solve with flux-jump penalization on interface rows.

        ``flux_jump`` holds the current solution's interface flux jumps
        (lower side minus upper side, as produced by
        ``EllipticDiscretization.flux_jump``); each interface equation is
        modified so the new solution's flux jump cancels the inherited one
        at rate ``1/dt``.
        """
        if dt <= 0:
            raise InvalidStepError(f"time step must be positive, got {dt}")
        return self._solve(f, g, flux_jump, 1.0 / dt)

    def _solve(self, f, g, flux_jump, inv_dt):
        tree = self.tree
        ni, nb = self.disc.stencil.ni, self.disc.stencil.nb
        L = tree.leaf_count
        fb = self._boundary_values(f)
        k = fb.shape[0]
        squeeze = (np.asarray(f).ndim <= 1) if g is None else \
            (np.asarray(g).ndim == 1)
        if g is not None:
            G = np.atleast_2d(np.asarray(g, dtype=float))
            k = max(k, G.shape[0])
            if fb.shape[0] == 1 and k > 1:
                fb = np.broadcast_to(fb, (k, fb.shape[1]))

        # upward pass: particular solutions and their interface corrections
        w = None
        h_node = {}
        w3 = {}
        if g is not None:
            gl = G[:, tree.leaf_int_gidx]                    # (k, L, ni)
            if self._shared_leaf_factor is not None:
                w = self._shared_leaf_factor.solve(
                    gl.reshape(k * L, ni).T).T.reshape(k, L, ni)
            else:
                w = np.empty((k, L, ni))
                for l in range(L):
                    w[:, l, :] = self.leaf_factors[l].solve(gl[:, l, :].T).T
            h_leaf = np.einsum("bn,kln->klb", self.D_bi, w)  # (k, L, nb)
        elif flux_jump is not None:
            h_leaf = np.zeros((k, L, nb))

        if g is not None or flux_jump is not None:
            jump = None
            if flux_jump is not None:
                jump = np.atleast_2d(np.asarray(flux_jump, dtype=float))

            def h_of(node_idx):
                node = tree.nodes[node_idx]
                if node.is_leaf:
                    return h_leaf[:, node.leaf_id, :]
                return h_node[node_idx]

            for idx in reversed(self.parent_order):
                node = tree.nodes[idx]
                mo = self.merges[idx]
                ha = h_of(node.children[0])
                hb = h_of(node.children[1])
                r3 = hb[:, node.i3b] - ha[:, node.i3a]
                if jump is not None:
                    r3 = r3 - inv_dt * jump[:, node.j3]
                w3[idx] = mo.X33_factor.solve(r3.T).T
                h_node[idx] = np.concatenate(
                    [ha[:, node.i1a], hb[:, node.i2b]], axis=1) \
                    + w3[idx] @ mo.Tstack.T
                for cidx in node.children:
                    h_node.pop(cidx, None)

        # downward pass
        u = np.zeros((k, tree.N))
        u[:, tree.boundary_ids] = fb
        for idx in self.parent_order:
            node = tree.nodes[idx]
            mo = self.merges[idx]
            vals = u[:, node.gidx_bnd]
            u3 = vals @ mo.S.T
            if idx in w3:
                u3 = u3 + w3[idx]
            u[:, node.j3] = u3
        ub = u[:, tree.leaf_bnd_gidx]                        # (k, L, nb)
        ui = np.einsum("lib,klb->kli", self.S_leaf, ub)
        if w is not None:
            ui = ui + w
        kk, _, _ = ui.shape
        for i in range(kk):
            u[i, tree.leaf_int_gidx.ravel()] = ui[i].ravel()
        return u[0] if squeeze else u

    # -- persistence -------------------------------------------------------

    def header(self):
        tree = self.tree
        return {
            "version": FORMAT_VERSION,
            "dim": tree.dim,
            "bounds": tree.bounds,
            "n1": tree.n1,
            "n2": tree.n2,
            "p": tree.p,
            "sigma": self.sigma,
            "dt_gamma": self.dt_gamma,
            "coeff_hash": coefficient_hash(self.disc),
        }

    def save(self, path):
        """Binary dump so repeated runs can skip the build stage."""
        payload = {
            "header": self.header(),
            "S_leaf": np.ascontiguousarray(self.S_leaf),
            "leaf_factors": self.leaf_factors,
            "merges": {
                idx: (mo.S, mo.X33_factor, mo.Tstack)
                for idx, mo in self.merges.items()
            },
            "root_T": self.root_T,
        }
        with open(path, "wb") as fh:
            pickle.dump(payload, fh, protocol=pickle.HIGHEST_PROTOCOL)

    @classmethod
    def load(cls, path, disc, sigma, dt_gamma):
        """Load a dumped operator set, validating the versioned header."""
        with open(path, "rb") as fh:
            payload = pickle.load(fh)
        obj = cls.__new__(cls)
        obj.disc = disc
        obj.tree = disc.tree
        obj.sigma = float(sigma)
        obj.dt_gamma = float(dt_gamma)
        obj.keep_dtn = False
        head = payload["header"]
        if head != obj.header():
            raise HpstepError(
                "operator dump does not match the requested configuration "
                f"(dump header {head})")
        st = disc.stencil
        obj.D_bi = st.D_bnd[:, :st.ni]
        obj.S_leaf = payload["S_leaf"]
        obj.leaf_factors = payload["leaf_factors"]
        obj._shared_leaf_factor = (obj.leaf_factors[0]
                                   if disc.coeffs.is_constant else None)
        obj.T_leaf = None
        obj.merges = {idx: MergeOperators(S=S, X33_factor=fac, Tstack=Tk)
                      for idx, (S, fac, Tk) in payload["merges"].items()}
        obj.root_T = payload["root_T"]
        obj.parent_order = [i for lvl in obj.tree.levels for i in lvl
                            if not obj.tree.nodes[i].is_leaf]
        return obj

    def leaf_operators(self, leaf_id):
        """Per-leaf operator view (mainly for tests and diagnostics)."""
        return LeafOperators(S=self.S_leaf[leaf_id],
                             T=None if self.T_leaf is None
                             else self.T_leaf[leaf_id],
                             Aii_factor=self.leaf_factors[leaf_id],
                             D_edge=self.disc.stencil.D_bnd)

    def merge_operators(self, node_index):
        return self.merges[node_index]


def coefficient_hash(disc):
    """Hash of coefficient samples, identifying the operator in dumps."""
    samples = [disc.coeffs.evaluate(disc.leaf_points(0))]
    if disc.tree.leaf_count > 1:
        samples.append(disc.coeffs.evaluate(
            disc.leaf_points(disc.tree.leaf_count - 1)))
    hasher = hashlib.sha256()
    for s in samples:
        for key in sorted(s):
            hasher.update(np.ascontiguousarray(s[key]).tobytes())
    return hasher.hexdigest()


def _env_threads():
    try:
        return max(1, int(os.environ.get("HPSTEP_NUM_THREADS", "1")))
    except ValueError:
        return 1


def _parallel_map(fn, items, nthreads):
    items = list(items)
    if nthreads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=nthreads) as pool:
        return list(pool.map(fn, items))


def build(tree, coeffs, sigma=0.0, dt_gamma=1.0, disc=None, keep_dtn=False,
          threads=None):
    """Build the full HPS operator set for ``sigma*I - dt_gamma*L``.

    ``coeffs`` holds the elliptic form ``A = -L``; passing an existing
    discretization reuses its cached per-leaf collocation blocks.
    """
    if disc is None:
        disc = EllipticDiscretization(tree, coeffs)
    return HpsOperatorSet(disc, sigma=sigma, dt_gamma=dt_gamma,
                          keep_dtn=keep_dtn, threads=threads)
