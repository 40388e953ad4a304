"""Hierarchical binary partition of a rectangle (or interval) into leaf boxes.

The domain is halved recursively (longest physical edge first, ties split x)
until it is covered by ``n1 x n2`` congruent leaf boxes, each carrying a
``p x p`` tensor Chebyshev grid.  The four corner points of every leaf are
excluded from the degree-of-freedom set; coincident edge nodes of adjacent
leaves are identified as a single global DOF.

Global numbering: leaf interiors first (contiguous per leaf, leaves in
depth-first traversal order), then one block of ``p - 2`` DOFs per unique
edge (vertical edges before horizontal ones, scan order).  In 1D the "edges"
degenerate to single interface/boundary vertices.
"""

from dataclasses import dataclass

import numpy as np

from .chebyshev import cheb_nodes
from .errors import InvalidGridError, TreeConsistencyError, UnsupportedPartitionError

# point roles in the global numbering
ROLE_INTERIOR = 0
ROLE_INTERFACE = 1
ROLE_BOUNDARY = 2


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


@dataclass
class TreeNode:
    """One node of the domain tree.

    Leaves carry their DOF index arrays directly; parents carry the merge
    partition ``(J1, J2, J3)`` of their children's boundaries plus the
    position maps needed to slice child operators.
    """

    index: int
    level: int
    cells: tuple                 # half-open box-index ranges (a0, a1[, b0, b1])
    box: tuple                   # physical ranges ((x0, x1)[, (y0, y1)])
    parent: int = None
    children: tuple = None       # (alpha, beta) node indices
    leaf_id: int = None
    gidx_int: np.ndarray = None  # leaves: interior DOF ids, local order
    gidx_bnd: np.ndarray = None  # all nodes: boundary DOF ids, local order
    j1: np.ndarray = None        # parents: ids on alpha's boundary only
    j2: np.ndarray = None        # parents: ids on beta's boundary only
    j3: np.ndarray = None        # parents: shared interface ids
    i1a: np.ndarray = None       # positions of J1 within alpha.gidx_bnd
    i3a: np.ndarray = None       # positions of J3 within alpha.gidx_bnd
    i2b: np.ndarray = None       # positions of J2 within beta.gidx_bnd
    i3b: np.ndarray = None       # positions of J3 within beta.gidx_bnd

    @property
    def is_leaf(self):
        return self.children is None


@dataclass
class LeafPointClasses:
    """Index sets of one leaf's tensor grid (flat index ``i*p + j``)."""

    interior: np.ndarray
    edge: np.ndarray
    corner: np.ndarray          # excluded from the DOF set


class DomainTree:
    """Binary tree of subdomains with global DOF numbering.

    Parameters
    ----------
    bounds : ((x0, x1), (y0, y1)) in 2D or (x0, x1) in 1D
    n1, n2 : leaf counts per direction, powers of two (``n2=None`` in 1D)
    p : Chebyshev order per leaf direction, at least 4
    """

    def __init__(self, bounds, n1, n2, p):
        if p < 4:
            raise InvalidGridError(f"leaf order must be at least 4, got p={p}")
        bounds = tuple(bounds)
        if np.isscalar(bounds[0]):
            self.dim = 1
            bounds = (tuple(float(v) for v in bounds),)
        else:
            self.dim = 2
            bounds = tuple(tuple(float(v) for v in b) for b in bounds)
        if self.dim == 1 and n2 is not None:
            raise UnsupportedPartitionError("n2 must be omitted for 1D domains")
        if self.dim == 2 and n2 is None:
            raise UnsupportedPartitionError("n2 is required for 2D domains")
        if not _is_pow2(n1) or (self.dim == 2 and not _is_pow2(n2)):
            raise UnsupportedPartitionError(
                f"leaf counts must be powers of two, got n1={n1}, n2={n2}")
        self.bounds = bounds
        self.n1 = n1
        self.n2 = n2 if self.dim == 2 else None
        self.p = p

        self._build_numbering()
        self.nodes = []
        self.levels = []
        self.leaves = []
        root_cells = (0, n1) if self.dim == 1 else (0, n1, 0, self.n2)
        self._grow(root_cells, level=0, parent=None)
        self.leaf_count = len(self.leaves)
        self.level_count = len(self.levels)

    # -- construction ------------------------------------------------------

    def _leaf_widths(self):
        (x0, x1) = self.bounds[0]
        wx = (x1 - x0) / self.n1
        if self.dim == 1:
            return (wx,)
        (y0, y1) = self.bounds[1]
        return (wx, (y1 - y0) / self.n2)

    def _build_numbering(self):
        p = self.p
        self.ni = (p - 2) ** self.dim        # interior DOFs per leaf
        self.nb = 2 if self.dim == 1 else 4 * (p - 2)
        nleaf = self.n1 * (self.n2 if self.dim == 2 else 1)
        self._int_base = 0
        self._edge_base = nleaf * self.ni
        if self.dim == 1:
            self.N = nleaf * self.ni + (self.n1 + 1)
        else:
            nedges = (self.n1 + 1) * self.n2 + self.n1 * (self.n2 + 1)
            self.N = nleaf * self.ni + nedges * (p - 2)

        # reference 1D grids of one leaf (translated per leaf when needed)
        widths = self._leaf_widths()
        self.leaf_gx = cheb_nodes(p, (0.0, widths[0]))
        if self.dim == 2:
            self.leaf_gy = cheb_nodes(p, (0.0, widths[1]))

        self.points = np.zeros((self.N, self.dim))
        self.role = np.full(self.N, ROLE_INTERIOR, dtype=np.int8)
        self.multiplicity = np.zeros(self.N, dtype=np.int32)

    def _vedge_ids(self, i, j):
        """Global DOF ids of vertical edge (i, j), descending y order."""
        p = self.p
        base = self._edge_base + (i * self.n2 + j) * (p - 2)
        return base + np.arange(p - 2)

    def _hedge_ids(self, i, j):
        """Global DOF ids of horizontal edge (i, j), descending x order."""
        p = self.p
        base = self._edge_base + ((self.n1 + 1) * self.n2 + i * (self.n2 + 1) + j) * (p - 2)
        return base + np.arange(p - 2)

    def _vertex_id(self, i):
        return self._edge_base + i

    def _grow(self, cells, level, parent):
        idx = len(self.nodes)
        node = TreeNode(index=idx, level=level, cells=cells,
                        box=self._cells_to_box(cells), parent=parent)
        self.nodes.append(node)
        if len(self.levels) <= level:
            self.levels.append([])
        self.levels[level].append(idx)

        extent = (cells[1] - cells[0],) if self.dim == 1 else \
                 (cells[1] - cells[0], cells[3] - cells[2])
        if all(e == 1 for e in extent):
            self._init_leaf(node)
            return idx

        a = self._split_children(cells)
        ia = self._grow(a[0], level + 1, idx)
        ib = self._grow(a[1], level + 1, idx)
        node.children = (ia, ib)
        self._init_parent(node)
        return idx

    def _split_children(self, cells):
        """Halve the box, longest physical edge first (ties split x).

        alpha is always the lower-coordinate half.
        """
        if self.dim == 1:
            a0, a1 = cells
            mid = (a0 + a1) // 2
            return (a0, mid), (mid, a1)
        a0, a1, b0, b1 = cells
        wx, wy = self._leaf_widths()
        len_x = (a1 - a0) * wx
        len_y = (b1 - b0) * wy
        split_x = len_x >= len_y
        if a1 - a0 == 1:
            split_x = False
        elif b1 - b0 == 1:
            split_x = True
        if split_x:
            mid = (a0 + a1) // 2
            return (a0, mid, b0, b1), (mid, a1, b0, b1)
        mid = (b0 + b1) // 2
        return (a0, a1, b0, mid), (a0, a1, mid, b1)

    def _cells_to_box(self, cells):
        widths = self._leaf_widths()
        x0 = self.bounds[0][0]
        if self.dim == 1:
            return ((x0 + cells[0] * widths[0], x0 + cells[1] * widths[0]),)
        y0 = self.bounds[1][0]
        return ((x0 + cells[0] * widths[0], x0 + cells[1] * widths[0]),
                (y0 + cells[2] * widths[1], y0 + cells[3] * widths[1]))

    def _init_leaf(self, node):
        p = self.p
        node.leaf_id = len(self.leaves)
        self.leaves.append(node.index)
        base = self._int_base + node.leaf_id * self.ni
        node.gidx_int = base + np.arange(self.ni)

        if self.dim == 1:
            a = node.cells[0]
            node.gidx_bnd = np.array([self._vertex_id(a + 1), self._vertex_id(a)])
            x0 = node.box[0][0]
            xs = x0 + (self.leaf_gx.nodes - self.leaf_gx.a)
            self.points[node.gidx_int, 0] = xs[1:-1]
            self.points[node.gidx_bnd, 0] = xs[[0, -1]]
        else:
            a, b = node.cells[0], node.cells[2]
            east = self._vedge_ids(a + 1, b)
            west = self._vedge_ids(a, b)
            north = self._hedge_ids(a, b + 1)
            south = self._hedge_ids(a, b)
            # boundary ids in local tensor order: i = 0 (east edge, y desc),
            # then i = 1..p-2 interleaving (north, south), then i = p-1 (west)
            bnd = [east]
            for i in range(1, p - 1):
                bnd.append(north[i - 1:i])
                bnd.append(south[i - 1:i])
            bnd.append(west)
            node.gidx_bnd = np.concatenate(bnd)

            xs = node.box[0][0] + (self.leaf_gx.nodes - self.leaf_gx.a)
            ys = node.box[1][0] + (self.leaf_gy.nodes - self.leaf_gy.a)
            xi, yi = np.meshgrid(np.arange(p), np.arange(p), indexing="ij")
            corner = ((xi == 0) | (xi == p - 1)) & ((yi == 0) | (yi == p - 1))
            interior = (xi >= 1) & (xi <= p - 2) & (yi >= 1) & (yi <= p - 2)
            edge = ~corner & ~interior
            pts = np.column_stack([xs[xi.ravel()], ys[yi.ravel()]])
            self.points[node.gidx_int] = pts[interior.ravel()]
            self.points[node.gidx_bnd] = pts[edge.ravel()]

        self.multiplicity[node.gidx_int] += 1
        self.multiplicity[node.gidx_bnd] += 1

    def _init_parent(self, node):
        alpha = self.nodes[node.children[0]]
        beta = self.nodes[node.children[1]]
        shared = np.intersect1d(alpha.gidx_bnd, beta.gidx_bnd)
        exp = self._expected_interface(node)
        if shared.size != exp:
            raise TreeConsistencyError(
                f"node {node.index}: children share {shared.size} boundary "
                f"DOFs, expected {exp}")
        node.j3 = shared
        in3a = np.isin(alpha.gidx_bnd, shared)
        in3b = np.isin(beta.gidx_bnd, shared)
        node.i1a = np.nonzero(~in3a)[0]
        node.i2b = np.nonzero(~in3b)[0]
        # positions of the sorted J3 ids within each child's boundary order,
        # i.e. child.gidx_bnd[i3] == node.j3
        pos_a = np.nonzero(in3a)[0]
        pos_b = np.nonzero(in3b)[0]
        node.i3a = pos_a[np.argsort(alpha.gidx_bnd[pos_a])]
        node.i3b = pos_b[np.argsort(beta.gidx_bnd[pos_b])]
        node.j1 = alpha.gidx_bnd[node.i1a]
        node.j2 = beta.gidx_bnd[node.i2b]
        node.gidx_bnd = np.concatenate([node.j1, node.j2])

    def _expected_interface(self, node):
        if self.dim == 1:
            return 1
        ca = self.nodes[node.children[0]].cells
        if ca[1] != node.cells[1]:     # x-split: vertical interface
            return (node.cells[3] - node.cells[2]) * (self.p - 2)
        return (node.cells[1] - node.cells[0]) * (self.p - 2)

    # -- queries -----------------------------------------------------------

    @property
    def root(self):
        return self.nodes[0]

    def interior_ids(self, node):
        """All DOF ids strictly inside ``node`` (leaf interiors + interfaces)."""
        if node.is_leaf:
            return node.gidx_int
        alpha, beta = (self.nodes[c] for c in node.children)
        return np.concatenate([self.interior_ids(alpha),
                               self.interior_ids(beta), node.j3])

    def classify_leaf_points(self, node):
        """Interior/edge/corner split of one leaf's full tensor grid."""
        if not node.is_leaf:
            raise TreeConsistencyError(f"node {node.index} is not a leaf")
        p = self.p
        if self.dim == 1:
            t = np.arange(p)
            return LeafPointClasses(interior=t[1:-1],
                                    edge=np.array([0, p - 1]),
                                    corner=np.array([], dtype=int))
        xi, yi = np.meshgrid(np.arange(p), np.arange(p), indexing="ij")
        corner = ((xi == 0) | (xi == p - 1)) & ((yi == 0) | (yi == p - 1))
        interior = (xi >= 1) & (xi <= p - 2) & (yi >= 1) & (yi <= p - 2)
        edge = ~corner & ~interior
        t = np.arange(p * p)
        return LeafPointClasses(interior=t[interior.ravel()],
                                edge=t[edge.ravel()],
                                corner=t[corner.ravel()])

    def interface_sets(self, node):
        """The merge partition (J1, J2, J3) of a parent node."""
        if node.is_leaf:
            raise TreeConsistencyError(f"node {node.index} is a leaf")
        return node.j1, node.j2, node.j3

    def leaf_cell(self, node):
        """Box indices (a[, b]) of a leaf."""
        return (node.cells[0],) if self.dim == 1 else (node.cells[0], node.cells[2])

    def describe(self):
        """Structured text summary (consumed by the CLI ``describe`` command)."""
        if self.dim == 1:
            head = (f"DomainTree 1D on [{self.bounds[0][0]:g}, {self.bounds[0][1]:g}]"
                    f", n1={self.n1}, p={self.p}")
        else:
            head = (f"DomainTree 2D on [{self.bounds[0][0]:g}, {self.bounds[0][1]:g}]"
                    f" x [{self.bounds[1][0]:g}, {self.bounds[1][1]:g}]"
                    f", n1={self.n1}, n2={self.n2}, p={self.p}")
        lines = [head]
        n_int = int(np.sum(self.role == ROLE_INTERIOR))
        n_if = int(np.sum(self.role == ROLE_INTERFACE))
        n_bc = int(np.sum(self.role == ROLE_BOUNDARY))
        lines.append(f"N = {self.N} DOFs: {n_int} interior, {n_if} interface, "
                     f"{n_bc} boundary (leaf corners excluded)")
        lines.append(f"leaves = {self.leaf_count}, levels = {self.level_count}, "
                     f"interfaces = {self.leaf_count - 1}")
        for lvl, idxs in enumerate(self.levels):
            nleaf = sum(1 for i in idxs if self.nodes[i].is_leaf)
            tag = f", {nleaf} leaf" if nleaf else ""
            lines.append(f"  level {lvl}: {len(idxs)} node(s){tag}")
        return "\n".join(lines)


def _finalize_roles(tree):
    """Mark edge/vertex DOF roles and fix multiplicities."""
    if tree.dim == 1:
        for i in range(tree.n1 + 1):
            gid = tree._vertex_id(i)
            tree.role[gid] = ROLE_BOUNDARY if i in (0, tree.n1) else ROLE_INTERFACE
    else:
        for i in range(tree.n1 + 1):
            for j in range(tree.n2):
                ids = tree._vedge_ids(i, j)
                tree.role[ids] = ROLE_BOUNDARY if i in (0, tree.n1) else ROLE_INTERFACE
        for i in range(tree.n1):
            for j in range(tree.n2 + 1):
                ids = tree._hedge_ids(i, j)
                tree.role[ids] = ROLE_BOUNDARY if j in (0, tree.n2) else ROLE_INTERFACE


def build_tree(bounds, n1, n2=None, p=8):
    """Build the domain tree with global numbering (see module docstring)."""
    tree = DomainTree(bounds, n1, n2, p)
    _finalize_roles(tree)
    tree.boundary_ids = np.nonzero(tree.role == ROLE_BOUNDARY)[0]
    tree.interface_ids = np.nonzero(tree.role == ROLE_INTERFACE)[0]
    tree.free_ids = np.nonzero(tree.role != ROLE_BOUNDARY)[0]

    # stacked per-leaf index maps used by the vectorized solver paths
    L = tree.leaf_count
    tree.leaf_int_gidx = np.empty((L, tree.ni), dtype=np.int64)
    tree.leaf_bnd_gidx = np.empty((L, tree.nb), dtype=np.int64)
    tree.leaf_bnd_sign = np.zeros((L, tree.nb))
    for node_idx in tree.leaves:
        node = tree.nodes[node_idx]
        lid = node.leaf_id
        tree.leaf_int_gidx[lid] = node.gidx_int
        tree.leaf_bnd_gidx[lid] = node.gidx_bnd
        iface = tree.role[node.gidx_bnd] == ROLE_INTERFACE
        # +1 where this leaf is the lower-coordinate side of the shared edge
        sign = np.zeros(tree.nb)
        if tree.dim == 1:
            sign[:] = [1.0, -1.0]
        else:
            p = tree.p
            sign[0:p - 2] = 1.0                       # east edge
            sign[p - 2:3 * (p - 2):2] = 1.0           # north points
            sign[p - 2 + 1:3 * (p - 2):2] = -1.0      # south points
            sign[3 * (p - 2):] = -1.0                 # west edge
        tree.leaf_bnd_sign[lid] = np.where(iface, sign, 0.0)
    return tree
