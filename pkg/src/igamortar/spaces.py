"""Constrained discrete spaces on a multipatch domain.

Builds, for a given degree, the per-patch tensor field spaces and the linear
reduction from the product of all patch coefficient spaces to the conforming
space: clamped boundary layers, strong C0 gluing of interface traces, and
(optionally) full second-order jet equality at the patch vertices. Also
constructs the interface trace-derivative space and the multiplier spaces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .bspline import (
    SplineSpace1D,
    make_knot_vector,
    merge_end_elements,
    open_spline_space,
)
from .errors import ConfigError, DegreeTooLowError
from .geometry import TensorSpace2D, eval_geometry
from .topology import MultiPatchTopology, side_breakpoints

_RANK_TOL = 1e-10   # relative pivot threshold for constraint elimination


def build_field_spaces(topology: MultiPatchTopology, degree: int) -> list[TensorSpace2D]:
    """Degree-p maximally smooth field space on each patch's mesh."""
    if degree < 2:
        raise DegreeTooLowError("field spaces need degree >= 2")
    spaces = []
    for patch in topology.patches:
        su = open_spline_space(degree, patch.space.space_u.breakpoints[1:-1])
        sv = open_spline_space(degree, patch.space.space_v.breakpoints[1:-1])
        spaces.append(TensorSpace2D(su, sv))
    return spaces


class DofMap:
    """Flat numbering of the product space over all patches."""

    def __init__(self, spaces):
        self.spaces = list(spaces)
        sizes = [s.num_dofs for s in self.spaces]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)])
        self.total = int(self.offsets[-1])

    def flat(self, k: int, i: int, j: int) -> int:
        return int(self.offsets[k] + self.spaces[k].flat_index(i, j))

    def patch_slice(self, k: int) -> slice:
        return slice(int(self.offsets[k]), int(self.offsets[k + 1]))


def side_dof_indices(shape: tuple[int, int], side: str, layer: int):
    """(i, j) pairs of the DOF layer at the given offset from a side,
    ordered along the side's running parameter."""
    n1, n2 = shape
    if side == "west":
        return [(layer, j) for j in range(n2)]
    if side == "east":
        return [(n1 - 1 - layer, j) for j in range(n2)]
    if side == "south":
        return [(i, layer) for i in range(n1)]
    if side == "north":
        return [(i, n2 - 1 - layer) for i in range(n1)]
    raise ValueError(side)


def clamp_boundary(space: TensorSpace2D, sides) -> set[int]:
    """Patch-local flat indices of the two control layers adjacent to each
    clamped side (value layer and normal-derivative layer)."""
    fixed: set[int] = set()
    for side in sides:
        for layer in (0, 1):
            for i, j in side_dof_indices(space.shape, side, layer):
                fixed.add(space.flat_index(i, j))
    return fixed


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def glue_c0(topology: MultiPatchTopology, spaces, dofmap: DofMap) -> _UnionFind:
    """Identify the interface value layers across every interface.

    Conforming traces have identical 1D spline expansions, so gluing pairs
    the layer-0 DOFs in side order (reversed order when the secondary side
    runs backwards)."""
    uf = _UnionFind(dofmap.total)
    for iface in topology.interfaces:
        kp, sp_ = iface.primary
        ks, ss = iface.secondary
        prim = side_dof_indices(spaces[kp].shape, sp_, 0)
        sec = side_dof_indices(spaces[ks].shape, ss, 0)
        if len(prim) != len(sec):
            raise ConfigError(
                f"interface {iface.index}: trace dimensions differ "
                f"({len(prim)} vs {len(sec)})"
            )
        if iface.reversed:
            sec = sec[::-1]
        for (ip, jp), (is_, js) in zip(prim, sec):
            uf.union(dofmap.flat(kp, ip, jp), dofmap.flat(ks, is_, js))
    return uf


def physical_jet_rows(patch, space: TensorSpace2D, u: float, v: float):
    """Rows of (value, grad_x, grad_y, H_xx, H_xy, H_yy) at a parametric
    point as linear functionals of the patch's DOFs.

    Returns (rows (6, m), patch-local flat DOF indices (m,)).
    """
    su, sv = space.space_u, space.space_v
    bu = su.eval_basis(u, max_deriv=2)
    bv = sv.eval_basis(v, max_deriv=2)
    p1, p2 = su.degree + 1, sv.degree + 1
    Bu = np.vstack([bu.values, bu.derivatives])
    Bv = np.vstack([bv.values, bv.derivatives])

    def tensor(a, b):
        return np.outer(Bu[a], Bv[b]).ravel()

    val = tensor(0, 0)
    ghat = np.stack([tensor(1, 0), tensor(0, 1)])
    Hhat = np.empty((2, 2, p1 * p2))
    Hhat[0, 0] = tensor(2, 0)
    Hhat[0, 1] = Hhat[1, 0] = tensor(1, 1)
    Hhat[1, 1] = tensor(0, 2)

    jet = eval_geometry(patch, u, v)
    inv = jet.inv_jacobian
    g = inv.T @ ghat
    M = Hhat - np.einsum("cn,cab->abn", g, jet.hess)
    H = np.einsum("aA,abn,bB->ABn", inv, M, inv)

    rows = np.stack([val, g[0], g[1], H[0, 0], H[0, 1], H[1, 1]])
    cols = np.array([
        space.flat_index(bu.first_active_index + a, bv.first_active_index + b)
        for a in range(p1) for b in range(p2)
    ])
    return rows, cols


def vertex_c2_rows(topology, spaces, dofmap, vertex):
    """Jet-equality rows (over global product DOFs) tying every incident
    patch's physical jet at the vertex to the first incident patch's."""
    jets = []
    for (k, cu, cv) in vertex.corners:
        rows, cols = physical_jet_rows(
            topology.patches[k], spaces[k], float(cu), float(cv))
        gcols = cols + dofmap.offsets[k]
        jets.append((rows, gcols))

    data, ri, ci = [], [], []
    base_rows, base_cols = jets[0]
    nrow = 0
    for rows, gcols in jets[1:]:
        for comp in range(6):
            ri.extend([nrow] * len(base_cols))
            ci.extend(base_cols)
            data.extend(base_rows[comp])
            ri.extend([nrow] * len(gcols))
            ci.extend(gcols)
            data.extend(-rows[comp])
            nrow += 1
    return sp.coo_matrix((data, (ri, ci)), shape=(nrow, dofmap.total)).tocsr()


@dataclass
class ConstraintMap:
    """Linear reduction u = R y + g from reduced coordinates to the product
    space; R is homogeneous, the lifting g is attached by the assembly stage.

    free_basis/fixed_basis inject class coordinates into the product space;
    constraint rows (split into their free/fixed parts) are retained so the
    lifting can be made consistent with the vertex conditions.
    """

    dofmap: DofMap
    reduction: sp.csr_matrix            # R, shape (N, N_r)
    free_basis: sp.csr_matrix           # P, shape (N, N_c)
    fixed_basis: sp.csr_matrix          # shape (N, N_f)
    nullspace: sp.csr_matrix            # Z, shape (N_c, N_r)
    rows_free: sp.csr_matrix            # vertex rows over free classes
    rows_fixed: sp.csr_matrix           # vertex rows over fixed classes
    condition_number: float

    @property
    def total_dim(self) -> int:
        return self.dofmap.total

    @property
    def reduced_dim(self) -> int:
        return self.reduction.shape[1]

    @property
    def num_free_classes(self) -> int:
        return self.free_basis.shape[1]

    def particular_lift(self, fixed_values: np.ndarray) -> np.ndarray:
        """Global lifting vector consistent with the vertex constraints:
        fixed classes get `fixed_values`, free classes the minimum-norm
        correction solving the constraint rows' inhomogeneous part."""
        g = self.fixed_basis @ fixed_values
        if self.rows_free.shape[0] == 0:
            return np.asarray(g)
        d = -(self.rows_fixed @ fixed_values)
        C = self.rows_free
        norms = np.asarray(np.abs(C).sum(axis=1)).ravel()
        mixed = norms > _RANK_TOL * max(1.0, float(norms.max(initial=0.0)))
        if not np.any(mixed) or np.linalg.norm(d[mixed]) == 0.0:
            return np.asarray(g)
        Cm = C[mixed].toarray()
        cols = np.unique(Cm.nonzero()[1])
        c_t, *_ = np.linalg.lstsq(Cm[:, cols], d[mixed], rcond=None)
        c = np.zeros(self.num_free_classes)
        c[cols] = c_t
        return np.asarray(g + self.free_basis @ c)

    def fixed_only_rows(self) -> sp.csr_matrix:
        """Constraint rows acting purely on fixed classes (the part the
        boundary fit must honour)."""
        C = self.rows_free
        norms = np.asarray(np.abs(C).sum(axis=1)).ravel()
        scale = max(1.0, float(norms.max(initial=0.0)))
        pure = norms <= _RANK_TOL * scale
        rows = self.rows_fixed[pure]
        keep = np.asarray(np.abs(rows).sum(axis=1)).ravel() > _RANK_TOL
        return rows[keep]


def build_constraint_map(topology: MultiPatchTopology, spaces,
                         vertex_mode: str = "c2") -> ConstraintMap:
    """Dirichlet clamping + C0 gluing + (for vertex_mode='c2') vertex jet
    equality, reduced by rank-revealing elimination of the redundant rows."""
    if vertex_mode not in ("c2", "c0"):
        raise ConfigError(f"vertex_mode must be 'c2' or 'c0', got {vertex_mode!r}")
    dofmap = DofMap(spaces)
    N = dofmap.total

    fixed_dofs = np.zeros(N, dtype=bool)
    patch_sides: dict[int, list[str]] = {}
    for k, side in topology.dirichlet_sides:
        patch_sides.setdefault(k, []).append(side)
    for k, sides in patch_sides.items():
        for loc in clamp_boundary(spaces[k], sides):
            fixed_dofs[dofmap.offsets[k] + loc] = True

    uf = glue_c0(topology, spaces, dofmap)
    roots = np.fromiter((uf.find(i) for i in range(N)), dtype=np.int64, count=N)
    class_fixed = np.zeros(N, dtype=bool)
    np.logical_or.at(class_fixed, roots, fixed_dofs)

    unique_roots = np.unique(roots)
    free_roots = unique_roots[~class_fixed[unique_roots]]
    fixed_roots = unique_roots[class_fixed[unique_roots]]
    free_col = {r: c for c, r in enumerate(free_roots)}
    fixed_col = {r: c for c, r in enumerate(fixed_roots)}

    rows = np.arange(N)
    free_mask = ~class_fixed[roots]
    P = sp.coo_matrix(
        (np.ones(free_mask.sum()),
         (rows[free_mask], [free_col[r] for r in roots[free_mask]])),
        shape=(N, len(free_roots))).tocsr()
    Pf = sp.coo_matrix(
        (np.ones((~free_mask).sum()),
         (rows[~free_mask], [fixed_col[r] for r in roots[~free_mask]])),
        shape=(N, len(fixed_roots))).tocsr()

    if vertex_mode == "c2" and topology.vertices:
        C_global = sp.vstack([
            vertex_c2_rows(topology, spaces, dofmap, v) for v in topology.vertices
        ]).tocsr()
        C_free = (C_global @ P).tocsr()
        C_fixed = (C_global @ Pf).tocsr()
    else:
        C_free = sp.csr_matrix((0, len(free_roots)))
        C_fixed = sp.csr_matrix((0, len(fixed_roots)))

    Nc = len(free_roots)
    touched = np.unique(C_free.nonzero()[1])
    if touched.size:
        block = C_free[:, touched].toarray()
        # drop numerically empty rows before the decomposition
        rn = np.abs(block).sum(axis=1)
        block = block[rn > _RANK_TOL * max(1.0, rn.max(initial=0.0))]
        if block.size:
            _, s, Vt = np.linalg.svd(block, full_matrices=True)
            rank = int(np.sum(s > _RANK_TOL * s[0])) if s.size else 0
            nullblock = Vt[rank:].T
        else:
            nullblock = np.eye(touched.size)
        untouched = np.setdiff1d(np.arange(Nc), touched)
        n_red = untouched.size + nullblock.shape[1]
        Z = sp.lil_matrix((Nc, n_red))
        for c, col in enumerate(untouched):
            Z[col, c] = 1.0
        Z[touched, untouched.size:] = nullblock
        Z = Z.tocsr()
        class_sizes = np.asarray(P.sum(axis=0)).ravel()
        touched_eigs = np.linalg.eigvalsh(
            nullblock.T @ (class_sizes[touched, None] * nullblock))
        all_eigs = np.concatenate([class_sizes[untouched], touched_eigs])
    else:
        Z = sp.identity(Nc, format="csr")
        class_sizes = np.asarray(P.sum(axis=0)).ravel()
        all_eigs = class_sizes if Nc else np.array([1.0])

    cond = float(all_eigs.max() / all_eigs.min()) if all_eigs.size else 1.0
    R = (P @ Z).tocsr()
    return ConstraintMap(dofmap, R, P, Pf, Z, C_free, C_fixed, cond)


# ---------------------------------------------------------------------------
# interface trace and multiplier spaces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceSpaceHandle:
    """Normal-derivative trace space of one interface.

    Generators are the secondary-patch DOFs in the second layer off the
    interface, skipping the two nearest each endpoint; their traces vanish
    to second order at the interface endpoints.
    """

    interface: int
    patch: int
    side: str
    local_dofs: tuple[int, ...]        # patch-local flat indices, side order
    side_positions: tuple[int, ...]    # 1D index along the side per generator

    @property
    def dim(self) -> int:
        return len(self.local_dofs)


def build_trace_space(topology, spaces, ell: int) -> TraceSpaceHandle:
    iface = topology.interfaces[ell]
    ks, side = iface.secondary
    space = spaces[ks]
    layer1 = side_dof_indices(space.shape, side, 1)
    n = len(layer1)
    picks = range(2, n - 2)
    dofs = tuple(space.flat_index(i, j) for (i, j) in (layer1[t] for t in picks))
    return TraceSpaceHandle(ell, ks, side, dofs, tuple(picks))


@dataclass(frozen=True)
class MultiplierSpaceHandle:
    """Lagrange multiplier space of one interface, parametrized by the
    interface coordinate."""

    interface: int
    mode: str                       # "merged" | "unmerged"
    space: SplineSpace1D

    @property
    def dim(self) -> int:
        return self.space.dimension


def build_multiplier_space(topology, spaces, ell: int, degree: int,
                           mode: str = "merged") -> MultiplierSpaceHandle:
    """Degree p-2 multipliers on the interface mesh; in merged mode the
    first and last elements are merged so dim M = dim W."""
    if degree < 2:
        raise DegreeTooLowError("multiplier space needs degree >= 2")
    if mode not in ("merged", "unmerged"):
        raise ConfigError(f"multiplier mode must be 'merged' or 'unmerged'")
    iface = topology.interfaces[ell]
    kp, side = iface.primary
    interior = side_breakpoints(topology.patches[kp], side)[1:-1]
    kv = make_knot_vector(degree - 2, interior, degree - 1)
    if mode == "merged":
        kv = merge_end_elements(kv)
    return MultiplierSpaceHandle(ell, mode, SplineSpace1D(kv))


def interface_primal_dimension(spaces, topology, ell: int) -> int:
    """Dimension of the 1D primal trace space along the interface."""
    iface = topology.interfaces[ell]
    ks, side = iface.secondary
    sp2d = spaces[ks]
    s = sp2d.space_v if side in ("west", "east") else sp2d.space_u
    return s.dimension
