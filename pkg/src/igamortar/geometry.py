"""Tensor-product spline/NURBS patch geometry.

Patches map the parametric square [0,1]^2 into the plane. Evaluation
returns full second-order jets (Jacobian, second derivatives, inverse
Jacobian) so physical Hessians can be assembled by the chain rule.
Rational maps use the quotient rule; uniform unit weights reduce to the
polynomial case.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .bspline import (
    SplineSpace1D,
    bisect_breakpoints,
    make_open_knot_vector,
    open_spline_space,
    refinement_matrix,
)
from .errors import ConfigError, DegenerateJacobianError, GeometryError


@dataclass(frozen=True)
class TensorSpace2D:
    """Tensor product of two 1D spline spaces."""

    space_u: SplineSpace1D
    space_v: SplineSpace1D

    @property
    def shape(self) -> tuple[int, int]:
        return self.space_u.dimension, self.space_v.dimension

    @property
    def num_dofs(self) -> int:
        n1, n2 = self.shape
        return n1 * n2

    @property
    def num_elements(self) -> tuple[int, int]:
        return self.space_u.num_elements, self.space_v.num_elements

    def flat_index(self, i: int, j: int) -> int:
        return i * self.shape[1] + j

    def multi_index(self, flat: int) -> tuple[int, int]:
        n2 = self.shape[1]
        return flat // n2, flat % n2

    @property
    def mesh_size(self) -> float:
        return max(self.space_u.mesh_size, self.space_v.mesh_size)


def tensor_space(degree: int, breakpoints_u, breakpoints_v) -> TensorSpace2D:
    """Maximally smooth equal-degree tensor space on the given mesh."""
    return TensorSpace2D(
        open_spline_space(degree, np.asarray(breakpoints_u)[1:-1]),
        open_spline_space(degree, np.asarray(breakpoints_v)[1:-1]),
    )


@dataclass(frozen=True)
class GeometryJet:
    """Second-order jet of a geometry map at one parametric point.

    hess[c, a, b] = d^2 F_c / dxhat_a dxhat_b.
    """

    point: np.ndarray
    jacobian: np.ndarray
    hess: np.ndarray
    det: float
    inv_jacobian: np.ndarray


@dataclass(frozen=True)
class PatchGeometry:
    """One patch: tensor spline space, control net, optional weights.

    control_points has shape (n1, n2, 2), indexed [u-index, v-index].
    """

    space: TensorSpace2D
    control_points: np.ndarray
    weights: np.ndarray | None = None
    patch_id: int = 0

    def __post_init__(self):
        n1, n2 = self.space.shape
        cp = np.asarray(self.control_points, dtype=float)
        if cp.shape != (n1, n2, 2):
            raise ConfigError(
                f"control net shape {cp.shape} does not match space {(n1, n2, 2)}"
            )
        object.__setattr__(self, "control_points", cp)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (n1, n2):
                raise ConfigError("weights shape must match the control grid")
            if np.any(w <= 0):
                raise ConfigError("weights must be strictly positive")
            object.__setattr__(self, "weights", w)

    @property
    def is_rational(self) -> bool:
        return self.weights is not None and not np.allclose(self.weights, 1.0)

    def eval(self, u: float, v: float) -> GeometryJet:
        return eval_geometry(self, u, v)

    def eval_point(self, u: float, v: float) -> np.ndarray:
        return _raw_jet(self, u, v)[0]


def _raw_jet(patch: PatchGeometry, u: float, v: float):
    """Point, Jacobian and parametric second derivatives of the map."""
    su, sv = patch.space.space_u, patch.space.space_v
    bu = su.eval_basis(u, max_deriv=2)
    bv = sv.eval_basis(v, max_deriv=2)
    pu, pv = su.degree, sv.degree
    iu = slice(bu.first_active_index, bu.first_active_index + pu + 1)
    iv = slice(bv.first_active_index, bv.first_active_index + pv + 1)

    C = patch.control_points[iu, iv, :]
    Bu = np.vstack([bu.values, bu.derivatives])   # (3, pu+1)
    Bv = np.vstack([bv.values, bv.derivatives])

    if patch.weights is None:
        # S[a, b, :] = sum_ij C_ij Bu^(a)_i Bv^(b)_j
        S = np.einsum("ai,ijc,bj->abc", Bu, C, Bv)
        point = S[0, 0]
        J = np.stack([S[1, 0], S[0, 1]], axis=1)       # J[c, a]
        H = np.empty((2, 2, 2))
        H[:, 0, 0] = S[2, 0]
        H[:, 0, 1] = H[:, 1, 0] = S[1, 1]
        H[:, 1, 1] = S[0, 2]
        return point, J, H

    W = patch.weights[iu, iv]
    hom = np.concatenate([C * W[:, :, None], W[:, :, None]], axis=2)  # (.., 3)
    S = np.einsum("ai,ijc,bj->abc", Bu, hom, Bv)
    w = S[0, 0, 2]
    point = S[0, 0, :2] / w
    # quotient rule: F_a = (A_a - F w_a)/w ; F_ab = (A_ab - F_a w_b - F_b w_a - F w_ab)/w
    Fa = (S[1, 0, :2] - point * S[1, 0, 2]) / w
    Fb = (S[0, 1, :2] - point * S[0, 1, 2]) / w
    J = np.stack([Fa, Fb], axis=1)
    H = np.empty((2, 2, 2))
    H[:, 0, 0] = (S[2, 0, :2] - 2 * Fa * S[1, 0, 2] - point * S[2, 0, 2]) / w
    H[:, 1, 1] = (S[0, 2, :2] - 2 * Fb * S[0, 1, 2] - point * S[0, 2, 2]) / w
    Hab = (S[1, 1, :2] - Fa * S[0, 1, 2] - Fb * S[1, 0, 2] - point * S[1, 1, 2]) / w
    H[:, 0, 1] = H[:, 1, 0] = Hab
    return point, J, H


def eval_geometry(patch: PatchGeometry, u: float, v: float) -> GeometryJet:
    """Full jet at (u, v) in [0,1]^2; raises DegenerateJacobianError when
    det grad F falls below tolerance."""
    point, J, H = _raw_jet(patch, u, v)
    det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    scale = np.abs(J).sum() ** 2 + 1e-300
    if det <= 1e-12 * scale:
        raise DegenerateJacobianError(
            f"det grad F = {det:.3e} at ({u}, {v}) on patch {patch.patch_id}"
        )
    inv = np.array([[J[1, 1], -J[0, 1]], [-J[1, 0], J[0, 0]]]) / det
    return GeometryJet(point, J, H, det, inv)


def refine_uniform(obj, levels: int = 1):
    """Bisect every knot span `levels` times.

    For a PatchGeometry the control net is re-expressed exactly by knot
    insertion, so the map is unchanged; for a SplineSpace1D a fresh space
    on the bisected mesh is returned.
    """
    if levels < 0:
        raise ConfigError("levels must be >= 0")
    if isinstance(obj, SplineSpace1D):
        bp = bisect_breakpoints(obj.breakpoints, levels)
        return open_spline_space(obj.degree, bp[1:-1])
    if not isinstance(obj, PatchGeometry):
        raise TypeError(f"cannot refine {type(obj).__name__}")
    if levels == 0:
        return obj

    patch = obj
    su, sv = patch.space.space_u, patch.space.space_v
    new_u = np.setdiff1d(bisect_breakpoints(su.breakpoints, levels), su.breakpoints)
    new_v = np.setdiff1d(bisect_breakpoints(sv.breakpoints, levels), sv.breakpoints)
    kvu, Tu = refinement_matrix(su.knot_vector, np.repeat(new_u, 1))
    kvv, Tv = refinement_matrix(sv.knot_vector, np.repeat(new_v, 1))

    w = patch.weights if patch.weights is not None else np.ones(patch.space.shape)
    hom = np.concatenate([patch.control_points * w[:, :, None], w[:, :, None]], axis=2)
    hom = np.einsum("ai,ijc->ajc", Tu, hom)
    hom = np.einsum("bj,ajc->abc", Tv, hom)
    new_w = hom[:, :, 2]
    new_cp = hom[:, :, :2] / new_w[:, :, None]
    space = TensorSpace2D(SplineSpace1D(kvu), SplineSpace1D(kvv))
    weights = None if patch.weights is None else new_w
    return PatchGeometry(space, new_cp, weights, patch.patch_id)


# ---------------------------------------------------------------------------
# built-in geometries
# ---------------------------------------------------------------------------

def bilinear_patch(c00, c10, c11, c01, degree: int = 1, patch_id: int = 0) -> PatchGeometry:
    """Straight quad spanned by four corners, represented at the given
    degree (exact: straight quads are tensor-affine, reproduced by control
    points at Greville abscissae)."""
    sp = open_spline_space(degree, [])
    g = sp.greville_points()
    c00, c10, c11, c01 = (np.asarray(c, dtype=float) for c in (c00, c10, c11, c01))
    cp = np.empty((len(g), len(g), 2))
    for i, s in enumerate(g):
        for j, t in enumerate(g):
            cp[i, j] = ((1 - s) * (1 - t) * c00 + s * (1 - t) * c10
                        + s * t * c11 + (1 - s) * t * c01)
    return PatchGeometry(TensorSpace2D(sp, sp), cp, None, patch_id)


def _coons_nurbs(south, east, north, west, patch_id=0):
    """Quadratic NURBS patch from four edge arcs/segments.

    Each edge is (control_points (3,2), weights (3,)); south/north run in u,
    west/east in v; corners must be consistent. The interior control point
    is the discrete Coons blend in homogeneous coordinates.
    """
    H = np.zeros((3, 3, 3))

    def hom(edge):
        cp, w = edge
        cp = np.asarray(cp, dtype=float)
        w = np.asarray(w, dtype=float)
        return np.concatenate([cp * w[:, None], w[:, None]], axis=1)

    hs, he, hn, hw = map(hom, (south, east, north, west))
    H[:, 0, :] = hs
    H[:, 2, :] = hn
    H[0, :, :] = hw
    H[2, :, :] = he
    H[1, 1] = 0.5 * (H[0, 1] + H[2, 1] + H[1, 0] + H[1, 2]) \
        - 0.25 * (H[0, 0] + H[2, 0] + H[0, 2] + H[2, 2])

    w = H[:, :, 2]
    cp = H[:, :, :2] / w[:, :, None]
    sp = open_spline_space(2, [])
    return PatchGeometry(TensorSpace2D(sp, sp), cp, w, patch_id)


def _grid_of_squares(nx: int, ny: int, x0=0.0, y0=0.0, lx=1.0, ly=1.0):
    patches = []
    for j in range(ny):
        for i in range(nx):
            xa, xb = x0 + lx * i / nx, x0 + lx * (i + 1) / nx
            ya, yb = y0 + ly * j / ny, y0 + ly * (j + 1) / ny
            patches.append(bilinear_patch(
                (xa, ya), (xb, ya), (xb, yb), (xa, yb), patch_id=len(patches)))
    return patches


def quartercircle3_patches():
    """Quarter disk of radius 1 split into one straight corner patch and two
    NURBS patches whose outer edges lie exactly on the unit circle."""
    c = np.sqrt(2.0) / 2.0
    w45 = np.cos(np.pi / 8.0)
    V = np.array([0.4, 0.4])
    a = np.array([0.5, 0.0])
    b = np.array([0.0, 0.5])
    arc_mid = np.array([c, c])

    def seg(p, q):
        p, q = np.asarray(p, float), np.asarray(q, float)
        return np.stack([p, 0.5 * (p + q), q]), np.ones(3)

    p0 = bilinear_patch((0, 0), a, V, b, degree=2, patch_id=0)
    arc_se = (np.array([[1.0, 0.0], [1.0, np.sqrt(2) - 1.0], arc_mid]),
              np.array([1.0, w45, 1.0]))
    p1 = _coons_nurbs(south=seg(a, (1, 0)), east=arc_se,
                      north=seg(V, arc_mid), west=seg(a, V), patch_id=1)
    arc_nw = (np.array([[0.0, 1.0], [np.sqrt(2) - 1.0, 1.0], arc_mid]),
              np.array([1.0, w45, 1.0]))
    p2 = _coons_nurbs(south=seg(b, V), east=seg(V, arc_mid),
                      north=(arc_nw[0][::-1], arc_nw[1][::-1]), west=seg(b, (0, 1)),
                      patch_id=2)
    return [p0, p1, p2]


BUILTIN_GEOMETRIES = {
    "square2": lambda: _grid_of_squares(2, 1, lx=2.0, ly=1.0),
    "square4": lambda: _grid_of_squares(2, 2),
    "square12": lambda: _grid_of_squares(4, 3),
    "quartercircle3": quartercircle3_patches,
}


def builtin_geometry(name: str):
    """Patch list plus optional side metadata for a named built-in domain."""
    try:
        factory = BUILTIN_GEOMETRIES[name]
    except KeyError:
        raise ConfigError(
            f"unknown geometry {name!r}; built-ins: {sorted(BUILTIN_GEOMETRIES)}"
        ) from None
    return factory(), None, None


# ---------------------------------------------------------------------------
# geometry files
# ---------------------------------------------------------------------------

def _patch_to_dict(patch: PatchGeometry) -> dict:
    n1, n2 = patch.space.shape
    d = {
        "degree": [patch.space.space_u.degree, patch.space.space_v.degree],
        "knots_u": patch.space.space_u.knot_vector.knots.tolist(),
        "knots_v": patch.space.space_v.knot_vector.knots.tolist(),
        "control_points": patch.control_points.reshape(n1 * n2, 2).tolist(),
    }
    if patch.weights is not None:
        d["weights"] = patch.weights.reshape(n1 * n2).tolist()
    return d


def _patch_from_dict(d: dict, patch_id: int) -> PatchGeometry:
    deg = d["degree"]
    pu, pv = (deg, deg) if np.isscalar(deg) else (deg[0], deg[1])

    def space_from(knots, p):
        knots = np.asarray(knots, dtype=float)
        bp, counts = np.unique(knots, return_counts=True)
        from .bspline import KnotVector
        return SplineSpace1D(KnotVector(p, knots, bp, counts))

    su = space_from(d["knots_u"], pu)
    sv = space_from(d["knots_v"], pv)
    n1, n2 = su.dimension, sv.dimension
    cp = np.asarray(d["control_points"], dtype=float)
    if cp.shape == (n1 * n2, 2):
        cp = cp.reshape(n1, n2, 2)
    elif cp.shape != (n1, n2, 2):
        raise GeometryError(
            f"patch {patch_id}: control_points must be (n_u*n_v, 2) ordered "
            f"with the v index fastest, or nested (n_u, n_v, 2)"
        )
    weights = d.get("weights")
    if weights is not None:
        weights = np.asarray(weights, dtype=float).reshape(n1, n2)
    return PatchGeometry(TensorSpace2D(su, sv), cp, weights, patch_id)


def save_geometry(path, patches, interfaces=None, dirichlet_sides=None):
    doc = {"patches": [_patch_to_dict(p) for p in patches]}
    if interfaces is not None:
        doc["interfaces"] = interfaces
    if dirichlet_sides is not None:
        doc["dirichlet_sides"] = [list(s) for s in dirichlet_sides]
    with open(path, "w") as f:
        json.dump(doc, f, indent=1)


def load_geometry(path):
    """Read a geometry file; returns (patches, interface_overrides,
    dirichlet_sides), the latter two possibly None."""
    try:
        with open(path) as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise GeometryError(f"cannot read geometry file {path}: {exc}") from exc
    if "patches" not in doc or not doc["patches"]:
        raise GeometryError("geometry file contains no patches")
    patches = [_patch_from_dict(d, k) for k, d in enumerate(doc["patches"])]
    overrides = doc.get("interfaces")
    dirichlet = doc.get("dirichlet_sides")
    if dirichlet is not None:
        dirichlet = [(int(k), str(s)) for k, s in dirichlet]
    return patches, overrides, dirichlet
