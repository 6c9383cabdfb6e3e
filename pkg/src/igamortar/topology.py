"""Multipatch connectivity: interfaces, vertices, boundary sides, and the
interface frame with the normal-derivative pullback coefficients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    DanglingSideError,
    DegenerateJacobianError,
    NonConformingInterfaceError,
    OrientationMismatchError,
)
from .geometry import PatchGeometry, eval_geometry

SIDES = ("west", "east", "south", "north")

# side -> ((u0, v0), running direction): side point = origin + t * direction
_SIDE_PARAM = {
    "west": ((0.0, 0.0), (0.0, 1.0)),
    "east": ((1.0, 0.0), (0.0, 1.0)),
    "south": ((0.0, 0.0), (1.0, 0.0)),
    "north": ((0.0, 1.0), (1.0, 0.0)),
}

# parametric direction pointing from the side into the patch
_SIDE_INWARD = {
    "west": (1.0, 0.0),
    "east": (-1.0, 0.0),
    "south": (0.0, 1.0),
    "north": (0.0, -1.0),
}


def side_point(side: str, t: float) -> tuple[float, float]:
    (u0, v0), (du, dv) = _SIDE_PARAM[side]
    return u0 + t * du, v0 + t * dv


def side_direction(side: str) -> np.ndarray:
    return np.asarray(_SIDE_PARAM[side][1])


def side_inward(side: str) -> np.ndarray:
    return np.asarray(_SIDE_INWARD[side])


def side_breakpoints(patch: PatchGeometry, side: str) -> np.ndarray:
    sp = patch.space.space_v if side in ("west", "east") else patch.space.space_u
    return sp.breakpoints


@dataclass(frozen=True)
class Interface:
    """One skeleton curve with its primary/secondary sides.

    `reversed` means the secondary side's own parameter runs opposite to the
    interface parameter (which is the primary side's parameter).
    """

    index: int
    primary: tuple[int, str]
    secondary: tuple[int, str]
    reversed: bool = False

    def secondary_param(self, yhat: float) -> float:
        return 1.0 - yhat if self.reversed else yhat


@dataclass(frozen=True)
class Vertex:
    """A corner shared by at least two patches (an interface endpoint)."""

    index: int
    position: np.ndarray
    corners: tuple[tuple[int, int, int], ...]   # (patch, u-corner, v-corner)
    on_boundary: bool


@dataclass(frozen=True)
class MultiPatchTopology:
    patches: tuple[PatchGeometry, ...]
    interfaces: tuple[Interface, ...]
    vertices: tuple[Vertex, ...]
    boundary_sides: tuple[tuple[int, str], ...]
    dirichlet_sides: tuple[tuple[int, str], ...] = field(default=())

    @property
    def num_patches(self) -> int:
        return len(self.patches)

    def interior_vertices(self):
        return [v for v in self.vertices if not v.on_boundary]


_N_TRACE_SAMPLES = 9


def _side_trace(patch: PatchGeometry, side: str, ts) -> np.ndarray:
    return np.array([patch.eval_point(*side_point(side, t)) for t in ts])


def _domain_diameter(patches) -> float:
    pts = np.concatenate([p.control_points.reshape(-1, 2) for p in patches])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    return float(np.linalg.norm(hi - lo)) or 1.0


def build_topology(patches, tol=None, interface_overrides=None,
                   dirichlet_sides=None) -> MultiPatchTopology:
    """Match patch sides into interfaces, collect shared corners as
    vertices, and classify the remaining sides as domain boundary.

    Sides match when their mapped traces coincide pointwise up to `tol`
    (default 1e-9 times the domain diameter), directly or reversed. The
    lower patch index becomes the primary side unless `interface_overrides`
    (entries {"primary": [k, side], "secondary": [k, side]}) says otherwise.
    """
    patches = list(patches)
    if not patches:
        raise ConfigError("need at least one patch")
    patches = [
        PatchGeometry(p.space, p.control_points, p.weights, k)
        for k, p in enumerate(patches)
    ]
    if tol is None:
        tol = 1e-9 * _domain_diameter(patches)

    ts = np.linspace(0.0, 1.0, _N_TRACE_SAMPLES)
    traces = {
        (k, side): _side_trace(p, side, ts)
        for k, p in enumerate(patches) for side in SIDES
    }

    all_sides = list(traces)
    match_of: dict[tuple[int, str], tuple[tuple[int, str], bool]] = {}
    for a in range(len(all_sides)):
        for b in range(a + 1, len(all_sides)):
            sa, sb = all_sides[a], all_sides[b]
            if sa[0] == sb[0]:
                continue
            ta, tb = traces[sa], traces[sb]
            direct = np.max(np.linalg.norm(ta - tb, axis=1)) <= tol
            rev = np.max(np.linalg.norm(ta - tb[::-1], axis=1)) <= tol
            if not (direct or rev):
                continue
            if direct and rev:
                raise OrientationMismatchError(
                    f"sides {sa} and {sb} match in both orientations"
                )
            for s, other in ((sa, sb), (sb, sa)):
                if s in match_of:
                    raise DanglingSideError(
                        f"side {s} matches both {match_of[s][0]} and {other}"
                    )
            match_of[sa] = (sb, rev)
            match_of[sb] = (sa, rev)

    override_pairs = {}
    if interface_overrides:
        for entry in interface_overrides:
            prim = (int(entry["primary"][0]), str(entry["primary"][1]))
            sec = (int(entry["secondary"][0]), str(entry["secondary"][1]))
            override_pairs[frozenset((prim, sec))] = (prim, sec)

    interfaces = []
    seen = set()
    for s in sorted(match_of):
        if s in seen:
            continue
        other, rev = match_of[s]
        seen.update((s, other))
        prim, sec = (s, other) if s[0] < other[0] else (other, s)
        key = frozenset((prim, sec))
        if key in override_pairs:
            prim, sec = override_pairs[key]
        # conforming meshes: side breakpoints agree (up to reversal)
        bp_p = side_breakpoints(patches[prim[0]], prim[1])
        bp_s = side_breakpoints(patches[sec[0]], sec[1])
        if rev:
            bp_s = np.sort(1.0 - bp_s)
        if len(bp_p) != len(bp_s) or np.max(np.abs(bp_p - bp_s)) > 1e-10:
            raise NonConformingInterfaceError(
                f"interface {prim}/{sec}: side meshes differ"
            )
        interfaces.append(Interface(len(interfaces), prim, sec, rev))

    boundary = tuple(s for s in all_sides if s not in match_of)

    # vertices: group patch corners by position, keep those shared by >= 2 patches
    corner_sides = {
        (0, 0): ("west", "south"), (1, 0): ("east", "south"),
        (1, 1): ("east", "north"), (0, 1): ("west", "north"),
    }
    groups: list[list[tuple[int, int, int]]] = []
    positions: list[np.ndarray] = []
    for k, p in enumerate(patches):
        for (cu, cv), _ in corner_sides.items():
            pos = p.eval_point(float(cu), float(cv))
            for g, gp in zip(groups, positions):
                if np.linalg.norm(pos - gp) <= tol:
                    g.append((k, cu, cv))
                    break
            else:
                groups.append([(k, cu, cv)])
                positions.append(pos)

    vertices = []
    boundary_set = set(boundary)
    for g, pos in zip(groups, positions):
        if len(g) < 2:
            continue
        on_bdry = any(
            (k, side) in boundary_set
            for (k, cu, cv) in g for side in corner_sides[(cu, cv)]
        )
        vertices.append(Vertex(len(vertices), pos, tuple(sorted(g)), on_bdry))

    if dirichlet_sides is None:
        dirichlet = boundary
    else:
        dirichlet = tuple((int(k), str(s)) for k, s in dirichlet_sides)
        for d in dirichlet:
            if d not in boundary_set:
                raise ConfigError(f"dirichlet side {d} is not a boundary side")

    return MultiPatchTopology(
        tuple(patches), tuple(interfaces), tuple(vertices), boundary, dirichlet
    )


@dataclass(frozen=True)
class InterfaceFrame:
    """Differential data of one interface point.

    normal is the unit normal pointing out of the primary patch; on each
    side, (grad phi . normal) composed with the interface parametrization
    equals alpha * d_xi phi_hat + beta * d_eta phi_hat, where xi is that
    side's inward transversal parameter and eta the interface parameter.
    """

    yhat: float
    point: np.ndarray
    tangent: np.ndarray
    rho: float
    normal: np.ndarray
    alpha_primary: float
    beta_primary: float
    alpha_secondary: float
    beta_secondary: float


def _side_pullback(patch, side, t, normal, eta_dir_sign):
    jet = eval_geometry(patch, *side_point(side, t))
    d_xi = jet.jacobian @ side_inward(side)
    d_eta = (jet.jacobian @ side_direction(side)) * eta_dir_sign
    M = np.stack([d_xi, d_eta], axis=1)
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    if abs(det) <= 1e-12 * (np.abs(M).sum() ** 2 + 1e-300):
        raise DegenerateJacobianError(f"degenerate side frame on patch {patch.patch_id}")
    alpha, beta = np.linalg.solve(M, normal)
    return float(alpha), float(beta)


def interface_frame(topology: MultiPatchTopology, ell: int, yhat: float) -> InterfaceFrame:
    """Tangent, arc weight, unit normal and pullback coefficients at one
    interface point."""
    iface = topology.interfaces[ell]
    kp, side_p = iface.primary
    ks, side_s = iface.secondary
    patch_p = topology.patches[kp]
    patch_s = topology.patches[ks]

    jet = eval_geometry(patch_p, *side_point(side_p, yhat))
    tangent = jet.jacobian @ side_direction(side_p)
    rho = float(np.linalg.norm(tangent))
    normal = np.array([tangent[1], -tangent[0]]) / rho
    outward = jet.jacobian @ (-side_inward(side_p))
    if normal @ outward < 0:
        normal = -normal

    a_p, b_p = _side_pullback(patch_p, side_p, yhat, normal, 1.0)
    t_s = iface.secondary_param(yhat)
    a_s, b_s = _side_pullback(
        patch_s, side_s, t_s, normal, -1.0 if iface.reversed else 1.0
    )
    return InterfaceFrame(yhat, jet.point, tangent, rho, normal, a_p, b_p, a_s, b_s)
