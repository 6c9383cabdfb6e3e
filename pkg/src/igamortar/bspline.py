"""Univariate B-spline spaces on [0, 1].

Open knot vectors with per-breakpoint multiplicities, Cox-de Boor basis
evaluation with derivatives, end-element merging, and the family of
boundary-modified 1D spaces used by the multiplier construction and the
corner stability test.

End multiplicities below degree+1 are supported: the basis on such a
knot vector coincides with the interior subset of the basis on the
zero-padded open extension, which is how evaluation is implemented
(one code path for all spaces).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegreeTooLowError,
    MultiplicityOutOfRangeError,
    NonMonotoneError,
    OutOfDomainError,
    TooFewElementsError,
)


@dataclass(frozen=True)
class KnotVector:
    """Nondecreasing knot sequence on [0, 1] for a fixed polynomial degree.

    Attributes:
        degree: polynomial degree p >= 0.
        knots: full knot sequence, length = dim + p + 1.
        breakpoints: deduplicated knots (strictly increasing, includes 0 and 1).
        multiplicities: repetition count per breakpoint; sums to len(knots).
    """

    degree: int
    knots: np.ndarray
    breakpoints: np.ndarray
    multiplicities: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "knots", np.asarray(self.knots, dtype=float))
        object.__setattr__(self, "breakpoints", np.asarray(self.breakpoints, dtype=float))
        object.__setattr__(self, "multiplicities", np.asarray(self.multiplicities, dtype=int))

    @property
    def num_basis(self) -> int:
        return len(self.knots) - self.degree - 1

    @property
    def end_multiplicity(self) -> tuple[int, int]:
        return int(self.multiplicities[0]), int(self.multiplicities[-1])

    @property
    def is_open(self) -> bool:
        p1 = self.degree + 1
        return self.end_multiplicity == (p1, p1)

    @property
    def interior_breakpoints(self) -> np.ndarray:
        return self.breakpoints[1:-1]

    @property
    def num_elements(self) -> int:
        return len(self.breakpoints) - 1

    def element_sizes(self) -> np.ndarray:
        return np.diff(self.breakpoints)


def _build_knot_vector(degree, interior, interior_mult, end_mult):
    interior = np.asarray(interior, dtype=float)
    if interior.size and (
        np.any(np.diff(interior) <= 0) or interior[0] <= 0.0 or interior[-1] >= 1.0
    ):
        raise NonMonotoneError(
            "interior breakpoints must be strictly increasing within (0, 1)"
        )
    interior_mult = np.asarray(interior_mult, dtype=int)
    if interior_mult.size != interior.size:
        raise MultiplicityOutOfRangeError("one multiplicity per interior breakpoint")
    if interior.size and (interior_mult.min() < 1 or interior_mult.max() > degree + 1):
        raise MultiplicityOutOfRangeError(
            f"interior multiplicities must lie in [1, {degree + 1}]"
        )
    m0, m1 = end_mult
    if not (1 <= m0 <= degree + 1 and 1 <= m1 <= degree + 1):
        raise MultiplicityOutOfRangeError(
            f"end multiplicities must lie in [1, {degree + 1}]"
        )
    knots = np.concatenate([
        np.zeros(m0),
        np.repeat(interior, interior_mult),
        np.ones(m1),
    ])
    breakpoints = np.concatenate([[0.0], interior, [1.0]])
    mult = np.concatenate([[m0], interior_mult, [m1]]).astype(int)
    return KnotVector(degree, knots, breakpoints, mult)


def make_open_knot_vector(degree, interior_breakpoints, interior_multiplicities=None):
    """Open knot vector (end multiplicity degree+1) on [0, 1].

    Raises NonMonotoneError / MultiplicityOutOfRangeError on bad input.
    """
    interior_breakpoints = np.asarray(interior_breakpoints, dtype=float)
    if interior_multiplicities is None:
        interior_multiplicities = np.ones(interior_breakpoints.size, dtype=int)
    return _build_knot_vector(
        degree, interior_breakpoints, interior_multiplicities,
        (degree + 1, degree + 1),
    )


def make_knot_vector(degree, interior_breakpoints, end_multiplicity,
                     interior_multiplicities=None):
    """Knot vector with explicit (possibly reduced) end multiplicity.

    A reduced end multiplicity m < degree+1 bakes vanishing of the basis at
    that endpoint up to order degree - m.
    """
    interior_breakpoints = np.asarray(interior_breakpoints, dtype=float)
    if interior_multiplicities is None:
        interior_multiplicities = np.ones(interior_breakpoints.size, dtype=int)
    if np.isscalar(end_multiplicity):
        end_multiplicity = (end_multiplicity, end_multiplicity)
    return _build_knot_vector(
        degree, interior_breakpoints, interior_multiplicities, end_multiplicity
    )


def merge_end_elements(kv: KnotVector) -> KnotVector:
    """Drop the first and last interior breakpoints, merging the two end
    elements on each side into one. End multiplicities are unchanged."""
    interior = kv.interior_breakpoints
    if interior.size < 3:
        raise TooFewElementsError(
            "end-element merging needs at least 3 interior breakpoints"
        )
    keep = slice(1, -1)
    return _build_knot_vector(
        kv.degree,
        interior[keep],
        kv.multiplicities[1:-1][keep],
        kv.end_multiplicity,
    )


@dataclass(frozen=True)
class SplineSpace1D:
    """Spline space spanned by the B-splines of a knot vector.

    `constraints` records linear side conditions (e.g. zero mean) that the
    stability lab imposes on coefficients; they are metadata only and do not
    change the basis.
    """

    knot_vector: KnotVector
    constraints: tuple[str, ...] = field(default=())

    @property
    def degree(self) -> int:
        return self.knot_vector.degree

    @property
    def dimension(self) -> int:
        return self.knot_vector.num_basis

    @property
    def constrained_dimension(self) -> int:
        rows = 0
        for c in self.constraints:
            rows += {"end_value_zero": 2, "end_derivative_zero": 2, "zero_mean": 1}[c]
        return self.dimension - rows

    @property
    def breakpoints(self) -> np.ndarray:
        return self.knot_vector.breakpoints

    @property
    def num_elements(self) -> int:
        return self.knot_vector.num_elements

    @property
    def mesh_size(self) -> float:
        return float(self.knot_vector.element_sizes().max())

    @property
    def quasi_uniformity(self) -> float:
        sizes = self.knot_vector.element_sizes()
        return float(sizes.min() / sizes.max())

    def regularity(self) -> np.ndarray:
        """Smoothness order p - m_j at each interior breakpoint."""
        return self.degree - self.knot_vector.multiplicities[1:-1]

    # Padded open extension used for evaluation (identity for open vectors).
    @property
    def _ext(self):
        kv = self.knot_vector
        m0, m1 = kv.end_multiplicity
        pad0 = kv.degree + 1 - m0
        pad1 = kv.degree + 1 - m1
        if pad0 == 0 and pad1 == 0:
            return kv.knots, 0
        ext = np.concatenate([np.zeros(pad0), kv.knots, np.ones(pad1)])
        return ext, pad0

    def element_of(self, x: float) -> int:
        """Index of the breakpoint span containing x (left limit at x = 1)."""
        if not (0.0 <= x <= 1.0):
            raise OutOfDomainError(f"x = {x} outside [0, 1]")
        bp = self.breakpoints
        k = int(np.searchsorted(bp, x, side="right")) - 1
        return min(max(k, 0), len(bp) - 2)

    def greville_points(self) -> np.ndarray:
        """Knot averages; satisfy linear precision sum_i g_i B_i(x) = x for
        open vectors."""
        kv = self.knot_vector
        p = kv.degree
        if p == 0:
            # midpoints of the supports
            return 0.5 * (kv.knots[:-1] + kv.knots[1:])
        return np.array([
            kv.knots[i + 1: i + p + 1].mean() for i in range(self.dimension)
        ])

    def eval_basis(self, x: float, max_deriv: int = 0) -> "BasisEval":
        return eval_basis(self, x, max_deriv)

    def eval_all(self, xs, max_deriv: int = 0) -> np.ndarray:
        """Dense table of shape (max_deriv+1, len(xs), dimension)."""
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        out = np.zeros((max_deriv + 1, xs.size, self.dimension))
        for q, x in enumerate(xs):
            be = eval_basis(self, x, max_deriv)
            lo = be.first_active_index
            hi = min(lo + self.degree + 1, self.dimension)
            out[0, q, lo:hi] = be.values[: hi - lo]
            for k in range(1, max_deriv + 1):
                out[k, q, lo:hi] = be.derivatives[k - 1, : hi - lo]
        return out


@dataclass(frozen=True)
class BasisEval:
    """Active basis values at one point.

    values[j] (and derivatives[k-1, j]) belong to basis function
    first_active_index + j; entries for indices past the space dimension
    are zero-padded.
    """

    first_active_index: int
    values: np.ndarray
    derivatives: np.ndarray | None = None


def find_span(knots: np.ndarray, degree: int, x: float) -> int:
    """Largest i with knots[i] <= x < knots[i+1], clamped to the domain
    spans of an open vector (left limit at the right endpoint)."""
    n = len(knots) - degree - 1
    k = int(np.searchsorted(knots, x, side="right")) - 1
    return min(max(k, degree), n - 1)


def _ders_basis_funs(span, x, degree, knots, nder):
    """Values and derivatives of the degree+1 B-splines active on the span.

    Standard knot-difference recurrence (degree reduction); returns array of
    shape (nder+1, degree+1), row k = k-th derivative.
    """
    p = degree
    ndu = np.empty((p + 1, p + 1))
    ndu[0, 0] = 1.0
    left = np.empty(p + 1)
    right = np.empty(p + 1)
    for j in range(1, p + 1):
        left[j] = x - knots[span + 1 - j]
        right[j] = knots[span + j] - x
        saved = 0.0
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved

    nk = min(nder, p)
    ders = np.zeros((nder + 1, p + 1))
    ders[0, :] = ndu[:, p]
    if nk == 0:
        return ders

    a = np.empty((2, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[0, 0] = 1.0
        for k in range(1, nk + 1):
            d = 0.0
            rk = r - k
            pk = p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d += a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d += a[s2, k] * ndu[r, pk]
            ders[k, r] = d
            s1, s2 = s2, s1

    fac = float(p)
    for k in range(1, nk + 1):
        ders[k, :] *= fac
        fac *= p - k
    return ders


def eval_basis(space: SplineSpace1D, x: float, max_deriv: int = 0) -> BasisEval:
    """Evaluate the active basis functions (and derivatives) at x in [0, 1].

    At x = 1 the left limit is used, so the last basis function of an open
    vector equals 1 there. Derivative orders above the degree are zero.
    """
    if not (0.0 <= x <= 1.0):
        raise OutOfDomainError(f"x = {x} outside [0, 1]")
    p = space.degree
    ext, offset = space._ext
    span = find_span(ext, p, x)
    ders = _ders_basis_funs(span, x, p, ext, max_deriv)

    first_ext = span - p
    n = space.dimension
    first = min(max(first_ext - offset, 0), max(n - p - 1, 0))
    # re-window onto the space's own index range; functions outside the
    # extension's active window vanish at x
    vals = np.zeros((max_deriv + 1, p + 1))
    for j in range(p + 1):
        ext_idx = first + j + offset
        col = ext_idx - first_ext
        if 0 <= col <= p and first + j < n:
            vals[:, j] = ders[:, col]
    derivatives = vals[1:] if max_deriv > 0 else None
    return BasisEval(first, vals[0], derivatives)


SPECIAL_SPACE_KINDS = (
    "primal_clamped",      # degree p, full mesh, open ends; v = v' = 0 recorded
    "reduced_zero_bc",     # degree p-1, full mesh, end multiplicity p-1 (baked
                           # endpoint vanishing); zero mean recorded
    "reduced_merged",      # degree p-1, merged mesh, open ends; zero mean recorded
    "multiplier_merged",   # degree p-2, merged mesh, open ends
)


def make_special_space(kind: str, p: int, interior_breakpoints) -> SplineSpace1D:
    """The boundary-modified 1D spaces used by the multiplier construction
    and the corner stability test, parametrized by the primal degree p.

    Endpoint/mean conditions are attached as coefficient-constraint metadata;
    `reduced_zero_bc` instead bakes its endpoint vanishing into the knot
    vector (end multiplicity p-1), matching the construction the stability
    test pairs coefficient-for-coefficient with its merged twin.
    """
    interior = np.asarray(interior_breakpoints, dtype=float)
    if kind == "primal_clamped":
        kv = make_open_knot_vector(p, interior)
        return SplineSpace1D(kv, ("end_value_zero", "end_derivative_zero"))
    if kind == "reduced_zero_bc":
        if p < 2:
            raise DegreeTooLowError("reduced space needs p >= 2")
        kv = make_knot_vector(p - 1, interior, p - 1)
        return SplineSpace1D(kv, ("zero_mean",))
    if kind == "reduced_merged":
        if p < 2:
            raise DegreeTooLowError("reduced space needs p >= 2")
        full = make_knot_vector(p - 1, interior, p)
        return SplineSpace1D(merge_end_elements(full), ("zero_mean",))
    if kind == "multiplier_merged":
        if p < 2:
            raise DegreeTooLowError("multiplier space needs p >= 2 (degree p-2)")
        full = make_knot_vector(p - 2, interior, p - 1)
        return SplineSpace1D(merge_end_elements(full))
    raise ValueError(f"unknown special space kind {kind!r}")


def open_spline_space(degree, interior_breakpoints) -> SplineSpace1D:
    """Maximally smooth space of the given degree on the given mesh."""
    return SplineSpace1D(make_open_knot_vector(degree, interior_breakpoints))


def uniform_open_space(degree, num_elements) -> SplineSpace1D:
    interior = np.linspace(0.0, 1.0, num_elements + 1)[1:-1]
    return open_spline_space(degree, interior)


def single_insertion_matrix(knots: np.ndarray, degree: int, x: float):
    """Boehm single-knot insertion: returns (new_knots, T) with
    new_coefs = T @ old_coefs and the spline unchanged as a function."""
    p = degree
    n = len(knots) - p - 1
    k = int(np.searchsorted(knots, x, side="right")) - 1
    T = np.zeros((n + 1, n))
    for i in range(n + 1):
        if i <= k - p:
            T[i, i] = 1.0
        elif i <= k:
            alpha = (x - knots[i]) / (knots[i + p] - knots[i])
            T[i, i] = alpha
            T[i, i - 1] = 1.0 - alpha
        else:
            T[i, i - 1] = 1.0
    new_knots = np.insert(knots, k + 1, x)
    return new_knots, T


def refinement_matrix(kv: KnotVector, new_breakpoints) -> tuple[KnotVector, np.ndarray]:
    """Insert the given breakpoints (each once); returns the refined knot
    vector and the coefficient transfer matrix."""
    knots = kv.knots
    T = np.eye(kv.num_basis)
    for x in sorted(np.asarray(new_breakpoints, dtype=float)):
        knots, Ti = single_insertion_matrix(knots, kv.degree, x)
        T = Ti @ T
    breakpoints, counts = np.unique(knots, return_counts=True)
    return KnotVector(kv.degree, knots, breakpoints, counts), T


def bisect_breakpoints(breakpoints: np.ndarray, levels: int = 1) -> np.ndarray:
    """Breakpoint set after bisecting every span `levels` times."""
    bp = np.asarray(breakpoints, dtype=float)
    for _ in range(levels):
        mids = 0.5 * (bp[:-1] + bp[1:])
        bp = np.sort(np.concatenate([bp, mids]))
    return bp
