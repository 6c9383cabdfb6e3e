"""Isogeometric mortar discretization of the biharmonic equation on
multipatch spline/NURBS domains, with weak C1 coupling across interfaces
and numerical verification of inf-sup stability and convergence rates."""

__version__ = "0.1.0"

from .bspline import (
    BasisEval,
    KnotVector,
    SplineSpace1D,
    eval_basis,
    make_knot_vector,
    make_open_knot_vector,
    make_special_space,
    merge_end_elements,
    open_spline_space,
    uniform_open_space,
)
from .quadrature import QuadratureRule1D, gauss_legendre

__all__ = [
    "BasisEval",
    "KnotVector",
    "QuadratureRule1D",
    "SplineSpace1D",
    "__version__",
    "eval_basis",
    "gauss_legendre",
    "make_knot_vector",
    "make_open_knot_vector",
    "make_special_space",
    "merge_end_elements",
    "open_spline_space",
    "uniform_open_space",
]
