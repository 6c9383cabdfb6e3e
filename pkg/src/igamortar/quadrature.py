"""Gauss-Legendre rules on [0, 1] and their composition over mesh elements."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OrderOutOfRangeError

MAX_ORDER = 32


@dataclass(frozen=True)
class QuadratureRule1D:
    """Nodes in (0, 1), positive weights summing to 1; exact for
    polynomials of degree <= 2q - 1."""

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def order(self) -> int:
        return len(self.nodes)


def gauss_legendre(q: int) -> QuadratureRule1D:
    """q-point Gauss-Legendre rule mapped to [0, 1]."""
    if not (1 <= q <= MAX_ORDER):
        raise OrderOutOfRangeError(f"quadrature order {q} outside [1, {MAX_ORDER}]")
    x, w = np.polynomial.legendre.leggauss(q)
    return QuadratureRule1D(0.5 * (x + 1.0), 0.5 * w)


def map_to_interval(rule: QuadratureRule1D, a: float, b: float):
    """Affine image of the reference rule on [a, b]."""
    h = b - a
    return a + h * rule.nodes, h * rule.weights


def element_nodes_weights(breakpoints, q: int):
    """Composite rule over all spans of a breakpoint partition.

    Returns (nodes, weights) flattened over elements, element-major.
    """
    rule = gauss_legendre(q)
    bp = np.asarray(breakpoints, dtype=float)
    nodes = []
    weights = []
    for a, b in zip(bp[:-1], bp[1:]):
        x, w = map_to_interval(rule, a, b)
        nodes.append(x)
        weights.append(w)
    return np.concatenate(nodes), np.concatenate(weights)
