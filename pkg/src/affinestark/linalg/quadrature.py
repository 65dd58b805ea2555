"""Globally adaptive composite Gauss-Legendre quadrature."""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import AccuracyError, InvalidInputError


@dataclass(frozen=True)
class QuadResult:
    value: float | np.ndarray
    error: float
    n_intervals: int

    def __float__(self):
        return float(self.value)


@lru_cache(maxsize=8)
def _rule(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def _panel(f, a, b, order):
    x, w = _rule(order)
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    vals = np.asarray(f(mid + half * x))
    if not np.all(np.isfinite(vals)):
        raise InvalidInputError(f"integrand not finite on [{a}, {b}]")
    return half * np.tensordot(w, vals, axes=(0, 0))


def _estimate(f, a, b, order):
    whole = _panel(f, a, b, order)
    m = 0.5 * (a + b)
    left = _panel(f, a, m, order)
    right = _panel(f, m, b, order)
    halves = left + right
    err = float(np.max(np.abs(halves - whole)))
    return halves, err


def quadrature(f, a: float, b: float, tol: float = 1e-10, order: int = 10,
               max_subdivisions: int = 20000, breakpoints=None) -> QuadResult:
    """Integrate ``f`` over ``[a, b]`` to absolute error ``tol``.

    ``f`` is evaluated on arrays of nodes and may return an array of shape
    ``(len(x), ...)``; all components are integrated together and the error
    estimate is the largest componentwise one. Each panel compares one
    Gauss-Legendre rule against the same rule on its two halves; the panel
    with the largest estimate is split until the total estimate meets ``tol``.
    """
    a = float(a)
    b = float(b)
    if not a < b:
        raise InvalidInputError(f"need a < b, got [{a}, {b}]")
    if not tol > 0:
        raise InvalidInputError("tol must be positive")
    edges = [a]
    if breakpoints is not None:
        edges += sorted(float(p) for p in breakpoints if a < p < b)
    edges.append(b)
    heap = []
    total_err = 0.0
    counter = 0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, err = _estimate(f, lo, hi, order)
        heapq.heappush(heap, (-err, counter, lo, hi, val))
        counter += 1
        total_err += err
    n_sub = 0
    while total_err > tol:
        if n_sub >= max_subdivisions:
            value = sum(item[4] for item in heap)
            raise AccuracyError(
                f"quadrature did not reach tol={tol:g} (estimate error {total_err:.3e})",
                estimate=value, error=total_err)
        neg_err, _, lo, hi, _val = heapq.heappop(heap)
        if hi - lo <= 1e-13 * max(abs(lo), abs(hi), 1.0):
            heapq.heappush(heap, (neg_err, counter, lo, hi, _val))
            value = sum(item[4] for item in heap)
            raise AccuracyError(
                f"quadrature interval collapsed near {lo:g} (estimate error {total_err:.3e})",
                estimate=value, error=total_err)
        total_err += neg_err
        mid = 0.5 * (lo + hi)
        for x0, x1 in ((lo, mid), (mid, hi)):
            val, err = _estimate(f, x0, x1, order)
            heapq.heappush(heap, (-err, counter, x0, x1, val))
            counter += 1
            total_err += err
        n_sub += 1
    items = sorted(heap, key=lambda it: it[2])
    value = items[0][4]
    for it in items[1:]:
        value = value + it[4]
    return QuadResult(value, max(total_err, 0.0), len(items))


def gauss_legendre_panels(edges, order: int = 10):
    """Nodes and weights of a composite rule on consecutive ``edges``."""
    edges = np.asarray(edges, dtype=float)
    x, w = _rule(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights
