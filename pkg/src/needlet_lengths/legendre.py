"""Legendre polynomials, their derivatives, associated functions and quadrature.

All recurrences run upward in the degree.  First and second derivatives are
carried by the telescoped relations

    P'_{l+1} = P'_{l-1} + (2l+1) P_l
    P''_{l+1} = P''_{l-1} + (2l+1) P'_l

which never divide by (1 - x^2) and are therefore uniform on the closed
interval [-1, 1], endpoints included.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial, pi, sqrt

import numpy as np
from scipy.special import roots_legendre

__all__ = [
    "LegendreTriple",
    "QuadratureRule",
    "legendre_eval",
    "legendre_columns",
    "legendre_sums",
    "assoc_legendre",
    "gauss_legendre",
    "product_integral",
    "derivative_product_closed_form",
    "mixed_product_closed_form",
    "hilb_approx",
    "hilb_envelope",
]


@dataclass(frozen=True)
class LegendreTriple:
    degree: int
    p: float
    dp: float
    ddp: float


def _check_domain(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0):
        raise ValueError("Legendre argument outside [-1, 1]")
    return x


def legendre_columns(ell: int, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(P_ell(x), P'_ell(x), P''_ell(x))`` for an array of arguments."""
    if ell < 0:
        raise ValueError("degree must be non-negative")
    x = _check_domain(x)
    p_prev, p = np.zeros_like(x), np.ones_like(x)
    d_prev, d = np.zeros_like(x), np.zeros_like(x)
    dd_prev, dd = np.zeros_like(x), np.zeros_like(x)
    # loop state holds degree n in (p, d, dd) and n-1 in the *_prev slots
    for n in range(ell):
        p_next = ((2 * n + 1) * x * p - n * p_prev) / (n + 1)
        d_next = d_prev + (2 * n + 1) * p
        dd_next = dd_prev + (2 * n + 1) * d
        p_prev, p = p, p_next
        d_prev, d = d, d_next
        dd_prev, dd = dd, dd_next
    return p, d, dd


def legendre_eval(ell: int, x: float) -> LegendreTriple:
    """Value, first and second derivative of ``P_ell`` at a scalar ``x``."""
    p, d, dd = legendre_columns(ell, np.asarray([x], dtype=float))
    return LegendreTriple(int(ell), float(p[0]), float(d[0]), float(dd[0]))


def legendre_sums(x, weights, ell_min: int = 0, *, second: bool = False):
    """Weighted sums ``sum_l w_l P_l(x)`` and ``sum_l w_l P'_l(x)``.

    ``weights[..., i]`` multiplies degree ``ell_min + i``; leading axes of
    ``weights`` give several weight rows sharing one recurrence pass, and the
    outputs then have shape ``weights.shape[:-1] + x.shape``.  With
    ``second=True`` the weighted sum of ``P''_l`` is returned as a third
    array.  Memory stays O(len(x)) whatever the number of degrees.
    """
    x = _check_domain(x)
    weights = np.asarray(weights, dtype=float)
    ell_max = ell_min + weights.shape[-1] - 1
    shape = weights.shape[:-1] + x.shape
    s0 = np.zeros(shape)
    s1 = np.zeros(shape)
    s2 = np.zeros(shape) if second else None

    p_prev, p = np.zeros_like(x), np.ones_like(x)
    d_prev, d = np.zeros_like(x), np.zeros_like(x)
    dd_prev, dd = np.zeros_like(x), np.zeros_like(x)
    for n in range(ell_max + 1):
        if n >= ell_min:
            w = weights[..., n - ell_min]
            if np.any(w != 0.0):
                s0 += np.multiply.outer(w, p)
                s1 += np.multiply.outer(w, d)
                if second:
                    s2 += np.multiply.outer(w, dd)
        if n == ell_max:
            break
        p_next = ((2 * n + 1) * x * p - n * p_prev) / (n + 1)
        d_next = d_prev + (2 * n + 1) * p
        if second:
            dd_prev, dd = dd, dd_prev + (2 * n + 1) * d
        p_prev, p = p, p_next
        d_prev, d = d, d_next
    if second:
        return s0, s1, s2
    return s0, s1


def assoc_legendre(ell: int, m: int, x):
    """Associated Legendre function ``P_ell^m(x)`` with the Condon-Shortley phase.

    Unnormalised: ``P_1^1(x) = -sqrt(1 - x^2)``.
    """
    if m < 0 or m > ell:
        raise ValueError("order must satisfy 0 <= m <= ell")
    scalar = np.ndim(x) == 0
    x = _check_domain(np.atleast_1d(x))
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    pmm = np.ones_like(x)
    for i in range(1, m + 1):
        pmm = -pmm * (2 * i - 1) * s
    if ell == m:
        out = pmm
    else:
        p_prev, p = pmm, x * (2 * m + 1) * pmm
        for n in range(m + 1, ell):
            p_prev, p = p, ((2 * n + 1) * x * p - (n + m) * p_prev) / (n - m + 1)
        out = p
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre nodes and weights on [-1, 1]."""

    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.nodes)))

    def mapped(self, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights transplanted affinely onto [a, b]."""
        half = 0.5 * (b - a)
        return half * self.nodes + 0.5 * (a + b), half * self.weights


@lru_cache(maxsize=32)
def gauss_legendre(order: int) -> QuadratureRule:
    """Cached ``order``-point rule, exact for polynomials of degree ``2*order - 1``."""
    if order < 1:
        raise ValueError("quadrature order must be positive")
    nodes, weights = roots_legendre(order)
    if order > 64:
        # the library weights drift near the endpoints at high order; one
        # Newton step on the nodes and the closed-form weights fix that
        p, d, _ = legendre_columns(order, nodes)
        nodes = nodes - p / d
        _, d, _ = legendre_columns(order, nodes)
        weights = 2.0 / ((1.0 - nodes * nodes) * d * d)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(nodes, weights, order)


_KIND_OFFSET = {"P": 0, "dP": 1, "ddP": 2}


def product_integral(factors, weight=None, order: int | None = None) -> float:
    """Integral over [-1, 1] of a product of Legendre factors times a weight.

    Parameters
    ----------
    factors : sequence of (kind, degree)
        ``kind`` is one of ``"P"``, ``"dP"``, ``"ddP"`` (value, first or
        second derivative).
    weight : (coeffs, k), optional
        The weight ``poly(x) * (1 - x^2)**k`` with ``coeffs`` in ascending
        powers of ``x``.  Defaults to the constant 1.
    order : int, optional
        Quadrature order.  By default ``2 * max_degree + 16`` nodes, which is
        exact for every admissible integrand.
    """
    factors = list(factors)
    if not factors:
        raise ValueError("need at least one Legendre factor")
    coeffs, k = (np.array([1.0]), 0) if weight is None else (np.asarray(weight[0], float), int(weight[1]))
    degree = sum(max(ell - _KIND_OFFSET[kind], 0) for kind, ell in factors)
    degree += (len(coeffs) - 1) + 2 * k
    if order is None:
        order = 2 * max(ell for _, ell in factors) + 16
        order = max(order, degree // 2 + 1)
    rule = gauss_legendre(order)
    x = rule.nodes
    integrand = np.polynomial.polynomial.polyval(x, coeffs) * (1.0 - x * x) ** k
    for kind, ell in factors:
        cols = legendre_columns(ell, x)
        integrand = integrand * cols[_KIND_OFFSET[kind]]
    return float(np.dot(rule.weights, integrand))


def derivative_product_closed_form(m: int, ell: int) -> int:
    """``int_{-1}^{1} P'_m P'_ell dx`` from the expansion of ``P'_{n+1}``.

    Zero for odd ``m - ell``; otherwise ``min(m, ell) * (min(m, ell) + 1)``.
    """
    if (m - ell) % 2:
        return 0
    k = min(m, ell)
    return k * (k + 1)


def mixed_product_closed_form(m: int, ell: int) -> int:
    """``int_{-1}^{1} P_m P'_ell dx``: 2 when ``m < ell`` with odd ``ell - m``, else 0."""
    return 2 if (m < ell and (ell - m) % 2 == 1) else 0


def hilb_envelope(n: int, t: float) -> float:
    """Amplitude ``sqrt(2 / (pi n sin t))`` of the oscillatory regime."""
    return sqrt(2.0 / (pi * n * np.sin(t)))


def hilb_approx(ell: int, psi: float, degree: int | None = None):
    """Leading-order large-degree forms of ``P_n, P'_n, P''_n`` at ``cos(psi/ell)``.

    ``degree`` defaults to ``ell``.  Requires ``1 <= psi < ell * pi / 2``.

    Returns
    -------
    (p, dp, ddp) : tuple of float
        ``ddp`` is built from the approximate ``p`` and ``dp`` through
        ``(-n^2 p + 2 dp) / sin^2``.
    """
    if psi < 1.0:
        raise ValueError("psi must be at least 1")
    if psi >= ell * pi / 2:
        raise ValueError("psi must be below ell * pi / 2")
    n = ell if degree is None else degree
    t = psi / ell
    s = np.sin(t)
    p = sqrt(2.0 / (pi * n * s)) * np.sin(psi + pi / 4)
    dp = sqrt(2.0 / (pi * n * s**3)) * n * np.sin(psi - pi / 4)
    ddp = (-(n**2) * p + 2.0 * dp) / s**2
    return float(p), float(dp), float(ddp)


def assoc_norm_squared(ell: int, m: int) -> float:
    """``int_{-1}^{1} (P_ell^m)^2 dx = 2 (ell+m)! / ((2 ell + 1) (ell-m)!)``."""
    return 2.0 * factorial(ell + m) / ((2 * ell + 1) * factorial(ell - m))
