"""Hermite coefficients, diagram constants and chaos-wise variances of the length."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb, exp, factorial, pi, sqrt

import mpmath
import numpy as np
from scipy import integrate

from .covariance import rho_profile
from .legendre import gauss_legendre, legendre_sums
from .spectral import asymptotic_constants, band_constants, band_weights

__all__ = [
    "ChaosCoefficient",
    "DiagramTerm",
    "Chaos2Report",
    "ChaosVarianceEntry",
    "hermite_eval",
    "alpha_coeff",
    "alpha_pair",
    "beta_coeff",
    "chaos_coefficients",
    "diagram_constants",
    "chaos2_variance",
    "chaos2_variance_limit",
    "chaosq_variance",
    "coeff_tail_bound",
    "gaussian_density",
]

SQRT_HALF_PI = sqrt(pi / 2.0)


def gaussian_density(z: float) -> float:
    return exp(-0.5 * z * z) / sqrt(2.0 * pi)


def hermite_eval(q: int, x):
    """Probabilists' Hermite polynomial ``H_q`` by the three-term recurrence."""
    if q < 0:
        raise ValueError("order must be non-negative")
    x = np.asarray(x, dtype=float)
    h_prev, h = np.zeros_like(x), np.ones_like(x)
    for n in range(q):
        h_prev, h = h, x * h - n * h_prev
    return h if h.ndim else float(h)


@lru_cache(maxsize=None)
def _alpha_rational(n: int, m: int) -> Fraction:
    s = n + m
    total = Fraction(0)
    for j in range(s + 1):
        term = Fraction(comb(s, j) * factorial(2 * j + 1), factorial(j) ** 2 * 4**j)
        total += term if (j + s) % 2 == 0 else -term
    pref = Fraction(factorial(2 * n) * factorial(2 * m), factorial(n) * factorial(m) * 2**s)
    return pref * total


def alpha_coeff(n: int, m: int) -> float:
    """``alpha_{2n,2m}``: Hermite coefficients of the Euclidean norm in the plane.

    The rational factor is summed exactly before the single multiplication by
    ``sqrt(pi/2)``.
    """
    if n < 0 or m < 0:
        raise ValueError("indices must be non-negative")
    return float(_alpha_rational(n, m)) * SQRT_HALF_PI


def alpha_pair(k: int, l: int) -> float:
    """``alpha_{k,l}``, zero unless both indices are even."""
    if k % 2 or l % 2:
        return 0.0
    return alpha_coeff(k // 2, l // 2)


def beta_coeff(ell: int, z: float) -> float:
    """``phi(z) H_ell(z)``, the Hermite coefficients of the level indicator."""
    return gaussian_density(z) * hermite_eval(ell, z)


@dataclass(frozen=True)
class ChaosCoefficient:
    q: int
    u: int
    k: int
    alpha: float
    beta: float
    c_quk: float


def chaos_coefficients(q: int, z: float, prune: bool = True) -> list[ChaosCoefficient]:
    out = []
    for u in range(q + 1):
        beta = beta_coeff(q - u, z)
        for k in range(u + 1):
            alpha = alpha_pair(k, u - k)
            c = alpha * beta / (factorial(k) * factorial(u - k) * factorial(q - u))
            if prune and c == 0.0:
                continue
            out.append(ChaosCoefficient(q, u, k, alpha, beta, c))
    return out


@dataclass(frozen=True)
class DiagramTerm:
    """One admissible pairing count between the two triples of Hermite factors.

    The exponents count edges of each covariance type: value-value
    (``alpha_exp``), value-gradient in either direction (``beta_exp``),
    gradient-gradient along the geodesic (``gamma_exp``) and across it
    (``delta_exp``).  ``sign`` is ``(-1)**(q - u2 - alpha_exp)`` and accounts
    for the edges from the first derivative at the first point to the value
    at the second, whose covariance is ``-rho2``.
    """

    alpha_exp: int
    beta_exp: int
    gamma_exp: int
    delta_exp: int
    M_alpha: int
    sign: int = 1


def diagram_constants(q: int, u1: int, k1: int, u2: int, k2: int) -> list[DiagramTerm]:
    if not (0 <= k1 <= u1 <= q and 0 <= k2 <= u2 <= q):
        raise ValueError("need 0 <= k <= u <= q")
    if u1 - k1 != u2 - k2:
        return []
    delta = u1 - k1
    terms = []
    for a in range(max(q - k1 - u2, 0), min(q - u1, q - u2) + 1):
        beta = 2 * q - u1 - u2 - 2 * a
        gamma = k1 + u2 + a - q
        M = factorial(q - u1) * factorial(k1) * factorial(delta) * comb(q - u2, a) * comb(k2, q - u1 - a)
        if M == 0:
            continue
        sign = -1 if (q - u2 - a) % 2 else 1
        terms.append(DiagramTerm(a, beta, gamma, delta, M, sign))
    return terms


@dataclass(frozen=True)
class Chaos2Report:
    j: int
    z: float
    A_band: float
    S1: float
    S2: float
    S3: float
    S4: float
    S3_bound: float
    S4_leading: float
    total: float
    total_closed_form: float


def chaos2_variance(spec, w, j: int, z: float) -> Chaos2Report:
    """Exact second-chaos variance of the boundary length at level ``z``.

    ``S1``, ``S2`` and the leading part of ``S4`` are orthogonality sums.
    ``S3`` and ``S4`` are full quadrature values.  ``S3_bound`` is the bound
    obtained from the printed derivative-product constant ``2(l1 + 1)``; it
    does not dominate ``S3`` (see ``total_closed_form``, which uses the
    identity ``S3 + S4 = 4 pi^2/(B A)^2 sum c^2 2 l^2 (l+1)^2/(2l+1)``).
    """
    if j < 2:
        raise ValueError("band index must be at least 2")
    ells, c = band_weights(spec, w, j)
    consts = band_constants(spec, w, j)
    B, A = consts.B_band, consts.A_band
    ell = ells.astype(float)
    zz = z * z - 1.0
    diag = c**2 * 2.0 / (2 * ell + 1)
    S1 = zz**2 * 16 * pi**2 / B**2 * np.sum(diag)
    S2 = zz * 16 * pi**2 / (B**2 * A) * np.sum(diag * ell * (ell + 1))
    pref = 4 * pi**2 / (B**2 * A**2)
    S4_leading = pref * np.sum(diag * (ell + 1) ** 4)
    S3_bound = pref * np.sum(c * 2 * (ell + 1)) * B

    rule = gauss_legendre(int(ells[-1]) + 8)
    x = rule.nodes
    rows = np.stack([c, c * ell * (ell + 1)])
    (s0, s0l), (s1, _) = legendre_sums(x, rows, int(ells[0]))
    S3 = pref * float(np.dot(rule.weights, s1 * s1))
    bracket = s0l - x * s1
    S4 = pref * float(np.dot(rule.weights, bracket * bracket))

    phi2 = gaussian_density(z) ** 2
    total = A * pi / 8 * phi2 * (S1 + S2 + S3 + S4)
    closed = 16 * pi**2 / B**2 * np.sum(diag * (zz + ell * (ell + 1) / (2 * A)) ** 2)
    return Chaos2Report(j, z, A, float(S1), float(S2), S3, S4, float(S3_bound),
                        float(S4_leading), float(total), float(A * pi / 8 * phi2 * closed))


def chaos2_variance_limit(spec, w, z: float) -> float:
    """High-frequency limit of the second-chaos variance."""
    ac = asymptotic_constants(spec, w)
    Ma, a, Bw = ac.M_a, spec.a, w.bandwidth

    def b2(x):
        return float(w.b_squared(np.array([x]))[0])

    i1, _ = integrate.quad(lambda x: b2(x) * x ** (1 - a), 1 / Bw, Bw, points=[1.0], limit=200, epsrel=1e-12)
    i4, _ = integrate.quad(lambda x: b2(x) ** 2 * x ** (1 - 2 * a) * (x * x / Ma + z * z - 1) ** 2,
                           1 / Bw, Bw, points=[1.0], limit=200, epsrel=1e-12)
    return pi**3 * gaussian_density(z) ** 2 * Ma / i1**2 * i4


@dataclass(frozen=True)
class ChaosVarianceEntry:
    j: int
    q: int
    z: float
    value: float
    small_theta_piece: float
    large_theta_piece: float
    theta_split: float
    converged: bool
    flagged: tuple = field(default=())


def _grouped_terms(q: int, z: float):
    """Exponent tuple -> summed ``C1 C2 sign M`` over all coefficient pairs."""
    coeffs = chaos_coefficients(q, z)
    groups: dict[tuple, float] = defaultdict(float)
    origin: dict[tuple, tuple] = {}
    for c1 in coeffs:
        for c2 in coeffs:
            for t in diagram_constants(q, c1.u, c1.k, c2.u, c2.k):
                key = (t.alpha_exp, t.beta_exp, t.gamma_exp, t.delta_exp)
                groups[key] += c1.c_quk * c2.c_quk * t.sign * t.M_alpha
                origin.setdefault(key, (c1.u, c1.k, c2.u, c2.k, t.alpha_exp))
    return dict(sorted(groups.items())), origin


def _piece_integrals(spec, w, j, a, b, n, keys):
    x, wts = gauss_legendre(n).mapped(a, b)
    theta = np.arccos(np.clip(x, -1.0, 1.0))
    r1, r2, r3, r4 = rho_profile(spec, w, j, theta)
    out = {}
    for key in keys:
        al, be, ga, de = key
        out[key] = float(np.dot(wts, r1**al * r2**be * r3**ga * r4**de))
    return out


def chaosq_variance(spec, w, j: int, z: float, q: int, theta_split: float | None = None,
                    split_constant: float = 10.0, rtol: float = 1e-8) -> ChaosVarianceEntry:
    """Variance of the projection of the boundary length onto chaos ``q``.

    Each two-point integral is a polynomial in ``cos(theta)`` of degree at most
    ``q * 2^(j+1)`` (the value-gradient exponent is always even), so a
    Gauss-Legendre rule of matching order on each side of ``theta_split`` is
    exact.  A second rule with 8 extra nodes guards against loss of accuracy;
    disagreement beyond ``rtol`` is flagged with the offending ``(u1, k1, u2,
    k2, alpha)`` tuple.
    """
    if q < 1:
        raise ValueError("chaos order must be at least 1")
    if theta_split is None:
        theta_split = min(split_constant / 2.0**j, pi / 2)
    A = band_constants(spec, w, j).A_band
    groups, origin = _grouped_terms(q, z)
    if not groups:
        return ChaosVarianceEntry(j, q, z, 0.0, 0.0, 0.0, theta_split, True)
    L = band_weights(spec, w, j)[0][-1]
    n = (q * int(L) + 2) // 2 + 2
    xs = float(np.cos(theta_split))
    keys = list(groups)
    small = _piece_integrals(spec, w, j, xs, 1.0, n, keys)
    large = _piece_integrals(spec, w, j, -1.0, xs, n, keys)
    small_chk = _piece_integrals(spec, w, j, xs, 1.0, n + 8, keys)
    large_chk = _piece_integrals(spec, w, j, -1.0, xs, n + 8, keys)
    flagged = []
    for key in keys:
        for v, v2 in ((small[key], small_chk[key]), (large[key], large_chk[key])):
            if abs(v - v2) > rtol * max(abs(v), abs(v2), 1e-300) and abs(v - v2) > 1e-15:
                flagged.append(origin[key])
                break
    scale = A * 8 * pi**2
    s_piece = scale * sum(groups[k] * small[k] for k in keys)
    l_piece = scale * sum(groups[k] * large[k] for k in keys)
    return ChaosVarianceEntry(j, q, z, s_piece + l_piece, s_piece, l_piece, theta_split,
                              not flagged, tuple(flagged))


def coeff_tail_bound(z: float, q_max: int, dps: int = 50):
    """Rows ``(q, lhs, rhs, holds)`` for the coefficient tail estimate.

    ``lhs = |sum_u sum_k C_quk|`` in extended precision, ``rhs = C_z 2^q /
    sqrt((q-1)!)`` with ``C_z`` fixed by equality at ``q = 2``.
    """
    if q_max > 40:
        raise ValueError("q_max must not exceed 40")
    with mpmath.workdps(dps):
        zz = mpmath.mpf(z)
        phi = mpmath.npdf(zz)

        def lhs(q):
            s = mpmath.mpf(0)
            for u in range(0, q + 1, 2):
                beta = phi * mpmath.hermite(q - u, zz / mpmath.sqrt(2)) * mpmath.mpf(2) ** (-(q - u) / mpmath.mpf(2))
                for k in range(0, u + 1, 2):
                    a = mpmath.mpf(_alpha_rational(k // 2, (u - k) // 2).numerator) / _alpha_rational(k // 2, (u - k) // 2).denominator
                    a *= mpmath.sqrt(mpmath.pi / 2)
                    s += a * beta / (mpmath.factorial(k) * mpmath.factorial(u - k) * mpmath.factorial(q - u))
            return abs(s)

        Cz = lhs(2) * mpmath.sqrt(mpmath.factorial(1)) / 4
        rows = []
        for q in range(1, q_max + 1):
            left = lhs(q)
            right = Cz * mpmath.mpf(2) ** q / mpmath.sqrt(mpmath.factorial(q - 1))
            rows.append((q, float(left), float(right), bool(left <= right * (1 + mpmath.mpf(10) ** -12))))
    return rows
