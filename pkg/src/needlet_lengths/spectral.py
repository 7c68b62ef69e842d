"""Needlet windows, the rational power spectrum and the band constants."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import ceil, floor, pi

import numpy as np
from scipy import integrate
from scipy.special import roots_legendre

__all__ = [
    "NeedletWindow",
    "BoxcarWindow",
    "SingleDegreeWindow",
    "PowerSpectrum",
    "FlatSpectrum",
    "BandConstants",
    "AsymptoticConstants",
    "build_window",
    "band_range",
    "band_weights",
    "band_constants",
    "asymptotic_constants",
    "MAX_BAND",
]

MAX_BAND = 16

_BUMP_NODES = 128


def _bump(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


@lru_cache(maxsize=1)
def _bump_rule():
    nodes, weights = roots_legendre(_BUMP_NODES)
    return nodes, weights


def _bump_cdf(u):
    """Normalised cumulative integral of the bump from -1 to ``u``."""
    u = np.clip(np.asarray(u, dtype=float), -1.0, 1.0)
    nodes, weights = _bump_rule()
    half = 0.5 * (u + 1.0)
    # map [-1, 1] onto [-1, u]
    pts = half[..., None] * (nodes + 1.0) - 1.0
    partial = half * np.sum(weights * _bump(pts), axis=-1)
    total = _bump_total()
    return partial / total


@lru_cache(maxsize=1)
def _bump_total() -> float:
    nodes, weights = _bump_rule()
    return float(np.dot(weights, _bump(nodes)))


@dataclass(frozen=True)
class NeedletWindow:
    """Smooth window with support ``[1/B, B]`` whose squares tile the half line.

    ``b(x)**2 = plateau(x / B) - plateau(x)`` where ``plateau`` equals 1 on
    ``[0, 1/B]``, decays smoothly and vanishes beyond 1, so dyadic sums of
    ``b**2`` telescope to exactly 1.
    """

    bandwidth: float = 2.0
    smooth: bool = field(default=True, init=False)

    def plateau(self, t):
        B = self.bandwidth
        t = np.asarray(t, dtype=float)
        out = np.where(t <= 1.0 / B, 1.0, 0.0)
        mid = (t > 1.0 / B) & (t < 1.0)
        if np.any(mid):
            arg = 1.0 - 2.0 * B / (B - 1.0) * (t[mid] - 1.0 / B)
            out = out.astype(float)
            out[mid] = _bump_cdf(arg)
        return out

    def b_squared(self, x):
        x = np.asarray(x, dtype=float)
        val = self.plateau(x / self.bandwidth) - self.plateau(x)
        return np.clip(val, 0.0, None)

    def __call__(self, x):
        return np.sqrt(self.b_squared(x))

    def band_weights(self, j: int, ells: np.ndarray) -> np.ndarray:
        return self(np.asarray(ells, dtype=float) / self.bandwidth**j)


@dataclass(frozen=True)
class BoxcarWindow:
    """Non-smooth test window: ``b = 1`` on the closed band ``[1/B, B]``."""

    bandwidth: float = 2.0
    smooth: bool = field(default=False, init=False)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        B = self.bandwidth
        return np.where((x >= 1.0 / B - 1e-12) & (x <= B + 1e-12), 1.0, 0.0)

    def b_squared(self, x):
        return self(x)

    def band_weights(self, j: int, ells: np.ndarray) -> np.ndarray:
        return self(np.asarray(ells, dtype=float) / self.bandwidth**j)


@dataclass(frozen=True)
class SingleDegreeWindow:
    """Non-smooth test window keeping one multipole ``degree`` in every band."""

    degree: int
    bandwidth: float = 2.0
    smooth: bool = field(default=False, init=False)

    def band_weights(self, j: int, ells: np.ndarray) -> np.ndarray:
        return np.where(np.asarray(ells) == self.degree, 1.0, 0.0)


def build_window(B: float = 2.0) -> NeedletWindow:
    if not B > 1.0:
        raise ValueError("bandwidth must exceed 1")
    total = _bump_total()
    if not np.isfinite(total) or total <= 0.0:
        raise ArithmeticError("degenerate bump normalisation")
    return NeedletWindow(float(B))


@dataclass(frozen=True)
class PowerSpectrum:
    """``C_l = l**(-a) * P(l) / Q(l)``; coefficients are highest degree first."""

    a: float = 4.5
    P_coeffs: tuple = (1.0,)
    Q_coeffs: tuple = (1.0,)
    scale: float = 1.0

    def __post_init__(self):
        if not self.a > 4.0:
            raise ValueError("decay exponent a must exceed 4")
        if len(self.P_coeffs) != len(self.Q_coeffs):
            raise ValueError("P and Q must have equal degree")
        if self.P_coeffs[0] <= 0 or self.Q_coeffs[0] <= 0:
            raise ValueError("leading coefficients must be positive")

    @property
    def G(self) -> float:
        """Limit of ``l**a C_l``."""
        return self.scale * self.P_coeffs[0] / self.Q_coeffs[0]

    def ratio(self, ells):
        ells = np.asarray(ells, dtype=float)
        return self.scale * np.polyval(self.P_coeffs, ells) / np.polyval(self.Q_coeffs, ells)

    def __call__(self, ells):
        ells = np.asarray(ells, dtype=float)
        return ells ** (-self.a) * self.ratio(ells)

    def band_bound(self, j: int) -> float:
        """Smallest ``c0`` with ``1/c0 <= l**a C_l <= c0`` on band ``j``."""
        lo, hi = band_range(j)
        r = self.ratio(np.arange(lo, hi + 1))
        if np.any(r <= 0):
            raise ValueError("spectrum not positive on band")
        return float(max(r.max(), 1.0 / r.min()))


@dataclass(frozen=True)
class FlatSpectrum:
    """Test spectrum ``C_l = 1``; violates the decay condition on purpose."""

    G: float = 1.0

    def __call__(self, ells):
        return np.ones_like(np.asarray(ells, dtype=float)) * self.G


@dataclass(frozen=True)
class BandConstants:
    j: int
    B_band: float
    A_band: float
    ell_min: int
    ell_max: int


def band_range(j: int, B: float = 2.0) -> tuple[int, int]:
    if j < 1:
        raise ValueError("band index must be at least 1")
    if j > MAX_BAND:
        raise OverflowError(f"band j={j} beyond the desk-scale cap {MAX_BAND}")
    return int(ceil(B ** (j - 1) - 1e-9)), int(floor(B ** (j + 1) + 1e-9))


def band_weights(spec: PowerSpectrum, w, j: int):
    """Degrees of band ``j`` and ``c_l = b(l/B^j)^2 C_l (2l+1)/(4 pi)``."""
    lo, hi = band_range(j, w.bandwidth)
    ells = np.arange(lo, hi + 1)
    b = w.band_weights(j, ells)
    c = b**2 * spec(ells) * (2 * ells + 1) / (4 * pi)
    return ells, c


def band_constants(spec: PowerSpectrum, w, j: int) -> BandConstants:
    ells, c = band_weights(spec, w, j)
    B_band = float(np.sum(c))
    if B_band <= 0.0:
        raise ValueError(f"band {j} carries no power")
    A_band = float(np.sum(c * ells * (ells + 1) / 2.0) / B_band)
    return BandConstants(j, B_band, A_band, int(ells[0]), int(ells[-1]))


@dataclass(frozen=True)
class AsymptoticConstants:
    limB: float
    limA: float
    M_a: float
    G: float
    a: float
    window: object = field(repr=False, compare=False)

    def p_moment(self, p: float) -> float:
        """``lim (2^j)^{a-2-p} sum_l b^2 C_l (2l+1)/(4 pi) l^p``."""
        return self.G / (2 * pi) * _window_moment(self.window, p + 1.0 - self.a)


def _window_moment(w, power: float, b_power: int = 2) -> float:
    B = w.bandwidth

    def f(x):
        return float(w.b_squared(np.array([x]))[0]) ** (b_power // 2) * x**power

    val, _ = integrate.quad(f, 1.0 / B, B, points=[1.0], limit=200, epsabs=0.0, epsrel=1e-12)
    return val


def asymptotic_constants(spec: PowerSpectrum, w) -> AsymptoticConstants:
    i1 = _window_moment(w, 1.0 - spec.a)
    i3 = _window_moment(w, 3.0 - spec.a)
    limB = spec.G / (2 * pi) * i1
    # gradient normaliser limit assembled from the l(l+1)/2-weighted sum
    limA = spec.G / (4 * pi) * i3 / limB
    return AsymptoticConstants(limB, limA, i3 / i1, spec.G, spec.a, w)
