"""Normalised covariance profiles of the needlet field and its frame derivatives."""
from __future__ import annotations

from dataclasses import dataclass
from math import pi, sqrt

import numpy as np

from .legendre import legendre_sums
from .spectral import band_constants, band_range, band_weights

__all__ = [
    "CovarianceProfile",
    "KernelBoundFit",
    "rho_profile",
    "needlet_kernel",
    "localization_fit",
    "localization_slope",
    "fit_grid",
]


def _theta_array(theta):
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0) or np.any(theta > pi + 1e-12):
        raise ValueError("angle must lie in [0, pi]")
    return theta


@dataclass(frozen=True)
class CovarianceProfile:
    """``theta -> (rho1, rho2, rho3, rho4)`` for one band."""

    spec: object
    window: object
    j: int

    def __call__(self, theta) -> np.ndarray:
        return np.stack(rho_profile(self.spec, self.window, self.j, theta))

    @property
    def constants(self):
        return band_constants(self.spec, self.window, self.j)


def rho_profile(spec, w, j: int, theta):
    """The four normalised covariances at angular separation ``theta``.

    rho1 = E[f(x) f(y)]                rho2 = E[f(x) d1 f(y)]
    rho3 = E[d1 f(x) d1 f(y)]          rho4 = E[d2 f(x) d2 f(y)]

    with unit-variance ``f`` and derivatives divided by ``sqrt(A)``.
    """
    theta = _theta_array(theta)
    scalar = theta.ndim == 0
    theta = np.atleast_1d(theta)
    ells, c = band_weights(spec, w, j)
    consts = band_constants(spec, w, j)
    B, A = consts.B_band, consts.A_band
    x = np.clip(np.cos(theta), -1.0, 1.0)
    rows = np.stack([c, c * ells * (ells + 1)])
    (s0, s0l), (s1, _) = legendre_sums(x, rows, int(ells[0]))
    rho1 = s0 / B
    rho2 = -s1 * np.sin(theta) / (B * sqrt(A))
    # P' cos - P'' sin^2 rewritten through the Legendre equation
    rho3 = (s0l - x * s1) / (B * A)
    rho4 = s1 / (B * A)
    if scalar:
        return tuple(float(r[0]) for r in (rho1, rho2, rho3, rho4))
    return rho1, rho2, rho3, rho4


def needlet_kernel(w, j: int, kind: int, theta):
    """Unnormalised needlet kernels built from ``b`` (not ``b**2``).

    kind 1: sum w_l P_l;  kind 2: sum w_l P'_l sin;  kind 3: sum w_l (-P'_l cos + P''_l sin^2);
    kind 4: sum w_l P'_l;  with ``w_l = b(l / B^j) (2l + 1) / (4 pi)``.
    """
    if kind not in (1, 2, 3, 4):
        raise ValueError("kind must be 1, 2, 3 or 4")
    theta = np.atleast_1d(_theta_array(theta))
    lo, hi = band_range(j, w.bandwidth)
    ells = np.arange(lo, hi + 1)
    wt = w.band_weights(j, ells) * (2 * ells + 1) / (4 * pi)
    x = np.clip(np.cos(theta), -1.0, 1.0)
    s0, s1, s2 = legendre_sums(x, wt, lo, second=True)
    if kind == 1:
        return s0
    if kind == 2:
        return s1 * np.sin(theta)
    if kind == 3:
        return -s1 * x + s2 * np.sin(theta) ** 2
    return s1


@dataclass(frozen=True)
class KernelBoundFit:
    kind: int
    M: int
    fitted_C: float
    max_violation: float
    per_j_C: dict
    envelope_C: float


_BAND_FACTOR = {1: 0, 2: 1, 3: 2, 4: 0}


def fit_grid(j: int, n: int = 1024) -> np.ndarray:
    return np.geomspace(2.0 ** (-j - 3), pi, n)


def localization_fit(spec, w, j_list, M: int, kind: int) -> KernelBoundFit:
    """Smallest ``C`` with ``|rho_kind| <= C 2^{e j} / (1 + 2^j theta)^M`` on the grid.

    ``e`` is 0, 1, 2, 0 for kinds 1 to 4, as in the printed bounds.
    ``envelope_C`` is the same fit with ``e = 0`` throughout.
    """
    if M < 2:
        raise ValueError("M must be at least 2")
    j_list = list(j_list)
    if not j_list:
        raise ValueError("need at least one band")
    per_j, env = {}, 0.0
    for j in j_list:
        theta = fit_grid(j)
        rho = np.abs(rho_profile(spec, w, j, theta)[kind - 1])
        decay = (1.0 + 2.0**j * theta) ** M
        per_j[j] = float(np.max(rho * decay) / 2.0 ** (_BAND_FACTOR[kind] * j))
        env = max(env, float(np.max(rho * decay)))
    C = max(per_j.values())
    if not np.isfinite(C):
        raise ArithmeticError("localization fit failed")
    worst = -np.inf
    for j in j_list:
        theta = fit_grid(j)
        rho = np.abs(rho_profile(spec, w, j, theta)[kind - 1])
        bound = C * 2.0 ** (_BAND_FACTOR[kind] * j) / (1.0 + 2.0**j * theta) ** M
        worst = max(worst, float(np.max(rho - bound)))
    return KernelBoundFit(kind, M, C, worst, per_j, env)


def localization_slope(spec, w, j: int, lo: float = 10.0, hi: float = 100.0,
                       kind: int = 1, n: int = 4000, n_bins: int = 12) -> float:
    """Least-squares slope of log|rho| against log(2^j theta) over [lo, hi].

    The profile oscillates through zeros, so the fit uses the upper envelope:
    the maximum of |rho| in each of ``n_bins`` log-spaced bins.
    """
    s = np.geomspace(lo, hi, n)
    theta = s / 2.0**j
    if theta[-1] > pi:
        raise ValueError("range exceeds [0, pi]")
    rho = np.abs(rho_profile(spec, w, j, theta)[kind - 1])
    edges = np.linspace(0, n, n_bins + 1).astype(int)
    xs, ys = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        k = a + int(np.argmax(rho[a:b]))
        xs.append(np.log(s[k]))
        ys.append(np.log(rho[k]))
    slope, _ = np.polyfit(xs, ys, 1)
    return float(slope)
