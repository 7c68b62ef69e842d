"""Seeded synthesis of the normalised needlet field and its frame derivatives.

The field is expanded in real orthonormal spherical harmonics with i.i.d.
standard Gaussian coefficients.  For every colatitude ring the m-modes are
accumulated first (``np.add.reduceat`` over contiguous m-blocks) and then
summed over longitude with one inverse real FFT per ring.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from functools import lru_cache
from math import pi, sqrt
from pathlib import Path

import numpy as np

from .covariance import rho_profile
from .spectral import band_constants, band_weights

__all__ = [
    "SphereGrid",
    "FieldSample",
    "FieldSynthesizer",
    "ResolutionError",
    "default_grid",
    "replicate_rng",
    "sample_field",
    "field_covariance_selftest",
    "write_field_dump",
    "read_field_dump",
]


class ResolutionError(ValueError):
    """The grid is too coarse for the requested band."""


@dataclass(frozen=True)
class SphereGrid:
    n_theta: int
    n_phi: int
    theta_cap: float

    def __post_init__(self):
        if self.n_theta < 16 or self.n_phi < 32:
            raise ValueError("grid needs n_theta >= 16 and n_phi >= 32")
        if self.theta_cap < pi / self.n_theta - 1e-15:
            raise ValueError("theta_cap must be at least pi / n_theta")
        if self.theta_cap >= pi / 4:
            raise ValueError("theta_cap too large")

    @property
    def theta(self) -> np.ndarray:
        return np.linspace(self.theta_cap, pi - self.theta_cap, self.n_theta)

    @property
    def phi(self) -> np.ndarray:
        return 2 * pi * np.arange(self.n_phi) / self.n_phi

    @property
    def d_theta(self) -> float:
        return (pi - 2 * self.theta_cap) / (self.n_theta - 1)

    @property
    def d_phi(self) -> float:
        return 2 * pi / self.n_phi

    def check_band(self, j: int) -> None:
        ell_max = 2 ** (j + 1)
        if self.n_theta < 4 * ell_max:
            raise ResolutionError(f"n_theta={self.n_theta} below 4*2^(j+1)={4 * ell_max} for j={j}")
        if self.n_phi // 2 <= ell_max:
            raise ResolutionError(f"n_phi={self.n_phi} cannot carry order {ell_max}")


def default_grid(j: int, per_degree: int = 16) -> SphereGrid:
    """``n_theta = per_degree * 2^(j+1)``, ``n_phi = 2 n_theta``, cap one step."""
    n_theta = max(per_degree * 2 ** (j + 1), 16)
    return SphereGrid(n_theta, 2 * n_theta, pi / n_theta)


@dataclass(frozen=True, eq=False)
class FieldSample:
    grid: SphereGrid
    values: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    j: int
    seed: tuple


def replicate_rng(master_seed: int, replicate: int) -> np.random.Generator:
    """Independent stream for one replicate: ``SeedSequence(master, spawn_key=(r,))``."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(replicate,)))


def _normalised_alf(ells: np.ndarray, theta: np.ndarray):
    """Orthonormal associated Legendre functions and their theta-derivatives.

    Returns ``(lam, dlam, pair_l, pair_m)`` with columns ordered by ``m`` then
    ``l``; only degrees in ``ells`` are kept.
    """
    x = np.cos(theta)
    s = np.sin(theta)
    keep = set(int(l) for l in ells)
    l_max = int(max(ells))
    cols, dcols, pl, pm = [], [], [], []
    pmm = np.full_like(x, sqrt(1.0 / (4 * pi)))
    for m in range(l_max + 1):
        if m > 0:
            pmm = -pmm * s * sqrt((2 * m + 1) / (2.0 * m))
        prev2 = None
        prev = pmm
        for l in range(m, l_max + 1):
            if l == m:
                cur = pmm
            elif l == m + 1:
                cur = x * sqrt(2 * m + 3) * pmm
            else:
                a = sqrt((4.0 * l * l - 1) / (l * l - m * m))
                b = sqrt(((l - 1) ** 2 - m * m) / (4.0 * (l - 1) ** 2 - 1))
                cur = a * (x * prev - b * prev2)
            if l in keep:
                if l == m:
                    lower = np.zeros_like(x)
                else:
                    lower = prev
                coef = sqrt((2 * l + 1) / (2 * l - 1) * (l * l - m * m)) if l > m else 0.0
                cols.append(cur)
                dcols.append((l * x * cur - coef * lower) / s)
                pl.append(l)
                pm.append(m)
            if l > m:
                prev2, prev = prev, cur
            else:
                prev2, prev = None, cur
    return (np.array(cols).T.copy(), np.array(dcols).T.copy(),
            np.array(pl, dtype=int), np.array(pm, dtype=int))


class FieldSynthesizer:
    """Precomputed harmonic tables for one (spectrum, window, band, grid)."""

    def __init__(self, spec, w, j: int, grid: SphereGrid):
        grid.check_band(j)
        self.grid, self.j = grid, j
        ells, c = band_weights(spec, w, j)
        consts = band_constants(spec, w, j)
        self.A = consts.A_band
        b = w.band_weights(j, ells)
        amp_l = b * np.sqrt(spec(ells)) / sqrt(consts.B_band)
        live = amp_l > 0
        ells, amp_l = ells[live], amp_l[live]
        theta = grid.theta
        lam, dlam, self.pair_l, self.pair_m = _normalised_alf(ells, theta)
        amp = dict(zip(ells.tolist(), amp_l.tolist()))
        self.amp = np.array([amp[l] * (sqrt(2.0) if m > 0 else 1.0)
                             for l, m in zip(self.pair_l, self.pair_m)])
        self.m_values, self.block_starts = np.unique(self.pair_m, return_index=True)
        self.n_pairs = len(self.pair_l)
        ends = np.append(self.block_starts[1:], self.n_pairs)
        # per-order tables stacked as (value, theta-derivative) for one matmul each
        self.blocks = [(slice(a, b), np.concatenate([lam[:, a:b], dlam[:, a:b]]))
                       for a, b in zip(self.block_starts, ends)]
        self.inv_sin = 1.0 / np.sin(theta)

    def draw(self, rng: np.random.Generator):
        xi = rng.standard_normal(2 * self.n_pairs)
        xc, xs = xi[: self.n_pairs], xi[self.n_pairs:]
        xs = np.where(self.pair_m == 0, 0.0, xs)
        return xc, xs

    def synthesize(self, xc: np.ndarray, xs: np.ndarray, seed=(None, None)) -> FieldSample:
        g = self.grid
        wcs = np.stack([self.amp * xc, self.amp * xs], axis=1)
        nt = g.n_theta
        out = np.empty((2 * nt, len(self.blocks), 2))
        for i, (sl, table) in enumerate(self.blocks):
            out[:, i, :] = table @ wcs[sl]
        a_val, b_val = out[:nt, :, 0], out[:nt, :, 1]
        a_dth, b_dth = out[nt:, :, 0], out[nt:, :, 1]
        m = self.m_values.astype(float)
        rs = self.inv_sin[:, None]
        a_dph, b_dph = m * b_val * rs, -m * a_val * rs
        scale = 1.0 / sqrt(self.A)
        values = self._to_grid(a_val, b_val)
        d1 = self._to_grid(a_dth, b_dth) * scale
        d2 = self._to_grid(a_dph, b_dph) * scale
        return FieldSample(g, values, d1, d2, self.j, tuple(seed))

    def _to_grid(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        n = self.grid.n_phi
        spec = np.zeros((a.shape[0], n // 2 + 1), dtype=complex)
        half = 0.5 * n * (a - 1j * b)
        spec[:, self.m_values] = half
        zero = self.m_values == 0
        if np.any(zero):
            spec[:, 0] = n * a[:, zero][:, 0]
        return np.fft.irfft(spec, n, axis=1)


@lru_cache(maxsize=4)
def _synthesizer(spec, w, j, grid) -> FieldSynthesizer:
    return FieldSynthesizer(spec, w, j, grid)


def sample_field(spec, w, j: int, grid: SphereGrid, seed, coefficients=None) -> FieldSample:
    """One replicate of the normalised field on ``grid``.

    ``seed`` is ``(master_seed, replicate_index)``.  ``coefficients`` is a
    test hook: a pair ``(cos_coeffs, sin_coeffs)`` of standard-normal scale
    coefficients replacing the random draw, ordered like
    ``FieldSynthesizer.pair_l / pair_m``.
    """
    syn = _synthesizer(spec, w, j, grid)
    if coefficients is None:
        master, rep = seed
        xc, xs = syn.draw(replicate_rng(master, rep))
    else:
        xc, xs = (np.asarray(c, dtype=float) for c in coefficients)
    return syn.synthesize(xc, xs, seed)


@dataclass(frozen=True)
class CovarianceSelfTest:
    angles: np.ndarray
    empirical: np.ndarray
    predicted: np.ndarray
    std_error: np.ndarray
    cross_d2: np.ndarray
    max_standardized: float


def field_covariance_selftest(samples, angles, spec, w, n_longitudes: int = 16) -> CovarianceSelfTest:
    """Compare empirical meridian-pair covariances with the analytic profile.

    Rows of ``empirical`` hold, per angle, the estimates of
    ``E[f f], E[f(x) d1 f(y)], E[d1 d1], E[d2 d2]`` with ``y`` south of ``x``
    along a meridian.  Each sample contributes its average over
    ``n_longitudes`` equally spaced meridians; standard errors are taken
    across samples.  Angles are rounded to whole colatitude steps.
    ``samples`` may be a generator; only one field is held at a time.
    """
    angles = np.asarray(angles, dtype=float)
    g = j = steps = cols = None
    rows = []
    for s in samples:
        if g is None:
            g, j = s.grid, s.j
            steps = np.rint(angles / g.d_theta).astype(int)
            cols = np.linspace(0, g.n_phi, n_longitudes, endpoint=False).astype(int)
        elif s.grid != g or s.j != j:
            raise ValueError("samples must share grid and band")
        row = np.empty((len(steps), 5))
        for ai, k in enumerate(steps):
            i0 = g.n_theta // 2 - k // 2
            i1 = i0 + k
            fx, fy = s.values[i0, cols], s.values[i1, cols]
            row[ai] = (np.mean(fx * fy), np.mean(fx * s.d1[i1, cols]),
                       np.mean(s.d1[i0, cols] * s.d1[i1, cols]),
                       np.mean(s.d2[i0, cols] * s.d2[i1, cols]), np.mean(fx * s.d2[i1, cols]))
        rows.append(row)
    if len(rows) < 2:
        raise ValueError("need several samples")
    est = np.stack(rows, axis=2)
    real_angles = steps * g.d_theta
    mean = est.mean(axis=2)
    se = est.std(axis=2, ddof=1) / sqrt(len(rows))
    pred = np.stack(rho_profile(spec, w, j, real_angles), axis=1)
    z = np.abs(mean[:, :4] - pred) / np.maximum(se[:, :4], 1e-12)
    return CovarianceSelfTest(real_angles, mean[:, :4], pred, se[:, :4], mean[:, 4], float(z.max()))


_MAGIC = b"NDLF"
_VERSION = 1
_HEADER = struct.Struct("<4sIIIIdqq")


def write_field_dump(sample: FieldSample, path) -> tuple[Path, Path]:
    """Little-endian header then ``values, d1, d2`` as row-major float64."""
    path = Path(path)
    g = sample.grid
    master, rep = (sample.seed + (None, None))[:2]
    master = -1 if master is None else int(master)
    rep = -1 if rep is None else int(rep)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, sample.j, g.n_theta, g.n_phi, g.theta_cap, master, rep))
        for arr in (sample.values, sample.d1, sample.d2):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    side = path.with_suffix(path.suffix + ".json")
    meta = {
        "format": "needlet-field-dump",
        "version": _VERSION,
        "byte_order": "little",
        "header_bytes": _HEADER.size,
        "header_layout": "magic[4s] version[u32] j[u32] n_theta[u32] n_phi[u32] theta_cap[f64] master_seed[i64] replicate[i64]",
        "arrays": ["values", "d1", "d2"],
        "dtype": "float64",
        "order": "row-major (theta, phi)",
        "j": sample.j,
        "n_theta": g.n_theta,
        "n_phi": g.n_phi,
        "theta_cap": g.theta_cap,
        "seed": [master, rep],
    }
    side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path, side


def read_field_dump(path) -> FieldSample:
    raw = Path(path).read_bytes()
    magic, version, j, nt, nph, cap, master, rep = _HEADER.unpack_from(raw, 0)
    if magic != _MAGIC or version != _VERSION:
        raise ValueError(f"{path}: not a field dump")
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(3, nt, nph)
    grid = SphereGrid(nt, nph, cap)
    return FieldSample(grid, body[0].copy(), body[1].copy(), body[2].copy(), j, (master, rep))
