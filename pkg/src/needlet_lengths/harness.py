"""Experiment configuration and the two studies: CLT simulation and chaos variances."""
from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from math import pi, sqrt
from pathlib import Path

import numpy as np
from scipy import integrate, stats

from .chaos import chaos2_variance, chaos2_variance_limit, chaosq_variance
from .excursion import boundary_length, expected_length
from .simulate import SphereGrid, default_grid, sample_field
from .spectral import PowerSpectrum, band_constants, build_window

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "parse_config_text",
    "load_config",
    "LengthRecord",
    "CltEntry",
    "CltReport",
    "ChaosVarianceReport",
    "run_clt",
    "run_variance_study",
    "studentized_stats",
    "wasserstein_to_normal",
    "calibration_run",
]

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def _floats(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(float(t) for t in text)
    return tuple(float(t) for t in str(text).replace(" ", "").split(",") if t)


def _ints(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(int(t) for t in text)
    return tuple(int(t) for t in str(text).replace(" ", "").split(",") if t)


@dataclass(frozen=True)
class ExperimentConfig:
    """Every knob of a run.  A run's outputs are a pure function of this value."""

    a: float = 4.5
    P: tuple = (1.0,)
    Q: tuple = (1.0,)
    B: float = 2.0
    j_list: tuple = (3, 4, 5, 6)
    z_list: tuple = (0.0,)
    replicates: int = 300
    master_seed: int = 20240501
    grid_per_degree: int = 16
    q_max: int = 8
    chaosq_j_max: int = 9
    theta_split_constant: float = 10.0
    workers: int = 1
    out_dir: str = "runs/default"

    def __post_init__(self):
        if not self.a > 4:
            raise ConfigError("a must exceed 4")
        if len(self.P) != len(self.Q) or not self.P or self.P[0] <= 0 or self.Q[0] <= 0:
            raise ConfigError("P and Q need equal degree and positive leading coefficients")
        if self.B != 2.0:
            raise ConfigError("experiments use bandwidth B = 2")
        if not self.j_list:
            raise ConfigError("j_list is empty")
        if not self.z_list:
            raise ConfigError("z_list is empty")
        if any(j < 2 or j > 14 for j in self.j_list):
            raise ConfigError("j values must lie in [2, 14]")
        if self.replicates < 50:
            raise ConfigError("replicates must be at least 50")
        if self.grid_per_degree < 4:
            raise ConfigError("grid_per_degree must be at least 4 (resolution guard)")
        if not 1 <= self.q_max <= 8:
            raise ConfigError("q_max must lie in [1, 8]")
        if self.workers < 1:
            raise ConfigError("workers must be positive")

    @property
    def spectrum(self) -> PowerSpectrum:
        return PowerSpectrum(self.a, tuple(self.P), tuple(self.Q))

    @property
    def window(self):
        return build_window(self.B)

    def grid(self, j: int) -> SphereGrid:
        return default_grid(j, self.grid_per_degree)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ExperimentConfig":
        kinds = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, raw in mapping.items():
            name = key.strip().replace("-", "_")
            if name not in kinds:
                raise ConfigError(f"unknown config key {key!r}")
            default = kinds[name].default
            try:
                if name in ("P", "Q", "z_list"):
                    val = _floats(raw)
                elif name == "j_list":
                    val = _ints(raw)
                elif isinstance(default, bool):
                    val = str(raw).lower() in ("1", "true", "yes")
                elif isinstance(default, int):
                    val = int(raw)
                elif isinstance(default, float):
                    val = float(raw)
                else:
                    val = str(raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {name}: {raw!r}") from exc
            kwargs[name] = val
        return cls(**kwargs)


def parse_config_text(text: str) -> dict:
    """``key = value`` per line; ``#`` starts a comment; lists are comma separated."""
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {n}: empty key")
        out[key] = value
    return out


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    mapping = {}
    if path is not None:
        try:
            mapping.update(parse_config_text(Path(path).read_text()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    mapping.update(overrides or {})
    return ExperimentConfig.from_mapping(mapping)


@dataclass(frozen=True)
class LengthRecord:
    replicate: int
    j: int
    z: float
    length: float
    area: float
    n_segments: int


def wasserstein_to_normal(x) -> float:
    """``(1/M) sum |x_(i) - Phi^{-1}((i - 1/2) / M)|``."""
    x = np.sort(np.asarray(x, dtype=float))
    m = x.size
    q = stats.norm.ppf((np.arange(1, m + 1) - 0.5) / m)
    return float(np.mean(np.abs(x - q)))


def studentized_stats(lengths, centre: float) -> tuple[float, float]:
    """KS and Wasserstein distances of ``(L - centre) / sd`` from N(0, 1)."""
    x = np.asarray(lengths, dtype=float)
    y = (x - centre) / np.std(x, ddof=1)
    return float(stats.kstest(y, "norm").statistic), wasserstein_to_normal(y)


@dataclass(frozen=True)
class CltEntry:
    j: int
    z: float
    M: int
    mean: float
    variance: float
    predicted_mean: float
    predicted_variance_proxy: float
    ks_measured_mean: float
    ks_predicted_mean: float
    wasserstein_measured_mean: float
    wasserstein_predicted_mean: float

    @property
    def std_error(self) -> float:
        return sqrt(self.variance / self.M)


@dataclass(frozen=True)
class CltReport:
    config: ExperimentConfig
    entries: tuple
    records: tuple = field(repr=False)

    def entry(self, j: int, z: float) -> CltEntry:
        for e in self.entries:
            if e.j == j and e.z == z:
                return e
        raise KeyError((j, z))

    def lengths(self, j: int, z: float) -> np.ndarray:
        return np.array([r.length for r in self.records if r.j == j and r.z == z])


def _replicate_task(args):
    spec, w, j, grid, seed, z_list = args
    f = sample_field(spec, w, j, grid, seed)
    return [(boundary_length(f, z)) for z in z_list]


def _simulate_band(config: ExperimentConfig, j: int, sink=None) -> list[LengthRecord]:
    spec, w, grid = config.spectrum, config.window, config.grid(j)
    tasks = [(spec, w, j, grid, (config.master_seed, r), config.z_list) for r in range(config.replicates)]
    records = []
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            results = list(pool.map(_replicate_task, tasks, chunksize=4))
    else:
        results = map(_replicate_task, tasks)
    for r, res in enumerate(results):
        for z, ex in zip(config.z_list, res):
            rec = LengthRecord(r, j, float(z), ex.length, ex.area, ex.n_segments)
            records.append(rec)
            if sink is not None:
                sink(rec)
    return records


def predicted_variance_proxy(config: ExperimentConfig, j: int, z: float) -> float:
    """Truncated chaos sum ``sum_{q=2}^{q_max}``; a proxy, not the full variance."""
    spec, w = config.spectrum, config.window
    return float(sum(chaosq_variance(spec, w, j, z, q, split_constant=config.theta_split_constant).value
                     for q in range(2, config.q_max + 1)))


def run_clt(config: ExperimentConfig, sink=None) -> CltReport:
    """Simulate, measure and summarise normality of the lengths per (j, z).

    ``sink`` receives every ``LengthRecord`` as soon as it exists, so callers
    can persist partial results if the run is interrupted.
    """
    spec, w = config.spectrum, config.window
    entries, records = [], []
    for j in config.j_list:
        log.info("simulating band j=%d with %d replicates", j, config.replicates)
        recs = _simulate_band(config, j, sink)
        records.extend(recs)
        A = band_constants(spec, w, j).A_band
        for z in config.z_list:
            L = np.array([r.length for r in recs if r.z == z])
            mean, var = float(L.mean()), float(L.var(ddof=1))
            pm = expected_length(A, z)
            ks_m, w_m = studentized_stats(L, mean)
            ks_p, w_p = studentized_stats(L, pm)
            proxy = predicted_variance_proxy(config, j, z)
            entries.append(CltEntry(j, float(z), len(L), mean, var, pm, proxy, ks_m, ks_p, w_m, w_p))
    return CltReport(config, tuple(entries), tuple(records))


@dataclass(frozen=True)
class ChaosVarianceReport:
    config: ExperimentConfig
    chaos2: tuple
    limits: dict
    entries: tuple

    def ratio(self, j: int, z: float) -> float:
        for r in self.chaos2:
            if r.j == j and r.z == z:
                return r.total / self.limits[z]
        raise KeyError((j, z))


def run_variance_study(config: ExperimentConfig) -> ChaosVarianceReport:
    """Second-chaos exact and limiting variances plus chaos-q tables up to ``q_max``."""
    spec, w = config.spectrum, config.window
    limits = {float(z): chaos2_variance_limit(spec, w, z) for z in config.z_list}
    chaos2, entries = [], []
    for j in config.j_list:
        for z in config.z_list:
            chaos2.append(chaos2_variance(spec, w, j, z))
            if j <= config.chaosq_j_max:
                for q in range(1, config.q_max + 1):
                    entries.append(chaosq_variance(spec, w, j, z, q, split_constant=config.theta_split_constant))
    return ChaosVarianceReport(config, tuple(chaos2), limits, tuple(entries))


def calibration_run(M: int, n_runs: int, seed: int = 0) -> dict:
    """KS and Wasserstein statistics of true Gaussian samples.

    ``*_known`` medians compare the raw samples with N(0, 1) and should match
    the references: ``0.8276 / sqrt(M)`` for KS and
    ``sqrt(2/pi) * int sqrt(Phi(1-Phi)) dx / sqrt(M)`` for Wasserstein.
    ``ks_median`` and ``w_median`` use studentized samples, as the CLT tables
    do; estimating mean and scale lowers them (the Lilliefors effect), so they
    are the null baseline for those tables.
    """
    rng = np.random.default_rng(seed)
    ks, ws, ks0, ws0 = [], [], [], []
    for _ in range(n_runs):
        x = rng.standard_normal(M)
        k, wd = studentized_stats(x, float(x.mean()))
        ks.append(k)
        ws.append(wd)
        ks0.append(float(stats.kstest(x, "norm").statistic))
        ws0.append(wasserstein_to_normal(x))
    wint, _ = integrate.quad(lambda t: sqrt(stats.norm.cdf(t) * stats.norm.sf(t)), -np.inf, np.inf)
    return {
        "ks_median": float(np.median(ks)),
        "ks_median_known": float(np.median(ks0)),
        "ks_reference": float(stats.kstwobign.median() / sqrt(M)),
        "w_median": float(np.median(ws)),
        "w_median_known": float(np.median(ws0)),
        "w_reference": float(sqrt(2 / pi) * wint / sqrt(M)),
    }
