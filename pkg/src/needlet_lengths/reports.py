"""CSV ledgers, the JSON summary and gnuplot scripts for a run directory."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import shutil
from datetime import datetime
from pathlib import Path

import numpy as np

from .chaos import Chaos2Report, ChaosVarianceEntry
from .harness import ChaosVarianceReport, CltEntry, CltReport, ExperimentConfig

__all__ = [
    "SCHEMA",
    "LENGTH_COLUMNS",
    "VARIANCE_COLUMNS",
    "PROFILE_COLUMNS",
    "emit_reports",
    "summary_dict",
    "summary_from_dict",
    "write_profiles_csv",
    "archive_previous",
]

SCHEMA = "needlet-lengths-summary/1"
LENGTH_COLUMNS = ("replicate", "j", "z", "length", "area", "n_segments")
VARIANCE_COLUMNS = ("j", "q", "z", "value", "small_theta_piece", "large_theta_piece")
PROFILE_COLUMNS = ("theta", "rho1", "rho2", "rho3", "rho4")
CLT_COLUMNS = tuple(f.name for f in dataclasses.fields(CltEntry))
CHAOS2_COLUMNS = tuple(f.name for f in dataclasses.fields(Chaos2Report)) + ("limit", "ratio")

MANAGED = ("lengths.csv", "clt.csv", "variance.csv", "chaos2.csv", "profiles.csv",
           "summary.json", "plots")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, columns, rows) -> Path:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(columns)
    for row in rows:
        wr.writerow([_fmt(v) for v in row])
    try:
        path.write_text(buf.getvalue())
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def archive_previous(out_dir: Path) -> Path | None:
    """Move earlier outputs into ``previous-<timestamp>/`` instead of overwriting."""
    present = [out_dir / n for n in MANAGED if (out_dir / n).exists()]
    if not present:
        return None
    stamp = datetime.now().strftime("%Y%m%dT%H%M%S")
    dest = out_dir / f"previous-{stamp}"
    n = 1
    while dest.exists():
        dest = out_dir / f"previous-{stamp}-{n}"
        n += 1
    dest.mkdir(parents=True)
    for p in present:
        shutil.move(str(p), str(dest / p.name))
    return dest


def write_profiles_csv(path, theta, rhos) -> Path:
    rows = zip(theta, *rhos)
    return write_csv(Path(path), PROFILE_COLUMNS, rows)


def summary_dict(reports) -> dict:
    out: dict = {"schema": SCHEMA}
    for rep in reports:
        out["config"] = rep.config.to_dict()
        if isinstance(rep, CltReport):
            out["clt"] = [dataclasses.asdict(e) for e in rep.entries]
        elif isinstance(rep, ChaosVarianceReport):
            out["chaos2"] = [dataclasses.asdict(r) for r in rep.chaos2]
            out["chaos2_limits"] = [[z, v] for z, v in sorted(rep.limits.items())]
            out["variance"] = [
                {**dataclasses.asdict(e), "flagged": [list(t) for t in e.flagged]} for e in rep.entries
            ]
        else:
            raise TypeError(f"unsupported report {type(rep).__name__}")
    return out


def summary_from_dict(d: dict) -> list:
    """Rebuild report objects (without per-replicate records) from a summary."""
    if d.get("schema") != SCHEMA:
        raise ValueError("unknown summary schema")
    cfg = ExperimentConfig.from_mapping(d["config"])
    out = []
    if "clt" in d:
        out.append(CltReport(cfg, tuple(CltEntry(**e) for e in d["clt"]), ()))
    if "chaos2" in d:
        entries = tuple(
            ChaosVarianceEntry(**{**e, "flagged": tuple(tuple(t) for t in e["flagged"])}) for e in d["variance"]
        )
        out.append(ChaosVarianceReport(cfg, tuple(Chaos2Report(**r) for r in d["chaos2"]),
                                       {float(z): float(v) for z, v in d["chaos2_limits"]}, entries))
    return out


_PLOT_HEADER = "set datafile separator ','\nset key autotitle columnhead\nset terminal pngcairo size 900,600\n"


def _plot_scripts(names) -> dict:
    scripts = {}
    if "lengths.csv" in names:
        scripts["lengths.gp"] = _PLOT_HEADER + (
            "set output 'lengths.png'\nset xlabel 'replicate'\nset ylabel 'boundary length'\n"
            "plot '../lengths.csv' using 1:4 with points pt 7 ps 0.4 title 'L_j(z)'\n")
    if "clt.csv" in names:
        scripts["clt.gp"] = _PLOT_HEADER + (
            "set output 'clt.png'\nset xlabel 'j'\nset ylabel 'distance to N(0,1)'\n"
            "plot '../clt.csv' using 1:8 with linespoints title 'KS', "
            "'' using 1:10 with linespoints title 'Wasserstein'\n")
    if "variance.csv" in names:
        scripts["variance.gp"] = _PLOT_HEADER + (
            "set output 'variance.png'\nset xlabel 'q'\nset ylabel 'chaos variance'\nset logscale y\n"
            "plot '../variance.csv' using 2:(abs($4)) with points pt 7 title '|Var proj_q|'\n")
    if "chaos2.csv" in names:
        scripts["chaos2.gp"] = _PLOT_HEADER + (
            "set output 'chaos2.png'\nset xlabel 'j'\nset ylabel 'ratio to limit'\n"
            "plot '../chaos2.csv' using 1:(column('ratio')) with linespoints title 'chaos-2 / limit'\n")
    if "profiles.csv" in names:
        scripts["profiles.gp"] = _PLOT_HEADER + (
            "set output 'profiles.png'\nset xlabel 'theta'\n"
            "plot for [c=2:5] '../profiles.csv' using 1:c with lines\n")
    return scripts


def emit_reports(reports, out_dir, profiles=None) -> list[Path]:
    """Write ledgers, summary and plot scripts; earlier outputs are archived."""
    reports = list(reports)
    if not reports and profiles is None:
        raise ValueError("nothing to write")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    archive_previous(out_dir)
    written = []
    for rep in reports:
        if isinstance(rep, CltReport):
            written.append(write_csv(out_dir / "lengths.csv", LENGTH_COLUMNS,
                                     (dataclasses.astuple(r) for r in rep.records)))
            written.append(write_csv(out_dir / "clt.csv", CLT_COLUMNS,
                                     (dataclasses.astuple(e) for e in rep.entries)))
        elif isinstance(rep, ChaosVarianceReport):
            written.append(write_csv(out_dir / "variance.csv", VARIANCE_COLUMNS,
                                     ((e.j, e.q, e.z, e.value, e.small_theta_piece, e.large_theta_piece)
                                      for e in rep.entries)))
            written.append(write_csv(out_dir / "chaos2.csv", CHAOS2_COLUMNS,
                                     (dataclasses.astuple(r) + (rep.limits[r.z], r.total / rep.limits[r.z])
                                      for r in rep.chaos2)))
    if profiles is not None:
        theta, rhos = profiles
        written.append(write_profiles_csv(out_dir / "profiles.csv", theta, rhos))
    if reports:
        path = out_dir / "summary.json"
        path.write_text(json.dumps(summary_dict(reports), indent=2, sort_keys=True) + "\n")
        written.append(path)
    plot_dir = out_dir / "plots"
    plot_dir.mkdir(exist_ok=True)
    for name, body in _plot_scripts({p.name for p in written}).items():
        p = plot_dir / name
        p.write_text(body)
        written.append(p)
    return written
