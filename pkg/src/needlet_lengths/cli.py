"""Command-line entry point: ``needlet-lengths <subcommand> [options]``.

Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .covariance import localization_slope, rho_profile
from .excursion import boundary_length, expected_length
from .harness import ConfigError, ExperimentConfig, LengthRecord, load_config, run_clt, run_variance_study
from .reports import LENGTH_COLUMNS, archive_previous, emit_reports, summary_from_dict, write_csv
from .simulate import ResolutionError, sample_field, write_field_dump
from .spectral import asymptotic_constants, band_constants

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class NumericFailure(RuntimeError):
    pass


def _config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    for f in dataclasses.fields(ExperimentConfig):
        flag = "--" + f.name.replace("_", "-")
        parser.add_argument(flag, dest="cfg_" + f.name, default=None,
                            help=f"config field {f.name} (default {f.default!r})")


def _config_from_args(args) -> ExperimentConfig:
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    for f in dataclasses.fields(ExperimentConfig):
        v = getattr(args, "cfg_" + f.name)
        if v is not None:
            overrides[f.name] = v
    return load_config(args.config, overrides)


def cmd_window_check(cfg, args) -> int:
    w = cfg.window
    ells = np.arange(4, 4097)
    total = sum(w(ells / 2.0**j) ** 2 for j in range(0, 14))
    err = float(np.max(np.abs(total - 1.0)))
    print(f"partition of unity, l in [4, 4096]: max |sum b^2 - 1| = {err:.3e}")
    print(f"b(1) = {float(w(np.array([1.0]))[0]):.15f}")
    if err >= 1e-10:
        raise NumericFailure("partition of unity violated")
    return EXIT_OK


def cmd_constants(cfg, args) -> int:
    spec, w = cfg.spectrum, cfg.window
    ac = asymptotic_constants(spec, w)
    print(f"limB = {ac.limB:.12g}  limA = {ac.limA:.12g}  M_a = {ac.M_a:.12g}")
    print("j  B_band  A_band  (2^j)^(a-2) B / limB  (2^j)^-2 A / limA")
    for j in cfg.j_list:
        bc = band_constants(spec, w, j)
        print(f"{j} {bc.B_band:.12g} {bc.A_band:.12g} "
              f"{bc.B_band * 2.0 ** (j * (spec.a - 2)) / ac.limB:.8f} {bc.A_band / 4.0**j / ac.limA:.8f}")
    return EXIT_OK


def cmd_covariance(cfg, args) -> int:
    spec, w = cfg.spectrum, cfg.window
    j = cfg.j_list[0]
    theta = np.linspace(0.0, np.pi, args.n_theta)
    rhos = rho_profile(spec, w, j, theta)
    paths = emit_reports([], cfg.out_dir, profiles=(theta, rhos))
    if 10.0 / 2.0**j < np.pi and 100.0 / 2.0**j <= np.pi:
        print(f"j={j}: envelope log-slope of |rho1| over 2^j theta in [10, 100] = "
              f"{localization_slope(spec, w, j):.3f}")
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_variance(cfg, args) -> int:
    rep = run_variance_study(cfg)
    for r in rep.chaos2:
        print(f"j={r.j} z={r.z}: chaos-2 = {r.total:.10g}  limit ratio = {r.total / rep.limits[r.z]:.6f}")
    bad = [e for e in rep.entries if not e.converged]
    for e in bad:
        print(f"quadrature not converged: j={e.j} q={e.q} z={e.z} terms={e.flagged}", file=sys.stderr)
    for p in emit_reports([rep], cfg.out_dir):
        print(p)
    return EXIT_NUMERIC if bad else EXIT_OK


def cmd_simulate(cfg, args) -> int:
    spec, w = cfg.spectrum, cfg.window
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for j in cfg.j_list:
        grid = cfg.grid(j)
        A = band_constants(spec, w, j).A_band
        for r in range(cfg.replicates):
            f = sample_field(spec, w, j, grid, (cfg.master_seed, r))
            if args.dump and r == 0:
                write_field_dump(f, out / f"field_j{j}_r0.bin")
            for z in cfg.z_list:
                ex = boundary_length(f, z)
                rows.append(LengthRecord(r, j, float(z), ex.length, ex.area, ex.n_segments))
        for z in cfg.z_list:
            L = np.array([x.length for x in rows if x.j == j and x.z == z])
            print(f"j={j} z={z}: mean length {L.mean():.6g} +- {L.std(ddof=1) / np.sqrt(L.size):.3g} "
                  f"(expected {expected_length(A, z):.6g})")
    archive_previous(out)
    print(write_csv(out / "lengths.csv", LENGTH_COLUMNS, (dataclasses.astuple(x) for x in rows)))
    return EXIT_OK


def cmd_clt(cfg, args) -> int:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    partial = out / "lengths.partial.csv"
    with open(partial, "w") as fh:
        fh.write(",".join(LENGTH_COLUMNS) + "\n")

        def sink(rec):
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v)
                              for v in dataclasses.astuple(rec)) + "\n")
            fh.flush()

        rep = run_clt(cfg, sink)
    partial.unlink()
    for e in rep.entries:
        print(f"j={e.j} z={e.z}: mean {e.mean:.6g} (pred {e.predicted_mean:.6g})  var {e.variance:.6g} "
              f"(chaos proxy {e.predicted_variance_proxy:.6g})  KS {e.ks_measured_mean:.4f}  "
              f"W {e.wasserstein_measured_mean:.4f}")
    for p in emit_reports([rep], cfg.out_dir):
        print(p)
    return EXIT_OK


def cmd_report(cfg, args) -> int:
    path = Path(cfg.out_dir) / "summary.json"
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    for rep in summary_from_dict(data):
        for e in getattr(rep, "entries", ()):
            print(e)
        for r in getattr(rep, "chaos2", ()):
            print(r)
    return EXIT_OK


COMMANDS = {
    "window-check": cmd_window_check,
    "constants": cmd_constants,
    "covariance": cmd_covariance,
    "variance": cmd_variance,
    "simulate": cmd_simulate,
    "clt": cmd_clt,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="needlet-lengths", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        _config_flags(p)
        if name == "covariance":
            p.add_argument("--n-theta", type=int, default=513)
        if name == "simulate":
            p.add_argument("--dump", action="store_true", help="write a binary dump of replicate 0")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config_from_args(args)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, ResolutionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericFailure, ArithmeticError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
