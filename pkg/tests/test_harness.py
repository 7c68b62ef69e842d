from __future__ import annotations

import json

import numpy as np
import pytest

from needlet_lengths.cli import main
from needlet_lengths.harness import (
    ConfigError,
    ExperimentConfig,
    calibration_run,
    load_config,
    parse_config_text,
    run_clt,
    run_variance_study,
    studentized_stats,
    wasserstein_to_normal,
)
from needlet_lengths.reports import SCHEMA, emit_reports, summary_dict, summary_from_dict


def test_parse_config_text():
    text = "# header\na = 5.0\nj_list = 3, 4  # trailing\n\nz_list=0,1.5\n"
    assert parse_config_text(text) == {"a": "5.0", "j_list": "3, 4", "z_list": "0,1.5"}
    with pytest.raises(ConfigError):
        parse_config_text("no equals sign")


def test_load_config_file_and_overrides(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("replicates = 80\nj_list = 3,4\n")
    cfg = load_config(p, {"replicates": "90", "master-seed": "5"})
    assert cfg.replicates == 90 and cfg.j_list == (3, 4) and cfg.master_seed == 5
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.cfg")


@pytest.mark.parametrize("bad", [
    {"a": "3.9"}, {"B": "3"}, {"replicates": "10"}, {"j_list": "1"}, {"q_max": "9"},
    {"grid_per_degree": "2"}, {"z_list": ""}, {"nonsense": "1"}, {"replicates": "many"}, {"P": "1,2"},
])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping(bad)


def test_config_dict_roundtrip():
    cfg = ExperimentConfig(j_list=(3, 5), z_list=(0.0, 1.0), P=(1.0, 2.0), Q=(1.0, 3.0))
    assert ExperimentConfig.from_mapping(cfg.to_dict()) == cfg


def test_wasserstein_of_exact_quantiles_is_zero():
    from scipy import stats

    m = 200
    q = stats.norm.ppf((np.arange(1, m + 1) - 0.5) / m)
    assert wasserstein_to_normal(q[::-1]) == pytest.approx(0.0, abs=1e-15)
    assert wasserstein_to_normal(q + 0.3) == pytest.approx(0.3)


def test_studentized_stats_shift_invariant():
    x = np.random.default_rng(1).normal(size=300)
    a = studentized_stats(x, x.mean())
    b = studentized_stats(5 * x + 2, 5 * x.mean() + 2)
    assert a == pytest.approx(b)


def test_studentized_lengths_are_standardised():
    x = np.random.default_rng(2).gamma(3.0, size=400)
    y = (x - x.mean()) / np.std(x, ddof=1)
    assert abs(y.mean()) < 1e-12 and abs(np.var(y, ddof=1) - 1) < 1e-12


def test_calibration_within_factor_two_over_fifty_runs():
    cal = calibration_run(500, 50, seed=7)
    for key, ref in (("ks_median", "ks_reference"), ("w_median", "w_reference")):
        assert 0.5 < cal[key] / cal[ref] < 2.0
    assert cal["ks_median_known"] == pytest.approx(0.9 / np.sqrt(500), rel=0.15)


def test_calibration_matches_references():
    cal = calibration_run(300, 200, seed=3)
    assert cal["ks_median_known"] == pytest.approx(cal["ks_reference"], rel=0.08)
    assert cal["w_median_known"] == pytest.approx(cal["w_reference"], rel=0.15)
    # studentizing lowers both statistics
    assert cal["ks_median"] < 0.85 * cal["ks_median_known"]
    assert cal["w_median"] < 0.85 * cal["w_median_known"]


@pytest.fixture(scope="module")
def small_cfg(tmp_path_factory):
    return ExperimentConfig(j_list=(3,), z_list=(0.0, 1.0), replicates=50, grid_per_degree=8,
                            q_max=4, out_dir=str(tmp_path_factory.mktemp("run")))


def test_run_clt_small(small_cfg):
    seen = []
    rep = run_clt(small_cfg, seen.append)
    assert len(seen) == len(rep.records) == 100
    e = rep.entry(3, 0.0)
    assert e.M == 50
    assert abs(e.mean - e.predicted_mean) < 4 * e.std_error
    assert e.predicted_variance_proxy > 0
    assert rep.lengths(3, 1.0).shape == (50,)
    with pytest.raises(KeyError):
        rep.entry(4, 0.0)


def test_variance_study_and_summary_roundtrip(small_cfg, tmp_path):
    rep = run_variance_study(small_cfg)
    assert rep.ratio(3, 0.0) > 0
    assert len(rep.entries) == 2 * small_cfg.q_max
    paths = emit_reports([rep], tmp_path)
    names = {p.name for p in paths}
    assert {"variance.csv", "chaos2.csv", "summary.json", "chaos2.gp"} <= names
    data = json.loads((tmp_path / "summary.json").read_text())
    assert data["schema"] == SCHEMA
    back = summary_from_dict(data)[0]
    assert back.chaos2 == rep.chaos2 and back.entries == rep.entries
    assert summary_dict([back]) == data


def test_emit_reports_archives_previous(small_cfg, tmp_path):
    rep = run_variance_study(small_cfg)
    emit_reports([rep], tmp_path)
    emit_reports([rep], tmp_path)
    archived = [p for p in tmp_path.iterdir() if p.name.startswith("previous-")]
    assert len(archived) == 1 and (archived[0] / "chaos2.csv").exists()


def test_cli_window_check_and_constants(capsys):
    assert main(["window-check"]) == 0
    assert "partition of unity" in capsys.readouterr().out
    assert main(["constants", "--j-list", "3,4"]) == 0
    assert "limB" in capsys.readouterr().out


def test_cli_config_error_exit_code(capsys):
    assert main(["constants", "--a", "3"]) == 2
    assert main(["constants", "--set", "bogus"]) == 2
    assert "config error" in capsys.readouterr().err


def test_cli_resolution_error_exit_code(tmp_path):
    # grid_per_degree passes validation but the simulator refuses the band
    code = main(["simulate", "--j-list", "3", "--replicates", "50", "--grid-per-degree", "3",
                 "--out-dir", str(tmp_path)])
    assert code == 2


def test_cli_covariance_and_variance(tmp_path, capsys):
    out = tmp_path / "cov"
    assert main(["covariance", "--j-list", "7", "--out-dir", str(out), "--n-theta", "65"]) == 0
    assert (out / "profiles.csv").read_text().splitlines()[0] == "theta,rho1,rho2,rho3,rho4"
    assert main(["variance", "--j-list", "3", "--z-list", "0,1", "--q-max", "3",
                 "--out-dir", str(tmp_path / "var")]) == 0
    assert main(["report", "--out-dir", str(tmp_path / "var")]) == 0
    assert main(["report", "--out-dir", str(tmp_path / "nothing")]) == 2


def test_cli_simulate_with_dump(tmp_path):
    assert main(["simulate", "--j-list", "3", "--replicates", "50", "--grid-per-degree", "4",
                 "--out-dir", str(tmp_path), "--dump"]) == 0
    assert (tmp_path / "field_j3_r0.bin").exists()
    assert len((tmp_path / "lengths.csv").read_text().splitlines()) == 51
