import csv
import json
import logging
from pathlib import Path

import pytest

from eigenphase.cli import main
from eigenphase.partialwave import default_lmax
from eigenphase.pipeline import ConfigError, ExperimentConfig, run_experiment

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
BUMP = {"kind": "radial_bump", "dimension": 3, "bumps": [{"amplitude": 0.4, "radius": 1.0, "center": [0.0, 0.0, 0.0]}]}


def write_config(tmp_path, **over):
    data = {"potential": BUMP, "h_list": [0.2, 0.1], "pipelines": ["phases"], **over}
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data))
    return path


def snapshot(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file() and "cache" not in p.parts and p.name != "manifest.json"}


def test_free_config_exits_zero(tmp_path, capsys):
    code = main(["run", str(CONFIGS / "free.json"), "--out", str(tmp_path)])
    assert code == 0
    with open(tmp_path / "phases" / "table_h0.2.csv") as fh:
        assert all(float(r["beta"]) == 0.0 for r in csv.DictReader(fh))
    measure = json.loads((tmp_path / "spectral" / "measure.json").read_text())
    assert all(rec["pairing"] == [0.0, 0.0] for rec in measure)
    assert "PASS" in capsys.readouterr().out


def test_row_count_contract(tmp_path):
    cfg = ExperimentConfig.from_dict(json.loads(write_config(tmp_path).read_text()))
    man = run_experiment(cfg, tmp_path / "out")
    rows = 0
    for h in (0.2, 0.1):
        with open(tmp_path / "out" / "phases" / f"table_h{h}.csv") as fh:
            rows += sum(1 for _ in csv.DictReader(fh))
    assert rows == sum(default_lmax(1.0, h) + 1 for h in (0.2, 0.1))
    assert man.metrics["phase_rows[h=0.1]"] == default_lmax(1.0, 0.1) + 1


def test_rerun_is_cached_and_bit_identical(tmp_path):
    cfg = ExperimentConfig.from_dict(json.loads(write_config(tmp_path, pipelines=["phases", "spectral"]).read_text()))
    first = run_experiment(cfg, tmp_path / "out")
    before = snapshot(tmp_path / "out")
    second = run_experiment(cfg, tmp_path / "out")
    assert not any(s["cached"] for s in first.stages.values())
    assert all(s["cached"] for s in second.stages.values())
    assert snapshot(tmp_path / "out") == before
    assert first.files == second.files


def test_fresh_and_cached_tables_agree(tmp_path):
    cfg = ExperimentConfig.from_dict(json.loads(write_config(tmp_path, h_list=[0.2]).read_text()))
    run_experiment(cfg, tmp_path / "a")
    run_experiment(cfg, tmp_path / "a")
    run_experiment(cfg, tmp_path / "b", use_cache=False)
    assert snapshot(tmp_path / "a") == snapshot(tmp_path / "b")


def test_manifest_lists_every_file_with_checksum(tmp_path):
    cfg = ExperimentConfig.from_dict(json.loads(write_config(tmp_path, h_list=[0.2], pipelines=["phases", "spectral"]).read_text()))
    run_experiment(cfg, tmp_path / "out")
    man = json.loads((tmp_path / "out" / "manifest.json").read_text())
    listed = {f["path"] for f in man["files"]}
    assert listed == set(snapshot(tmp_path / "out"))
    assert all(len(f["sha256"]) == 64 for f in man["files"])
    assert man["calibration"]["c_V"]["source"] == "analytic"


def test_corrupted_cache_recomputes_with_warning(tmp_path, caplog):
    cfg = ExperimentConfig.from_dict(json.loads(write_config(tmp_path, h_list=[0.2]).read_text()))
    run_experiment(cfg, tmp_path / "out")
    before = snapshot(tmp_path / "out")
    entry = next(p for p in (tmp_path / "out" / "cache").rglob("table.csv"))
    entry.write_bytes(entry.read_bytes().replace(b"0", b"1", 3))
    with caplog.at_level(logging.WARNING, logger="eigenphase"):
        man = run_experiment(cfg, tmp_path / "out")
    assert any("checksum" in r.message for r in caplog.records)
    assert man.stages["phases"]["cached"] is False
    assert snapshot(tmp_path / "out") == before


def test_failed_check_exits_one(tmp_path):
    path = write_config(tmp_path, h_list=[0.2], checks=[{"metric": "tail_slope[h=0.2]", "min": 0.0}])
    assert main(["phases", str(path), "--out", str(tmp_path / "out")]) == 1


def test_missing_metric_fails_check(tmp_path):
    path = write_config(tmp_path, h_list=[0.2], checks=[{"metric": "no_such_metric", "max": 1.0}])
    assert main(["run", str(path), "--out", str(tmp_path / "out")]) == 1


@pytest.mark.parametrize(
    "over",
    [
        {"h_list": [0.1, 0.2]},
        {"pipelines": ["classical"]},  # no seed
        {"pipelines": ["dense2d"]},  # d = 3
        {"pipelines": ["bogus"]},
        {"unknown_key": 1},
        {"checks": [{"metric": "x"}]},
        {"potential": {"kind": "radial_bump", "dimension": 3, "bumps": [{"amplitude": 1.5, "radius": 1.0, "center": [0, 0, 0]}]}},
    ],
)
def test_invalid_config_exits_two(tmp_path, over, capsys):
    assert main(["run", str(write_config(tmp_path, **over)), "--out", str(tmp_path / "out")]) == 2
    assert "eigenphase:" in capsys.readouterr().err
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(json.loads((tmp_path / "config.json").read_text()))


def test_unreadable_config_exits_two(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", str(bad)]) == 2
    assert main(["run", str(tmp_path / "missing.json")]) == 2


def test_config_roundtrip():
    cfg = ExperimentConfig.load(CONFIGS / "bump3d.json")
    assert ExperimentConfig.from_dict(cfg.to_dict()).to_dict() == cfg.to_dict()


def test_verbs_filter_stages(tmp_path):
    path = write_config(tmp_path, h_list=[0.2], pipelines=["phases", "spectral"])
    out = tmp_path / "out"
    assert main(["phases", str(path), "--out", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert set(man["stages"]) == {"phases"}
    assert main(["trace", str(path), "--out", str(out)]) == 0
    assert (out / "spectral" / "trace.csv").exists()
    assert not (out / "spectral" / "equidistribution.json").exists()
    assert main(["measure", str(path), "--out", str(out), "--no-cache"]) == 0
    assert (out / "spectral" / "measure.json").exists()


def test_seed_override_and_classical_stage(tmp_path):
    small = {"volume_samples": 2000, "contact_rays": 4, "fixed_point_samples": 0}
    path = write_config(tmp_path, h_list=[0.2], pipelines=["classical"], mc=small)
    assert main(["classical", str(path), "--seed", "5", "--out", str(tmp_path / "out")]) == 0
    man = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert man["calibration"]["boundary_term"]["chosen"] == "delay"
    assert (tmp_path / "out" / "classical" / "scatter.csv").exists()


def test_dense_config(tmp_path):
    assert main(["spectrum2d", str(CONFIGS / "twobump2d.json"), "--out", str(tmp_path)]) == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["calibration"]["dense_gamma"]["chosen"] == "minus_i_over_4pi"
    assert (tmp_path / "dense2d" / "smatrix_h0.3.bin").stat().st_size == 16 * 128 * 128
