import json

import numpy as np
import pandas as pd
import pytest

from conftest import short_config_text
from experiments import RunRecord, run_identification, summarize_run
from export import load_regressors, load_theta, write_run, write_sweep
from identify import GainMatrix
from parsers import config_hash, parse_config


@pytest.fixture(scope="module")
def short_record():
    cfg = parse_config(short_config_text(t_end=5.0, stride=50), source="short.yaml")
    return run_identification(cfg)


def empty_record():
    return RunRecord(times=np.empty(0), theta=np.empty((0, 5)), z=np.empty((0, 5)), y_star=np.empty(0),
                     delta=np.empty(0), q=np.empty(0), n=5, i_ext=1.0, mode="data", gain=GainMatrix.scalar(1.0),
                     final_theta=np.zeros(5), final_time=0.0)


def test_theta_and_regressors_reload_exactly(tmp_path, short_record):
    write_run(short_record, tmp_path)
    times, theta = load_theta(tmp_path)
    assert np.array_equal(times, short_record.times)
    assert np.array_equal(theta, short_record.theta)
    times, z = load_regressors(tmp_path)
    assert np.array_equal(z, short_record.z)


def test_manifest_lists_artifacts(tmp_path, short_record):
    summary = summarize_run(short_record)
    manifest = write_run(short_record, tmp_path, summary=summary)
    on_disk = json.loads((tmp_path / "manifest.json").read_text())
    assert on_disk["config_hash"] == config_hash(short_record.config)
    assert on_disk["mode"] == "simulation"
    assert set(manifest["files"]) == {"theta.csv", "errors.csv", "residual.csv", "regressors.csv", "states.csv"}
    for name in manifest["files"]:
        assert (tmp_path / name).exists()
    assert on_disk["summary"]["final_status"] == summary["final_status"]
    states = pd.read_csv(tmp_path / "states.csv")
    assert list(states.columns) == ["t"] + [f"y{k}" for k in range(1, 6)] + [f"v{k}" for k in range(1, 6)] + ["H"]


def test_reruns_write_identical_bytes(tmp_path, short_record):
    summary = summarize_run(short_record)
    write_run(short_record, tmp_path / "first", summary=summary)
    write_run(short_record, tmp_path / "second", summary=summary)
    for path in sorted((tmp_path / "first").iterdir()):
        assert path.read_bytes() == (tmp_path / "second" / path.name).read_bytes()


def test_empty_record_writes_header_only_files(tmp_path):
    manifest = write_run(empty_record(), tmp_path)
    assert manifest["config_hash"] is None
    for name in manifest["files"]:
        assert len(pd.read_csv(tmp_path / name)) == 0
    times, theta = load_theta(tmp_path)
    assert times.size == 0
    assert theta.shape == (0, 5)


def test_write_sweep_keeps_failures(tmp_path):
    ok = {"peak_theta_error": 0.6, "time_to_tolerance": 120.0, "final_theta_error": 1e-4}
    write_sweep({1.0: ok, 50.0: RuntimeError("diverged")}, tmp_path)
    frame = pd.read_csv(tmp_path / "sweep.csv")
    assert frame["g"].tolist() == [1.0, 50.0]
    assert frame.loc[0, "status"] == "ok"
    assert frame.loc[1, "status"].startswith("failed")
    assert np.isnan(frame.loc[1, "peak_theta_error"])
