# ------------------ Run Persistence ------------------
import json
import logging
import math
from pathlib import Path

import numpy as np
import pandas as pd

from analysis import error_norms, h_series
from errors import ExportError
from identify import lyapunov_series
from parsers import config_hash

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
THETA_COLUMNS = ["theta1", "theta2", "theta3", "theta4", "theta5"]


def _json_ready(value):
    if isinstance(value, dict):
        return {str(k): _json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(v) for v in value]
    if isinstance(value, np.ndarray):
        return _json_ready(value.tolist())
    if isinstance(value, (np.floating, float)):
        value = float(value)
        # JSON has no inf/nan
        return value if math.isfinite(value) else str(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def write_csv(frame, path):
    try:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, encoding="utf-8")
    except OSError as exc:
        raise ExportError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def read_csv(path):
    return pd.read_csv(path, float_precision="round_trip")


def run_frames(record):
    """All per-sample tables of a RunRecord, keyed by file name."""
    t = record.times
    frames = {"theta.csv": pd.DataFrame(np.column_stack([t, record.theta]) if t.size else
                                        np.empty((0, 6)), columns=["t"] + THETA_COLUMNS)}
    residual = {"t": t, "delta": record.delta, "y_star": record.y_star, "q": record.q}
    if record.theta_true is not None:
        norms = error_norms(record.theta, record.theta_true, record.i_ext, record.n) if t.size else None
        frames["errors.csv"] = pd.DataFrame({
            "t": t,
            "theta_error": norms.theta_error if norms else np.empty(0),
            "param_error": norms.param_error if norms else np.empty(0),
            "status": norms.status if norms else np.empty(0, dtype=object),
        })
        residual["lyapunov"] = (lyapunov_series(record.theta, record.q, record.theta_true, record.gain)
                                if t.size else np.empty(0))
    frames["residual.csv"] = pd.DataFrame(residual)
    frames["regressors.csv"] = pd.DataFrame({"t": t, "x1": record.z[:, 0], "x2": record.z[:, 1],
                                             "x3": record.z[:, 2], "x4": record.z[:, 3]})
    if record.y is not None:
        columns = {"t": t}
        columns.update({f"y{k + 1}": record.y[:, k] for k in range(record.n)})
        columns.update({f"v{k + 1}": record.v[:, k] for k in range(record.n)})
        columns["H"] = h_series(record.y, record.v) if t.size else np.empty(0)
        frames["states.csv"] = pd.DataFrame(columns)
    return frames


def pe_frame(pe):
    return pd.DataFrame({"L": pe.l_values, "min_eig": pe.min_eigs})


def write_pe(pe, outdir):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    return write_csv(pe_frame(pe), outdir / "pe_sweep.csv")


def write_run(record, outdir, summary=None, pe=None, bounds=None):
    """Write CSV artifacts and manifest.json for one run; returns the manifest."""
    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ExportError(f"cannot create {outdir}: {exc.strerror}") from exc

    frames = run_frames(record)
    if pe is not None:
        frames["pe_sweep.csv"] = pe_frame(pe)
    if bounds is not None:
        frames["bounds.csv"] = pd.DataFrame([{"r": bounds.r, "sigma_max": bounds.sigma_max,
                                              "sigma": bounds.sigma, "ok": bounds.ok}])
    for name, frame in frames.items():
        write_csv(frame, outdir / name)

    manifest = {
        "files": sorted(frames),
        "config_hash": config_hash(record.config) if record.config is not None else None,
        "mode": record.mode,
        "summary": summary or {},
    }
    if pe is not None:
        manifest["pe"] = {"t_start": pe.t_start, "monotone": pe.monotone,
                          "smallest_passing_length": pe.smallest_passing_length()}
    path = outdir / "manifest.json"
    try:
        path.write_text(json.dumps(_json_ready(manifest), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise ExportError(f"cannot write {path}: {exc.strerror}") from exc
    logger.info("wrote %d artifacts to %s", len(frames) + 1, outdir)
    return manifest


def load_theta(outdir):
    """(times, theta) back from a run directory's theta.csv."""
    frame = read_csv(Path(outdir) / "theta.csv")
    return frame["t"].to_numpy(), frame[THETA_COLUMNS].to_numpy()


def load_regressors(outdir):
    """(times, z) with the constant fifth regressor restored."""
    frame = read_csv(Path(outdir) / "regressors.csv")
    z = frame[["x1", "x2", "x3", "x4"]].to_numpy()
    return frame["t"].to_numpy(), np.column_stack([z, np.ones(z.shape[0])])


def write_signals(path, times, channels):
    """Header 't, y1..yN', one row per sample; readable by parsers.load_signals."""
    channels = np.atleast_2d(np.asarray(channels, dtype=float))
    frame = pd.DataFrame(channels, columns=[f"y{k + 1}" for k in range(channels.shape[1])])
    frame.insert(0, "t", np.asarray(times, dtype=float))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return write_csv(frame, path)


def write_sweep(results, outdir):
    """sweep.csv with one row per gain; failed members keep their error message."""
    rows = []
    for g, result in results.items():
        row = {"g": g, "peak_theta_error": math.nan, "time_to_tolerance": math.nan,
               "final_theta_error": math.nan, "status": "ok"}
        if isinstance(result, Exception):
            row["status"] = f"failed: {result}"
        else:
            summary = result
            row.update(peak_theta_error=summary["peak_theta_error"],
                       time_to_tolerance=summary["time_to_tolerance"],
                       final_theta_error=summary["final_theta_error"])
        rows.append(row)
    frame = pd.DataFrame(rows, columns=["g", "peak_theta_error", "time_to_tolerance", "final_theta_error",
                                        "status"])
    Path(outdir).mkdir(parents=True, exist_ok=True)
    return write_csv(frame, Path(outdir) / "sweep.csv")
