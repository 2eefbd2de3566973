import dataclasses
import logging
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from analysis import error_norms, lyapunov_violations
from conftest import short_config_text
from errors import NonFiniteState, ValidationError
from experiments import (RunRecord, bounds_for, run_from_signals, run_gain_sweep, run_identification, run_pe_sweep,
                         summarize_run, with_filter_start, with_integrator)
from identify import lyapunov_series
from model import CouplingConfig, adjacency_from_generator, recover_parameters, theta_from_original
from parsers import SignalSet, SignalSource, parse_config


def as_data_config(cfg, i_ext=1.0):
    """Same network and filters, driven by recorded channels instead of the plant."""
    return dataclasses.replace(cfg, y0=None, v0=None, signals=SignalSource("memory", i_ext))


@pytest.fixture(scope="module")
def short_run():
    cfg = parse_config(short_config_text(t_end=20.0, stride=1), source="short.yaml")
    return cfg, run_identification(cfg)


# ------------------ Closed Loop ------------------
def test_closed_loop_record_shapes(short_run):
    cfg, record = short_run
    assert record.times.size == 20001
    assert record.theta.shape == (20001, 5)
    assert record.y.shape == record.v.shape == (20001, 5)
    assert record.final_time == pytest.approx(20.0)
    assert_allclose(record.theta[0], cfg.theta0)
    assert_allclose(record.theta_true, theta_from_original(cfg.fhn, 5).as_array())
    assert_allclose(record.z[:, 4], 1.0)
    assert record.q[0] == 0.0 and np.all(np.diff(record.q) >= 0.0)


def test_closed_loop_error_shrinks_after_filter_transient(short_run):
    _, record = short_run
    norms = error_norms(record.theta, record.theta_true, record.i_ext, record.n)
    settled = int(np.searchsorted(record.times, 1.0))
    assert norms.theta_error[-1] < norms.theta_error[settled]


def test_lyapunov_function_does_not_increase(short_run):
    _, record = short_run
    v = lyapunov_series(record.theta, record.q, record.theta_true, record.gain)
    assert lyapunov_violations(record.times, v, t_from=1.0) <= 1e-6


def test_summary_fields(short_run):
    cfg, record = short_run
    summary = summarize_run(record, tolerance=0.05)
    assert summary["mode"] == "simulation"
    assert summary["initial_param_error"] == pytest.approx(0.59213, abs=1e-5)
    assert summary["final_status"] in ("ok", "non_physical", "non_recoverable")
    assert summary["h_monitor"]["sup"] > 0.0
    assert summary["lyapunov_max_increase_rate"] <= 1e-6
    assert summary["samples"] == record.times.size


def test_bounds_for_shipped_configs(experiment1, experiment2):
    assert bounds_for(experiment1).ok
    assert bounds_for(experiment1).r == pytest.approx(0.42, abs=0.005)
    report = bounds_for(experiment2)
    assert report.ok
    assert report.sigma_max == pytest.approx(0.00995, abs=1e-5)


def test_bounds_for_counts_cross_terms(experiment2):
    cfg = dataclasses.replace(experiment2, coupling=CouplingConfig(adjacency_from_generator("ring", 5), 10.0,
                                                                   0.0, 1.0, 0.0, 0.0))
    report = bounds_for(cfg)
    # c = 0.75: the cross block is -L / (2 sqrt(-3 theta2)) = -0.375 L
    assert report.r == pytest.approx(0.375 * 3.618034, rel=1e-6)
    assert not report.ok


def test_pe_sweep_on_short_run(short_run):
    cfg, record = short_run
    pe = run_pe_sweep(record, cfg)
    assert_allclose(pe.l_values, [0.5, 1.0, 2.0])
    assert pe.monotone
    cut = with_integrator(cfg, t_end=1.5)
    assert run_pe_sweep(run_identification(cut), cut) is None


# ------------------ Replay ------------------
def test_replay_regressors_track_closed_loop(short_run):
    cfg, record = short_run
    signals = SignalSet(record.y, dt=cfg.integrator.dt)
    replay = run_from_signals(as_data_config(cfg), signals)
    assert replay.mode == "data"
    assert replay.y is None
    assert replay.final_time == pytest.approx(20.0)
    assert np.all(np.isfinite(replay.theta))
    # holding each sample for one step delays the filter input by dt/2, so x3 and x4
    # lag by about dt/2 times their derivatives x1 and x2
    dt = cfg.integrator.dt
    lag = np.abs(replay.z[:, 2:4] - record.z[:, 2:4])
    assert np.all(lag.max(axis=0) <= dt * np.abs(record.z[:, 0:2]).max(axis=0) + 1e-9)


def test_replay_offsets_time_by_first_sample(short_run):
    cfg, record = short_run
    signals = SignalSet(record.y[:2001:10], dt=0.01, t0=3.0)
    replay = run_from_signals(as_data_config(cfg), signals)
    assert replay.times[0] == 3.0
    assert replay.final_time == pytest.approx(5.0)


def test_replay_on_white_noise_does_not_crash(short_config, rng):
    signals = SignalSet(rng.normal(0.0, 0.05, size=(2001, 5)), dt=0.01)
    replay = run_from_signals(as_data_config(short_config), signals)
    assert np.all(np.isfinite(replay.theta))
    _, status = recover_parameters(replay.final_theta[None, :], replay.i_ext, replay.n)
    assert status[0] in ("ok", "non_physical", "non_recoverable")
    assert summarize_run(replay)["mode"] == "data"


def test_replay_warns_on_short_signal(short_config, caplog):
    signals = SignalSet(np.full((5, 5), 0.2), dt=0.01)
    with caplog.at_level(logging.WARNING, logger="experiments"):
        run_from_signals(as_data_config(short_config), signals)
    assert "filter transient" in caplog.text


def test_replay_starts_filters_at_rest_on_offset_channels(short_config):
    t = np.arange(2001) * 0.01
    channels = 1.0 + 0.3 * np.sin(t[:, None] + np.arange(5))
    signals = SignalSet(channels, dt=0.01)
    replay = run_from_signals(as_data_config(short_config), signals)
    assert np.all(np.isfinite(replay.theta))
    assert_allclose(replay.z[0, 2], channels[0].sum())
    assert_allclose(replay.z[0, 3], (channels[0] ** 3).sum())
    assert replay.y_star[0] == pytest.approx(0.0, abs=1e-9)

    # a zero start sees a step of order sum(y) / (tau1 tau2) and RK4 diverges
    with pytest.raises(NonFiniteState):
        run_from_signals(with_filter_start(as_data_config(short_config), "zero"), signals)


def test_replay_needs_integer_step_ratio(short_config):
    with pytest.raises(ValidationError, match="integer multiple"):
        run_from_signals(as_data_config(short_config), SignalSet(np.ones((10, 5)), dt=0.0015))


# ------------------ Gain Sweep ------------------
def test_single_gain_sweep_equals_identify():
    cfg = parse_config(short_config_text(t_end=5.0), source="short.yaml")
    result = run_gain_sweep(cfg, [1.0])[1.0]
    assert isinstance(result, RunRecord)
    assert np.array_equal(result.final_theta, run_identification(cfg).final_theta)


def test_gain_sweep_keeps_failed_members():
    cfg = parse_config(short_config_text(t_end=2.0), source="short.yaml")
    results = run_gain_sweep(cfg, [1.0, 1e6], max_workers=1)
    assert list(results) == [1.0, 1e6]
    assert isinstance(results[1.0], RunRecord)
    assert isinstance(results[1e6], NonFiniteState)
    with pytest.raises(ValidationError):
        run_gain_sweep(cfg, [0.0])


# ------------------ Full-Length Reproductions ------------------
@pytest.mark.slow
def test_experiment2_reproduction(experiment2):
    record = run_identification(experiment2)
    summary = summarize_run(record)
    assert summary["final_param_error"] <= 1e-3
    assert summary["reduction_factor"] >= 100.0
    assert summary["lyapunov_max_increase_rate"] <= 1e-6


@pytest.mark.slow
def test_experiment1_reproduction(experiment1):
    record = run_identification(experiment1)
    summary = summarize_run(record)
    assert summary["initial_param_error"] == pytest.approx(0.81541, abs=1e-4)
    assert summary["final_param_error"] <= 5e-3
    assert summary["reduction_factor"] >= 100.0
    assert summary["lyapunov_max_increase_rate"] <= 1e-6

    pe = run_pe_sweep(record, experiment1)
    assert pe.monotone
    assert np.all(pe.min_eigs[pe.l_values >= 4.0] > 0.0)
    assert pe.smallest_passing_length() <= 4.5


@pytest.mark.slow
def test_experiment2_replay_self_consistency(experiment2):
    cfg = with_integrator(experiment2, t_end=600.0, stride=1)
    record = run_identification(cfg)
    replay = run_from_signals(as_data_config(cfg), SignalSet(record.y, dt=cfg.integrator.dt))
    coupled, _ = recover_parameters(record.final_theta[None, :], record.i_ext, record.n)
    replayed, _ = recover_parameters(replay.final_theta[None, :], replay.i_ext, replay.n)
    assert_allclose(replayed, coupled, atol=1e-2)


@pytest.mark.slow
def test_gain_sweep_ordering(experiment1):
    # filters at rest on y(0): no start-up kick, so the time measures adaptation speed
    steady = with_filter_start(experiment1, "steady")
    small = run_gain_sweep(steady, [1e-4, 1e-3, 1e-2, 1e-1], max_workers=4)
    times = [summarize_run(small[g])["time_to_tolerance"] for g in (1e-4, 1e-3, 1e-2, 1e-1)]
    finite = [t for t in times if math.isfinite(t)]
    assert finite and finite == sorted(finite, reverse=True)
    assert all(math.isinf(t) for t in times[:len(times) - len(finite)])

    # zero filter start: the start-up transient drives the overshoot, and |z|^2 makes g = 10 stiff at dt = 1e-3
    early = with_integrator(experiment1, dt=1e-4, t_end=20.0, stride=100)
    large = run_gain_sweep(early, [1.0, 10.0], max_workers=2)
    peaks = {g: summarize_run(large[g])["peak_theta_error"] for g in (1.0, 10.0)}
    assert peaks[10.0] > peaks[1.0]
