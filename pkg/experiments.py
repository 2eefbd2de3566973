# ------------------ Closed-Loop and Replay Runs ------------------
# Closed loop state:  [y (N), v (N), w1, w2, x1, x2, x3, x4, theta (5), q]
# Replay state:       [w1, w2, x1, x2, x3, x4, theta (5), q]
import dataclasses
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass

import numpy as np
from numba import njit
from tqdm import tqdm

from analysis import (boundedness_report, coupling_r_for, error_norms, h_series, lyapunov_violations, pe_sweep,
                      reduction_factor, sigma_bound, time_to_tolerance)
from errors import FhnIdentError, ValidationError, WindowOutOfRange
from filters import FilterParams, filter_derivative, initial_state, regressor
from identify import GainMatrix, lyapunov_series, speed_gradient_derivative
from integrate import IntegratorConfig, integrate_compiled, steps_for
from model import recover_parameters, scaled_network_derivative, theta_from_original

logger = logging.getLogger(__name__)


@njit(cache=True)
def closed_loop_rhs(t, x, args, u):
    adj, coupling, theta_true, consts, gamma = args
    n = adj.shape[0]
    y = x[:n]
    v = x[n:2 * n]
    f = x[2 * n:2 * n + 6]
    theta = x[2 * n + 6:2 * n + 11]
    dy, dv = scaled_network_derivative(y, v, theta_true, adj, coupling, consts[0])
    sum_y = 0.0
    sum_y3 = 0.0
    for k in range(n):
        sum_y += y[k]
        sum_y3 += y[k] ** 3
    df = filter_derivative(f, sum_y, sum_y3, consts[1], consts[2])
    y_star, z = regressor(f, sum_y, consts[1], consts[2])
    dtheta, dq = speed_gradient_derivative(theta, z, y_star, gamma)
    out = np.empty(x.size)
    out[:n] = dy
    out[n:2 * n] = dv
    out[2 * n:2 * n + 6] = df
    out[2 * n + 6:2 * n + 11] = dtheta
    out[2 * n + 11] = dq
    return out


@njit(cache=True)
def replay_rhs(t, x, args, u):
    consts, gamma = args
    f = x[:6]
    theta = x[6:11]
    df = filter_derivative(f, u[0], u[1], consts[0], consts[1])
    y_star, z = regressor(f, u[0], consts[0], consts[1])
    dtheta, dq = speed_gradient_derivative(theta, z, y_star, gamma)
    out = np.empty(x.size)
    out[:6] = df
    out[6:11] = dtheta
    out[11] = dq
    return out


@dataclass(eq=False)
class RunRecord:
    times: np.ndarray
    theta: np.ndarray
    z: np.ndarray
    y_star: np.ndarray
    delta: np.ndarray
    q: np.ndarray
    n: int
    i_ext: float
    mode: str
    gain: GainMatrix
    final_theta: np.ndarray
    final_time: float
    y: np.ndarray = None
    v: np.ndarray = None
    theta_true: np.ndarray = None
    config: object = None

    @property
    def empty(self):
        return self.times.size == 0


def _regression_signals(filter_states, theta, sum_y, fp):
    s0 = 1.0 / (fp.tau1 * fp.tau2)
    y_star = filter_states[:, 0] + s0 * sum_y
    z = np.column_stack([filter_states[:, 2], filter_states[:, 3], filter_states[:, 4],
                         filter_states[:, 5], np.ones(filter_states.shape[0])])
    delta = np.einsum("ij,ij->i", theta, z) - y_star
    return y_star, z, delta


def run_identification(cfg):
    """Integrate plant + filters + identifier as one system (simulation mode)."""
    if cfg.fhn is None:
        raise ValidationError("simulation mode needs an [fhn] section")
    n = cfg.coupling.n
    theta_true = theta_from_original(cfg.fhn, n).as_array()
    start = initial_state(cfg.filter.start_for("simulation"), cfg.y0.sum(), (cfg.y0 ** 3).sum(), cfg.filter)
    x0 = np.concatenate([cfg.y0, cfg.v0, start, cfg.theta0, [0.0]])
    args = (cfg.coupling.adjacency, cfg.coupling.coupling_vector(), theta_true,
            np.array([cfg.fhn.i_ext, cfg.filter.tau1, cfg.filter.tau2]), cfg.gain.gamma)
    started = time.perf_counter()
    logger.info("closed-loop run '%s': N=%d, dt=%g, t_end=%g", cfg.name, n, cfg.integrator.dt,
                cfg.integrator.t_end)
    traj = integrate_compiled(closed_loop_rhs, x0, cfg.integrator, args)
    logger.info("run finished in %.1f s", time.perf_counter() - started)

    states = traj.states
    y = states[:, :n]
    v = states[:, n:2 * n]
    filt = states[:, 2 * n:2 * n + 6]
    theta = states[:, 2 * n + 6:2 * n + 11]
    q = states[:, 2 * n + 11]
    y_star, z, delta = _regression_signals(filt, theta, y.sum(axis=1), cfg.filter)
    return RunRecord(times=traj.times, theta=theta, z=z, y_star=y_star, delta=delta, q=q, n=n,
                     i_ext=cfg.fhn.i_ext, mode="simulation", gain=cfg.gain,
                     final_theta=traj.final_state[2 * n + 6:2 * n + 11], final_time=traj.final_time,
                     y=y, v=v, theta_true=theta_true, config=cfg)


def run_from_signals(cfg, signals):
    """Drive filters + identifier from recorded channels held constant between samples."""
    n = signals.channels.shape[1]
    steps_per_input = steps_for(signals.dt, cfg.integrator.dt)
    if steps_per_input < 1 or not math.isclose(steps_per_input * cfg.integrator.dt, signals.dt,
                                               rel_tol=1e-9):
        raise ValidationError(f"signal dt {signals.dt:g} must be an integer multiple of integrator dt "
                              f"{cfg.integrator.dt:g}")
    duration = signals.duration
    if duration < cfg.filter.settle_time:
        logger.warning("signal lasts %g, shorter than the filter transient %g", duration,
                       cfg.filter.settle_time)
    integ = cfg.integrator
    if integ.t_end > duration:
        integ = dataclasses.replace(integ, t_end=duration)
    inputs = np.column_stack([signals.channels.sum(axis=1), (signals.channels ** 3).sum(axis=1)])
    start = initial_state(cfg.filter.start_for("data"), inputs[0, 0], inputs[0, 1], cfg.filter)
    x0 = np.concatenate([start, cfg.theta0, [0.0]])
    args = (np.array([cfg.filter.tau1, cfg.filter.tau2]), cfg.gain.gamma)
    logger.info("replay run '%s': %d channels, %d samples, t_end=%g", cfg.name, n,
                signals.channels.shape[0], integ.t_end)
    traj = integrate_compiled(replay_rhs, x0, integ, args, inputs, steps_per_input)

    filt = traj.states[:, :6]
    theta = traj.states[:, 6:11]
    q = traj.states[:, 11]
    y_star, z, delta = _regression_signals(filt, theta, traj.inputs[:, 0], cfg.filter)
    theta_true = theta_from_original(cfg.fhn, n).as_array() if cfg.fhn is not None else None
    return RunRecord(times=traj.times + signals.t0, theta=theta, z=z, y_star=y_star, delta=delta, q=q,
                     n=n, i_ext=cfg.i_ext, mode="data", gain=cfg.gain, final_theta=traj.final_state[6:11],
                     final_time=traj.final_time + signals.t0, theta_true=theta_true, config=cfg)


# ------------------ Run Summaries ------------------
def bounds_for(cfg):
    if cfg.fhn is None:
        return None
    theta2 = theta_from_original(cfg.fhn, cfg.coupling.n).theta2
    r = coupling_r_for(cfg.coupling, theta2)
    report = sigma_bound(cfg.fhn.eps, cfg.fhn.b, r, cfg.coupling.sigma)
    logger.info("coupling bound: r=%.6g, sigma_max=%.6g, sigma=%g -> %s", report.r, report.sigma_max,
                report.sigma, "ok" if report.ok else "violated")
    return report


def summarize_run(record, t_transient=1.0, tolerance=0.05):
    """Scalar summary of a run: estimates, error norms, reduction factor and monitors."""
    params, status = recover_parameters(record.final_theta[None, :], record.i_ext, record.n)
    initial_params, initial_status = recover_parameters(record.theta[:1], record.i_ext, record.n)
    summary = {
        "mode": record.mode,
        "samples": int(record.times.size),
        "final_time": float(record.final_time),
        "final_theta": record.final_theta.tolist(),
        "final_status": str(status[0]),
        "final_params": dict(zip(("a", "b", "c", "eps"), params[0].tolist())),
        "initial_theta": record.theta[0].tolist() if not record.empty else None,
        "initial_status": str(initial_status[0]) if not record.empty else None,
        "initial_params": dict(zip(("a", "b", "c", "eps"), initial_params[0].tolist()))
        if not record.empty else None,
    }
    if record.theta_true is not None and not record.empty:
        true_params, _ = recover_parameters(record.theta_true[None, :], record.i_ext, record.n)
        norms = error_norms(record.theta, record.theta_true, record.i_ext, record.n)
        final_norms = error_norms(record.final_theta[None, :], record.theta_true, record.i_ext, record.n)
        lyap = lyapunov_series(record.theta, record.q, record.theta_true, record.gain)
        summary.update({
            "true_theta": record.theta_true.tolist(),
            "true_params": dict(zip(("a", "b", "c", "eps"), true_params[0].tolist())),
            "initial_theta_error": float(norms.theta_error[0]),
            "final_theta_error": float(final_norms.theta_error[0]),
            "initial_param_error": float(norms.param_error[0]),
            "final_param_error": float(final_norms.param_error[0]),
            "reduction_factor": reduction_factor(float(norms.param_error[0]),
                                                 float(final_norms.param_error[0])),
            "theta_reduction_factor": reduction_factor(float(norms.theta_error[0]),
                                                       float(final_norms.theta_error[0])),
            "peak_theta_error": float(np.max(norms.theta_error)),
            "time_to_tolerance": time_to_tolerance(record.times, norms.theta_error, tolerance),
            "tolerance": tolerance,
            "flagged_samples": norms.flagged,
            "lyapunov_max_increase_rate": lyapunov_violations(record.times, lyap, t_transient),
        })
    if record.y is not None and not record.empty:
        summary["h_monitor"] = boundedness_report(record.times, h_series(record.y, record.v))
    return summary


# ------------------ Gain Sweeps ------------------
def with_scalar_gain(cfg, g):
    return dataclasses.replace(cfg, gain=GainMatrix.scalar(g, cfg.theta0.size))


def _sweep_member(cfg, g):
    return run_identification(with_scalar_gain(cfg, g))


def run_gain_sweep(cfg, g_values, max_workers=None):
    """One closed-loop run per g with Gamma = g I; failures are kept per g, never raised."""
    for g in g_values:
        if not g > 0:
            raise ValidationError("gain values must be positive")
    results = {}
    if len(g_values) == 1 or max_workers == 1:
        for g in g_values:
            results[g] = _guarded(cfg, g)
        return results
    with ProcessPoolExecutor(max_workers=max_workers) as pool:
        futures = {pool.submit(_sweep_member, cfg, g): g for g in g_values}
        for future in tqdm(as_completed(futures), total=len(futures), desc="gain sweep"):
            g = futures[future]
            try:
                results[g] = future.result()
            except (FhnIdentError, FloatingPointError) as exc:
                logger.error("sweep member g=%g failed: %s", g, exc)
                results[g] = exc
    return {g: results[g] for g in g_values}


def _guarded(cfg, g):
    try:
        return _sweep_member(cfg, g)
    except (FhnIdentError, FloatingPointError) as exc:
        logger.error("sweep member g=%g failed: %s", g, exc)
        return exc


def with_integrator(cfg, dt=None, t_end=None, stride=None):
    """Copy of cfg with integrator overrides applied (and re-validated)."""
    integ = cfg.integrator
    integ = IntegratorConfig(dt=integ.dt if dt is None else dt,
                             t_end=integ.t_end if t_end is None else t_end,
                             record_stride=integ.record_stride if stride is None else stride)
    return dataclasses.replace(cfg, integrator=integ)


def with_filter_start(cfg, start):
    return dataclasses.replace(cfg, filter=FilterParams(cfg.filter.tau1, cfg.filter.tau2, start))


# ------------------ PE on Recorded Runs ------------------
DEFAULT_L_VALUES = tuple(0.5 * k for k in range(1, 21))


def pe_for_samples(times, z, t_start, l_values):
    """pe_sweep over uniformly recorded regressors; t_start is absolute time."""
    times = np.asarray(times, dtype=float)
    if times.size < 2:
        raise WindowOutOfRange("need at least two samples for a PE window")
    return pe_sweep(z, t_start, l_values, float(times[1] - times[0]), float(times[0]))


def run_pe_sweep(record, cfg):
    """PE sweep configured by output.pe_t_start / output.pe_l_values; None when the window does not fit."""
    if record.empty:
        return None
    l_values = cfg.output.get("pe_l_values", DEFAULT_L_VALUES)
    t_start = float(cfg.output.get("pe_t_start", 1.0)) + float(record.times[0])
    try:
        return pe_for_samples(record.times, record.z, t_start, l_values)
    except WindowOutOfRange as exc:
        logger.warning("PE sweep skipped: %s", exc)
        return None
