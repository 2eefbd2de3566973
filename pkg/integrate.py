# ------------------ Fixed-Step RK4 Integration ------------------
import logging
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from errors import NonFiniteState, ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-3
    t_end: float = 6000.0
    record_stride: int = 100

    def __post_init__(self):
        if not self.dt > 0:
            raise ValidationError("dt > 0")
        if not self.t_end >= 0:
            raise ValidationError("t_end >= 0")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ValidationError("record_stride >= 1")

    @property
    def n_steps(self):
        """Full dt steps; a shorter closing step covers any remainder of t_end."""
        return steps_for(self.t_end, self.dt)

    @property
    def last_step(self):
        rest = self.t_end - self.n_steps * self.dt
        return rest if rest > 1e-9 * self.dt else 0.0


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    final_time: float
    final_state: np.ndarray
    inputs: np.ndarray = None


def rk4_step(rhs, state, t, dt):
    """One classical RK4 step of x' = rhs(t, x)."""
    k1 = rhs(t, state)
    k2 = rhs(t + 0.5 * dt, state + 0.5 * dt * k1)
    k3 = rhs(t + 0.5 * dt, state + 0.5 * dt * k2)
    k4 = rhs(t + dt, state + dt * k3)
    out = state + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NonFiniteState(t + dt)
    return out


def integrate(rhs, x0, cfg, observers=()):
    """Step rhs from t = 0 to cfg.t_end, sampling every cfg.record_stride steps.

    Each observer is called as observer(t, state) at every sample, including t = 0.
    """
    x = np.array(x0, dtype=float)
    n_steps = cfg.n_steps
    times = [0.0]
    states = [x.copy()]
    for observer in observers:
        observer(0.0, x)
    t = 0.0
    for i in range(n_steps):
        x = rk4_step(rhs, x, t, cfg.dt)
        t = (i + 1) * cfg.dt
        if (i + 1) % cfg.record_stride == 0:
            times.append(t)
            states.append(x.copy())
            for observer in observers:
                observer(t, x)
    if cfg.last_step:
        x = rk4_step(rhs, x, t, cfg.last_step)
        t = cfg.t_end
    return Trajectory(np.array(times), np.array(states), t, x)


# ------------------ Compiled Driver ------------------
_DRIVERS = {}


def compiled_driver(rhs):
    """JIT driver for a numba rhs(t, x, args, u) with zero-order-held inputs u."""
    if rhs in _DRIVERS:
        return _DRIVERS[rhs]

    @njit
    def drive(x0, dt, n_steps, stride, args, inputs, steps_per_input, last_step):
        n_rec = n_steps // stride + 1
        n_in = inputs.shape[0]
        times = np.empty(n_rec)
        states = np.empty((n_rec, x0.size))
        held = np.empty((n_rec, inputs.shape[1]))
        x = x0.copy()
        times[0] = 0.0
        states[0] = x
        held[0] = inputs[0]
        rec = 1
        for i in range(n_steps):
            u = inputs[min(i // steps_per_input, n_in - 1)]
            t = i * dt
            k1 = rhs(t, x, args, u)
            k2 = rhs(t + 0.5 * dt, x + 0.5 * dt * k1, args, u)
            k3 = rhs(t + 0.5 * dt, x + 0.5 * dt * k2, args, u)
            k4 = rhs(t + dt, x + dt * k3, args, u)
            x = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(x)):
                return times[:rec], states[:rec], held[:rec], x, i + 1
            if (i + 1) % stride == 0:
                times[rec] = (i + 1) * dt
                states[rec] = x
                held[rec] = inputs[min((i + 1) // steps_per_input, n_in - 1)]
                rec += 1
        if last_step > 0.0:
            u = inputs[min(n_steps // steps_per_input, n_in - 1)]
            t = n_steps * dt
            k1 = rhs(t, x, args, u)
            k2 = rhs(t + 0.5 * last_step, x + 0.5 * last_step * k1, args, u)
            k3 = rhs(t + 0.5 * last_step, x + 0.5 * last_step * k2, args, u)
            k4 = rhs(t + last_step, x + last_step * k3, args, u)
            x = x + last_step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(x)):
                return times[:rec], states[:rec], held[:rec], x, n_steps + 1
        return times[:rec], states[:rec], held[:rec], x, -1

    _DRIVERS[rhs] = drive
    return drive


def integrate_compiled(rhs, x0, cfg, args, inputs=None, steps_per_input=1):
    """Run the compiled driver; raises NonFiniteState with the failing time."""
    if inputs is None:
        inputs = np.zeros((1, 0))
    inputs = np.ascontiguousarray(inputs, dtype=float)
    if inputs.ndim != 2 or inputs.shape[0] == 0:
        raise ValidationError("inputs must be a non-empty 2-D array")
    drive = compiled_driver(rhs)
    n_steps = cfg.n_steps
    logger.debug("integrating %d steps of dt=%g (stride %d)", n_steps, cfg.dt, cfg.record_stride)
    times, states, held, final, failed = drive(np.asarray(x0, dtype=float), float(cfg.dt), n_steps,
                                               int(cfg.record_stride), args, inputs, int(steps_per_input),
                                               float(cfg.last_step))
    if failed >= 0:
        t_fail = min(failed * cfg.dt, cfg.t_end)
        logger.error("state became non-finite at t = %g", t_fail)
        raise NonFiniteState(t_fail)
    final_time = n_steps * cfg.dt + cfg.last_step
    return Trajectory(times, states, final_time, final, held)


def steps_for(duration, dt):
    """Integer number of dt steps covering duration, tolerant to float rounding."""
    steps = duration / dt
    nearest = round(steps)
    if math.isclose(steps, nearest, rel_tol=1e-9, abs_tol=1e-9):
        return int(nearest)
    return int(math.floor(steps))
