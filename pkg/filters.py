# ------------------ Filter-Differentiator ------------------
# Realizes W(p) = 1/((tau1 p + 1)(tau2 p + 1)) twice:
#   (w1, w2, x1, x3) carry pW(p) and W(p) of sum(y_k),
#   (x2, x4) carry pW(p) and W(p) of sum(y_k^3).
from dataclasses import dataclass

import numpy as np
from numba import njit

from errors import ValidationError

STATE_FIELDS = ("w1", "w2", "x1", "x2", "x3", "x4")
STARTS = ("zero", "steady")


@dataclass(frozen=True)
class FilterParams:
    tau1: float = 0.01
    tau2: float = 0.01
    # None lets the run mode pick: zero for simulation, steady for recorded signals
    start: str = None

    def __post_init__(self):
        if not self.tau1 > 0:
            raise ValidationError("tau1 > 0")
        if not self.tau2 > 0:
            raise ValidationError("tau2 > 0")
        if self.start is not None and self.start not in STARTS:
            raise ValidationError(f"filter start must be one of {STARTS}, got '{self.start}'")

    @property
    def settle_time(self):
        """Time after which the zero-initialised filter transient is negligible."""
        return 10.0 * max(self.tau1, self.tau2)

    def start_for(self, mode):
        if self.start is not None:
            return self.start
        return "steady" if mode == "data" else "zero"


@dataclass(frozen=True)
class FilterState:
    w1: float = 0.0
    w2: float = 0.0
    x1: float = 0.0
    x2: float = 0.0
    x3: float = 0.0
    x4: float = 0.0

    @classmethod
    def from_array(cls, values):
        return cls(*(float(x) for x in np.asarray(values, dtype=float).ravel()[:6]))

    def as_array(self):
        return np.array([self.w1, self.w2, self.x1, self.x2, self.x3, self.x4])


@njit(cache=True)
def filter_derivative(f, sum_y, sum_y3, tau1, tau2):
    s1 = (tau1 + tau2) / (tau1 * tau2)
    s0 = 1.0 / (tau1 * tau2)
    out = np.empty(6)
    out[0] = -s1 * f[0] + f[1] - s1 * s0 * sum_y
    out[1] = -s0 * f[0] - s0 * s0 * sum_y
    out[2] = f[0] + s0 * sum_y
    out[3] = -s1 * f[3] - s0 * f[5] + s0 * sum_y3
    out[4] = f[2]
    out[5] = f[3]
    return out


@njit(cache=True)
def regressor(f, sum_y, tau1, tau2):
    # y* is dx1/dt, read off algebraically
    y_star = f[0] + sum_y / (tau1 * tau2)
    z = np.empty(5)
    z[0] = f[2]
    z[1] = f[3]
    z[2] = f[4]
    z[3] = f[5]
    z[4] = 1.0
    return y_star, z


def filter_rhs(fs, sum_y, sum_y3, fp):
    return FilterState.from_array(
        filter_derivative(fs.as_array(), float(sum_y), float(sum_y3), fp.tau1, fp.tau2))


def filter_outputs(fs, sum_y, fp):
    """(y*, z) with z = (x1, x2, x3, x4, 1)."""
    y_star, z = regressor(fs.as_array(), float(sum_y), fp.tau1, fp.tau2)
    return float(y_star), z


def w_response(omega, fp):
    """Complex frequency response W(i omega)."""
    p = 1j * omega
    return 1.0 / ((fp.tau1 * p + 1.0) * (fp.tau2 * p + 1.0))


def steady_state(sum_y, sum_y3, fp):
    """Filter state at rest under constant inputs sum_y and sum_y3.

    pW(p) outputs (x1, x2) are zero, W(p) outputs (x3, x4) equal the inputs and y* = 0.
    """
    s0 = 1.0 / (fp.tau1 * fp.tau2)
    return np.array([-s0 * sum_y, 0.0, 0.0, 0.0, sum_y, sum_y3])


def initial_state(start, sum_y, sum_y3, fp):
    if start == "steady":
        return steady_state(float(sum_y), float(sum_y3), fp)
    if start == "zero":
        return np.zeros(6)
    raise ValidationError(f"filter start must be one of {STARTS}, got '{start}'")
