# ------------------ Speed-Gradient Identifier ------------------
# Generic over any linear regression y* = theta*^T z; nothing here knows about FHN.
from dataclasses import dataclass

import numpy as np
from numba import njit

from analysis import symmetric_eigenvalues
from errors import ValidationError


@dataclass(eq=False)
class GainMatrix:
    gamma: np.ndarray

    def __post_init__(self):
        gamma = np.atleast_2d(np.asarray(self.gamma, dtype=float))
        if gamma.shape[0] != gamma.shape[1]:
            raise ValidationError("gain matrix must be square")
        if not np.allclose(gamma, gamma.T, rtol=0.0, atol=1e-12):
            raise ValidationError("gain matrix symmetric")
        if symmetric_eigenvalues(gamma)[0] <= 0.0:
            raise ValidationError("gain matrix positive definite")
        self.gamma = gamma

    @classmethod
    def scalar(cls, g, m=5):
        return cls(g * np.eye(m))

    @property
    def m(self):
        return self.gamma.shape[0]

    def inverse(self):
        return np.linalg.inv(self.gamma)


@dataclass(eq=False)
class IdentifierState:
    theta: np.ndarray
    q: float = 0.0

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float).ravel()


@njit(cache=True)
def regression_residual(theta, z, y_star):
    return np.dot(theta, z) - y_star


@njit(cache=True)
def speed_gradient_derivative(theta, z, y_star, gamma):
    delta = np.dot(theta, z) - y_star
    return -delta * (gamma @ z), 0.5 * delta * delta


def residual(theta, z, y_star):
    """delta = theta^T z - y*."""
    theta = np.asarray(theta, dtype=float)
    z = np.asarray(z, dtype=float)
    if theta.shape != z.shape:
        raise ValidationError("theta and z dimensions differ")
    return float(regression_residual(theta, z, float(y_star)))


def identifier_rhs(ist, z, y_star, g):
    z = np.asarray(z, dtype=float)
    if z.size != g.m or ist.theta.size != g.m:
        raise ValidationError("theta, z and gain dimensions differ")
    dtheta, dq = speed_gradient_derivative(ist.theta, z, float(y_star), g.gamma)
    return IdentifierState(dtheta, float(dq))


def lyapunov_value(ist, theta_true, g):
    err = ist.theta - np.asarray(theta_true, dtype=float)
    return float(ist.q + 0.5 * err @ np.linalg.solve(g.gamma, err))


def lyapunov_series(thetas, qs, theta_true, g):
    """V_t for every recorded sample."""
    err = np.asarray(thetas, dtype=float) - np.asarray(theta_true, dtype=float)
    weighted = np.linalg.solve(g.gamma, err.T).T
    return np.asarray(qs, dtype=float) + 0.5 * np.einsum("ij,ij->i", err, weighted)
