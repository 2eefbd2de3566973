# ------------------ Convergence-Condition Analysis ------------------
import logging
import math
from dataclasses import dataclass

import networkx as nx
import numpy as np
from numba import njit
from scipy.integrate import trapezoid

from errors import NotSymmetric, ValidationError, WindowOutOfRange
from model import CouplingConfig, coupling_terms, recover_parameters

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class PeSweepResult:
    l_values: np.ndarray
    min_eigs: np.ndarray
    t_start: float
    monotone: bool = True

    def smallest_passing_length(self, tol=1e-9):
        """Smallest L from which M_L stays positive definite, or None."""
        passing = self.min_eigs > tol
        for i in range(len(self.l_values)):
            if passing[i:].all():
                return float(self.l_values[i])
        return None


@dataclass(frozen=True)
class BoundsReport:
    r: float
    sigma_max: float
    sigma: float
    ok: bool


@dataclass(eq=False)
class ErrorNorms:
    theta_error: np.ndarray
    param_error: np.ndarray
    status: np.ndarray

    @property
    def flagged(self):
        return int(np.count_nonzero(self.status != "ok"))


# ------------------ Eigenvalues ------------------
@njit(cache=True)
def _jacobi_sweeps(a, max_sweeps):
    a = a.copy()
    n = a.shape[0]
    scale = 0.0
    for i in range(n):
        for j in range(n):
            scale += a[i, j] * a[i, j]
    for _ in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += a[i, j] * a[i, j]
        if off <= 1e-32 * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
    return np.sort(np.diag(a).copy())


def symmetric_eigenvalues(mat):
    """All eigenvalues of a symmetric matrix, ascending (cyclic Jacobi rotations)."""
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    if mat.shape[0] != mat.shape[1]:
        raise NotSymmetric("matrix is not square")
    size = max(1.0, float(np.max(np.abs(mat)))) if mat.size else 1.0
    if np.max(np.abs(mat - mat.T), initial=0.0) > 1e-9 * size:
        raise NotSymmetric("matrix is not symmetric to 1e-9")
    return _jacobi_sweeps(0.5 * (mat + mat.T), 100)


# ------------------ Persistent Excitation ------------------
def _window(n_samples, t, l, dt, t0):
    if not dt > 0:
        raise ValidationError("dt > 0")
    if not l > 0:
        raise ValidationError("window length l > 0")
    i0 = int(round((t - t0) / dt))
    i1 = i0 + int(round(l / dt))
    if i0 < 0 or i1 > n_samples - 1:
        span = t0 + (n_samples - 1) * dt
        raise WindowOutOfRange(f"window [{t:g}, {t + l:g}] outside recorded range [{t0:g}, {span:g}]")
    return i0, i1


def pe_matrix(z_samples, t, l, dt, t0=0.0):
    """Trapezoidal M_L = integral of z z^T over [t, t + l]."""
    z = np.asarray(z_samples, dtype=float)
    i0, i1 = _window(z.shape[0], t, l, dt, t0)
    window = z[i0:i1 + 1]
    return trapezoid(window[:, :, None] * window[:, None, :], dx=dt, axis=0)


def pe_sweep(z_samples, t, l_values, dt, t0=0.0):
    l_values = np.asarray(sorted(l_values), dtype=float)
    min_eigs = np.array([symmetric_eigenvalues(pe_matrix(z_samples, t, l, dt, t0))[0]
                         for l in l_values])
    # nested windows add a positive-semidefinite remainder
    scale = max(1.0, float(np.max(np.abs(min_eigs), initial=0.0)))
    monotone = bool(np.all(np.diff(min_eigs) >= -1e-9 * scale))
    if not monotone:
        logger.warning("PE eigenvalue curve is not nondecreasing in L (t = %g)", t)
    return PeSweepResult(l_values, min_eigs, float(t), monotone)


# ------------------ Coupling Bounds ------------------
def laplacian(adjacency):
    adj = np.asarray(adjacency, dtype=float)
    return np.diag(adj.sum(axis=1)) - adj


def coupling_r_bound(adjacency, b_uu, b_vv):
    """Largest of the Laplacian spectrum scaled by |B_uu| and |B_vv|, at least 0."""
    spectrum = symmetric_eigenvalues(laplacian(adjacency))
    lam_max = float(spectrum[-1])
    return max(0.0, abs(b_uu) * lam_max, abs(b_vv) * lam_max)


def coupling_form_matrix(cfg, theta2):
    """Symmetric M with R(y, v) = [y; v]^T M [y; v] for the scaled couplings."""
    lap = laplacian(cfg.adjacency)
    root = math.sqrt(-3.0 * theta2)
    cross = -0.5 * (cfg.b_uv / root + root * cfg.b_vu) * lap
    return np.block([[-cfg.b_uu * lap, cross], [cross, -cfg.b_vv * lap]])


def coupling_r_for(cfg, theta2):
    """r that bounds R(y, v) <= r (|y|^2 + |v|^2) for this scheme, cross terms included.

    The Laplacian value of coupling_r_bound covers schemes whose cross terms cancel;
    otherwise the largest eigenvalue of the coupling form takes over.
    """
    spectral = coupling_r_bound(cfg.adjacency, cfg.b_uu, cfg.b_vv)
    form = float(symmetric_eigenvalues(coupling_form_matrix(cfg, theta2))[-1])
    return max(spectral, form)


def coupling_quadratic_form(st, cfg, theta2):
    """R(y, v) = (1/sigma) sum_k (y_k Y'_k + v_k V'_k), evaluated term by term."""
    unit = CouplingConfig(cfg.adjacency, 1.0, cfg.b_uu, cfg.b_uv, cfg.b_vu, cfg.b_vv)
    total = 0.0
    for k in range(cfg.n):
        y_k, v_k = coupling_terms(k, st, unit, theta2)
        total += st.y[k] * y_k + st.v[k] * v_k
    return total


def sigma_bound(eps, b, r, sigma):
    if r <= 0.0:
        return BoundsReport(float(r), math.inf, float(sigma), True)
    sigma_max = eps * b / r
    return BoundsReport(float(r), float(sigma_max), float(sigma), bool(sigma < sigma_max))


# ------------------ Trajectory Monitors ------------------
def h_energy(st):
    return 0.5 * float(np.sum(st.y ** 2) + np.sum(st.v ** 2))


def h_series(y_samples, v_samples):
    return 0.5 * (np.sum(np.asarray(y_samples) ** 2, axis=1) + np.sum(np.asarray(v_samples) ** 2, axis=1))


def boundedness_report(times, h):
    """Empirical boundedness of H(t): sup and the linear trend over the last quartile.

    Reported only; the coupling bound is sufficient, not necessary.
    """
    times = np.asarray(times, dtype=float)
    h = np.asarray(h, dtype=float)
    if h.size == 0:
        return {"sup": 0.0, "last_quartile_growth": 0.0, "bounded": True}
    if not np.all(np.isfinite(h)):
        return {"sup": math.inf, "last_quartile_growth": math.inf, "bounded": False}
    sup = float(h.max())
    start = (3 * h.size) // 4
    growth = 0.0
    if h.size - start >= 2 and times[-1] > times[start]:
        slope = np.polyfit(times[start:], h[start:], 1)[0]
        growth = float(slope * (times[-1] - times[start]))
    return {"sup": sup, "last_quartile_growth": growth, "bounded": bool(growth <= 0.1 * max(sup, 1e-12))}


def lyapunov_violations(times, values, t_from=0.0):
    """Largest rate of increase of V between consecutive samples with t >= t_from."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = times >= t_from
    t, v = times[keep], values[keep]
    if t.size < 2:
        return 0.0
    rates = np.diff(v) / np.diff(t)
    return float(max(0.0, rates.max()))


def error_norms(theta_traj, theta_true, i_ext, n):
    """Per-sample ||theta - theta*|| and ||(a,b,c,eps) - (a,b,c,eps)*||.

    Non-recoverable samples get NaN in param_error and are flagged in status.
    """
    thetas = np.atleast_2d(np.asarray(theta_traj, dtype=float))
    theta_true = np.asarray(theta_true, dtype=float)
    theta_error = np.linalg.norm(thetas - theta_true, axis=1)
    params, status = recover_parameters(thetas, i_ext, n)
    true_params, _ = recover_parameters(theta_true[None, :], i_ext, n)
    param_error = np.linalg.norm(params - true_params[0], axis=1)
    if np.any(status != "ok"):
        logger.info("%d of %d samples are not recoverable or non-physical",
                    np.count_nonzero(status != "ok"), status.size)
    return ErrorNorms(theta_error, param_error, status)


def reduction_factor(initial, final):
    if not (math.isfinite(initial) and math.isfinite(final)):
        return math.nan
    return math.inf if final == 0.0 else initial / final


def time_to_tolerance(times, errors, tol):
    """First time after which the error stays at or below tol; inf if never."""
    errors = np.asarray(errors, dtype=float)
    above = np.nonzero(~(errors <= tol))[0]
    if above.size == 0:
        return float(times[0])
    if above[-1] == errors.size - 1:
        return math.inf
    return float(times[above[-1] + 1])


# ------------------ Topology Search ------------------
def _candidate_graphs(n):
    if n < 1 or n > 8:
        raise ValidationError("match_topologies supports 1 <= n <= 8")
    atlas_n = min(n, 7)
    base = [g for g in nx.graph_atlas_g() if g.number_of_nodes() == atlas_n]
    if n <= 7:
        yield from base
        return
    # every 8-node graph is a 7-node graph plus one vertex
    for g in base:
        for mask in range(1, 2 ** 7):
            h = g.copy()
            h.add_edges_from((7, j) for j in range(7) if mask >> j & 1)
            yield h


def match_topologies(n, b_uu, b_vv, r_target, tol):
    """Connected n-node graphs whose coupling_r_bound is within tol of r_target."""
    found = {}
    for graph in _candidate_graphs(n):
        if not nx.is_connected(graph):
            continue
        adj = nx.to_numpy_array(graph, nodelist=range(n), dtype=float)
        spectrum = symmetric_eigenvalues(laplacian(adj))
        r = max(0.0, abs(b_uu) * spectrum[-1], abs(b_vv) * spectrum[-1])
        if abs(r - r_target) > tol:
            continue
        key = tuple(np.round(spectrum, 8))
        found.setdefault(key, (abs(r - r_target), adj))
    matches = sorted(found.values(), key=lambda item: item[0])
    logger.info("%d candidate topologies with r within %g of %g", len(matches), tol, r_target)
    return [adj for _, adj in matches]
