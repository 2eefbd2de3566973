# ------------------ FHN Network Model ------------------
import math
import warnings
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from numba import njit

from errors import NonPhysicalWarning, NonRecoverable, ValidationError


@dataclass(frozen=True)
class FhnParams:
    """Original node parameters of the network; c is the unknown sensor scaling."""
    a: float
    b: float
    eps: float
    c: float
    i_ext: float = 1.0

    @property
    def is_physical(self):
        return self.b > 0 and self.eps > 0 and self.c > 0

    def as_vector(self):
        """(a, b, c, eps) in the order the error norms use."""
        return np.array([self.a, self.b, self.c, self.eps])


def validate_fhn_params(p):
    if not p.b > 0:
        raise ValidationError("b > 0")
    if not p.eps > 0:
        raise ValidationError("eps > 0")
    if not p.c > 0:
        raise ValidationError("c > 0")
    for name in ("a", "b", "eps", "c", "i_ext"):
        if not math.isfinite(getattr(p, name)):
            raise ValidationError(f"{name} must be finite")
    return p


@dataclass(frozen=True)
class Theta:
    theta1: float
    theta2: float
    theta3: float
    theta4: float
    theta5: float

    @classmethod
    def from_array(cls, values):
        values = np.asarray(values, dtype=float).ravel()
        if values.size != 5:
            raise ValidationError(f"theta needs 5 entries, got {values.size}")
        return cls(*(float(x) for x in values))

    def as_array(self):
        return np.array([self.theta1, self.theta2, self.theta3, self.theta4, self.theta5])

    @property
    def recoverable(self):
        return self.theta2 < 0 and 1.0 - self.theta1 - self.theta3 > 0


@dataclass(eq=False)
class CouplingConfig:
    adjacency: np.ndarray
    sigma: float
    b_uu: float
    b_uv: float = 0.0
    b_vu: float = 0.0
    b_vv: float = 0.0

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=float)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1] or adj.shape[0] == 0:
            raise ValidationError("adjacency must be a non-empty square matrix")
        if not np.all((adj == 0.0) | (adj == 1.0)):
            raise ValidationError("adjacency entries must be 0 or 1")
        if not np.array_equal(adj, adj.T):
            raise ValidationError("adjacency symmetric")
        if np.any(np.diag(adj) != 0.0):
            raise ValidationError("adjacency zero diagonal")
        if not self.sigma >= 0:
            raise ValidationError("sigma >= 0")
        self.adjacency = adj

    @property
    def n(self):
        return self.adjacency.shape[0]

    def coupling_vector(self):
        return np.array([self.sigma, self.b_uu, self.b_uv, self.b_vu, self.b_vv])


def rotational_scheme(phi):
    """Interaction scheme (B_uu, B_uv, B_vu, B_vv) = (cos, sin, -sin, cos) of phi."""
    return math.cos(phi), math.sin(phi), -math.sin(phi), math.cos(phi)


@dataclass(eq=False)
class NetworkState:
    y: np.ndarray
    v: np.ndarray = field(default=None)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).ravel()
        self.v = np.zeros_like(self.y) if self.v is None else np.asarray(self.v, dtype=float).ravel()
        if self.y.shape != self.v.shape:
            raise ValidationError("y and v must have the same length")
        if not (np.all(np.isfinite(self.y)) and np.all(np.isfinite(self.v))):
            raise ValidationError("network state entries must be finite")


# ------------------ Topologies ------------------
CHAIR_EDGES = [(0, 1), (0, 2), (0, 3), (3, 4)]


def _graph_for(kind, n):
    if kind == "ring":
        return nx.cycle_graph(n)
    if kind == "path":
        return nx.path_graph(n)
    if kind == "star":
        return nx.star_graph(n - 1)
    if kind == "complete":
        return nx.complete_graph(n)
    if kind == "chair":
        # Reconstructed default 5-node topology, see analysis.match_topologies
        if n != 5:
            raise ValidationError("the chair topology has exactly 5 nodes")
        return nx.Graph(CHAIR_EDGES)
    raise ValidationError(f"unknown topology generator '{kind}'")


def adjacency_from_generator(kind, n):
    if n < 1:
        raise ValidationError("node count n >= 1")
    if kind == "ring" and n < 3:
        return adjacency_from_generator("path", n)
    graph = _graph_for(kind, n)
    return nx.to_numpy_array(graph, nodelist=range(n), dtype=float)


def adjacency_from_edges(edges, n):
    graph = nx.empty_graph(n)
    for edge in edges:
        if len(edge) != 2:
            raise ValidationError(f"edge {edge!r} must have two endpoints")
        i, j = int(edge[0]), int(edge[1])
        if i == j:
            raise ValidationError("adjacency zero diagonal")
        if not (0 <= i < n and 0 <= j < n):
            raise ValidationError(f"edge ({i}, {j}) outside 0..{n - 1}")
        graph.add_edge(i, j)
    return nx.to_numpy_array(graph, nodelist=range(n), dtype=float)


# ------------------ Parameter Maps ------------------
def theta_from_original(p, n):
    """Regression parameters of the summed, filtered network."""
    validate_fhn_params(p)
    if n < 1:
        raise ValidationError("node count n >= 1")
    c_inv2 = p.c ** -2
    return Theta(
        1.0 - p.eps * p.b,
        -c_inv2 / 3.0,
        p.eps * (p.b - 1.0),
        -p.eps * p.b * c_inv2 / 3.0,
        n * p.c * p.eps * (p.a + p.b * p.i_ext),
    )


def original_from_theta(t, i_ext, n):
    """Map theta back to (a, b, c, eps); warns NonPhysicalWarning when b or eps <= 0."""
    if not t.theta2 < 0:
        raise NonRecoverable(f"theta2 = {t.theta2:.6g} >= 0, c = 1/sqrt(-3 theta2) undefined")
    eps = 1.0 - t.theta1 - t.theta3
    if eps == 0.0:
        raise NonRecoverable("1 - theta1 - theta3 = 0")
    if n < 1:
        raise ValidationError("node count n >= 1")
    root = math.sqrt(-3.0 * t.theta2)
    p = FhnParams(
        a=(t.theta5 * root - n * i_ext * (1.0 - t.theta1)) / (n * eps),
        b=(1.0 - t.theta1) / eps,
        eps=eps,
        c=1.0 / root,
        i_ext=i_ext,
    )
    if not p.is_physical:
        warnings.warn(f"recovered parameters are non-physical (b={p.b:.4g}, eps={p.eps:.4g})",
                      NonPhysicalWarning, stacklevel=2)
    return p


# ------------------ Dynamics ------------------
@njit(cache=True)
def scaled_network_derivative(y, v, theta, adj, coupling, i_ext):
    n = y.size
    root = np.sqrt(-3.0 * theta[1])
    eps = 1.0 - theta[0] - theta[2]
    sigma = coupling[0]
    b_uu = coupling[1]
    b_uv = coupling[2]
    b_vu = coupling[3]
    b_vv = coupling[4]
    dy = np.empty(n)
    dv = np.empty(n)
    for k in range(n):
        cy = 0.0
        cv = 0.0
        for j in range(n):
            a_kj = adj[k, j]
            if a_kj != 0.0:
                dyj = y[j] - y[k]
                dvj = v[j] - v[k]
                cy += a_kj * (b_uu * dyj + b_uv / root * dvj)
                cv += a_kj * (root * b_vu * dyj + b_vv * dvj)
        dy[k] = y[k] + theta[1] * y[k] ** 3 - v[k] / root + i_ext / root + sigma * cy
        # constant term is -eps*a, written through theta as in the original network
        dv[k] = (eps * root * y[k] - theta[4] * root / n + (1.0 - theta[0]) * i_ext
                 + (theta[0] - 1.0) * v[k] + sigma * cv)
    return dy, dv


def coupling_terms(k, st, cfg, theta2):
    """(Y'_k, V'_k) for node k in scaled coordinates."""
    if not theta2 < 0:
        raise ValidationError("theta2 < 0")
    root = math.sqrt(-3.0 * theta2)
    row = cfg.adjacency[k]
    dy = st.y - st.y[k]
    dv = st.v - st.v[k]
    y_term = cfg.sigma * float(row @ (cfg.b_uu * dy + cfg.b_uv / root * dv))
    v_term = cfg.sigma * float(row @ (root * cfg.b_vu * dy + cfg.b_vv * dv))
    return y_term, v_term


def network_rhs(st, t, cfg, i_ext, n):
    if not t.recoverable:
        raise ValidationError("theta must be recoverable (theta2 < 0, 1 - theta1 - theta3 > 0)")
    if st.y.size != n or cfg.n != n:
        raise ValidationError(f"state length {st.y.size} and adjacency {cfg.n} must equal n = {n}")
    dy, dv = scaled_network_derivative(st.y, st.v, t.as_array(), cfg.adjacency,
                                       cfg.coupling_vector(), float(i_ext))
    return NetworkState(dy, dv)


def recover_parameters(thetas, i_ext, n):
    """Vectorised original_from_theta over rows of thetas.

    Returns (params, status): params rows are (a, b, c, eps), NaN where the row is
    not recoverable; status holds 'ok', 'non_physical' or 'non_recoverable'.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    eps = 1.0 - thetas[:, 0] - thetas[:, 2]
    recoverable = (thetas[:, 1] < 0) & (eps != 0.0)
    params = np.full((thetas.shape[0], 4), np.nan)
    th = thetas[recoverable]
    e = eps[recoverable]
    root = np.sqrt(-3.0 * th[:, 1])
    params[recoverable, 0] = (th[:, 4] * root - n * i_ext * (1.0 - th[:, 0])) / (n * e)
    params[recoverable, 1] = (1.0 - th[:, 0]) / e
    params[recoverable, 2] = 1.0 / root
    params[recoverable, 3] = e
    status = np.full(thetas.shape[0], "non_recoverable", dtype=object)
    physical = recoverable & (eps > 0)
    physical[recoverable] &= params[recoverable, 1] > 0
    status[recoverable] = "non_physical"
    status[physical] = "ok"
    return params, status
