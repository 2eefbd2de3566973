import math

import numpy as np
import pytest
import scipy.linalg
from numpy.testing import assert_allclose

from analysis import (PeSweepResult, boundedness_report, coupling_form_matrix, coupling_quadratic_form,
                      coupling_r_bound, coupling_r_for, error_norms, h_energy, laplacian, lyapunov_violations,
                      match_topologies, pe_matrix, pe_sweep, reduction_factor, sigma_bound, symmetric_eigenvalues,
                      time_to_tolerance)
from errors import NotSymmetric, ValidationError, WindowOutOfRange
from model import (CHAIR_EDGES, CouplingConfig, FhnParams, NetworkState, adjacency_from_edges,
                   adjacency_from_generator, rotational_scheme, theta_from_original)

PHI = math.pi / 2 - 0.1


# ------------------ Eigenvalues ------------------
def test_symmetric_eigenvalues_examples():
    assert_allclose(symmetric_eigenvalues([[2.0, 0.0], [0.0, 1.0]]), [1.0, 2.0])
    assert_allclose(symmetric_eigenvalues([[2.0, 1.0], [1.0, 2.0]]), [1.0, 3.0], atol=1e-12)
    assert_allclose(symmetric_eigenvalues(np.zeros((3, 3))), [0.0, 0.0, 0.0])


def test_symmetric_eigenvalues_match_lapack(rng):
    for n in (1, 2, 5, 12):
        a = rng.normal(size=(n, n))
        a = a + a.T
        assert_allclose(symmetric_eigenvalues(a), scipy.linalg.eigvalsh(a), rtol=1e-9, atol=1e-9)


def test_symmetric_eigenvalues_rejects_asymmetric():
    with pytest.raises(NotSymmetric):
        symmetric_eigenvalues([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(NotSymmetric):
        symmetric_eigenvalues(np.ones((2, 3)))


# ------------------ Persistent Excitation ------------------
def test_constant_regressor_is_not_persistently_exciting():
    z = np.tile([1.0, 2.0], (1001, 1))
    eigs = symmetric_eigenvalues(pe_matrix(z, 0.0, 1.0, 0.001))
    assert eigs[0] == pytest.approx(0.0, abs=1e-12)
    assert eigs[1] == pytest.approx(5.0)


def test_sin_cos_window_over_one_period():
    dt = 2 * np.pi / 10000
    t = dt * np.arange(10001)
    z = np.column_stack([np.sin(t), np.cos(t)])
    assert_allclose(pe_matrix(z, 0.0, 2 * np.pi, dt), np.pi * np.eye(2), atol=1e-9)


def test_pe_window_outside_recording():
    z = np.ones((11, 2))
    with pytest.raises(WindowOutOfRange):
        pe_matrix(z, 0.5, 1.0, 0.1)
    with pytest.raises(WindowOutOfRange):
        pe_matrix(z, 1.0, 1.0, 0.1, t0=2.0)
    with pytest.raises(ValidationError):
        pe_matrix(z, 0.0, 0.0, 0.1)


def test_pe_sweep_is_nondecreasing(rng):
    dt = 0.01
    t = dt * np.arange(2001)
    z = np.column_stack([np.sin(t), np.sin(3 * t) ** 2, np.ones_like(t)]) + 0.05 * rng.normal(size=(t.size, 3))
    pe = pe_sweep(z, 1.0, [4.0, 0.5, 1.0, 2.0, 8.0], dt)
    assert_allclose(pe.l_values, [0.5, 1.0, 2.0, 4.0, 8.0])
    assert pe.monotone
    assert np.all(np.diff(pe.min_eigs) >= -1e-12)
    assert pe.smallest_passing_length() is not None


def test_smallest_passing_length_needs_all_later_windows():
    pe = PeSweepResult(np.array([1.0, 2.0, 3.0, 4.0]), np.array([0.0, 0.2, 0.0, 0.3]), 1.0)
    assert pe.smallest_passing_length() == 4.0
    assert PeSweepResult(np.array([1.0]), np.array([0.0]), 1.0).smallest_passing_length() is None


# ------------------ Coupling Bounds ------------------
def test_laplacian_spectra():
    assert_allclose(symmetric_eigenvalues(laplacian([[0, 1], [1, 0]])), [0.0, 2.0], atol=1e-12)
    ring = symmetric_eigenvalues(laplacian(adjacency_from_generator("ring", 5)))
    assert ring[-1] == pytest.approx((5 + math.sqrt(5)) / 2)
    complete = symmetric_eigenvalues(laplacian(adjacency_from_generator("complete", 5)))
    assert_allclose(complete, [0.0, 5.0, 5.0, 5.0, 5.0], atol=1e-12)


def test_coupling_r_bound_examples():
    pair = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert coupling_r_bound(pair, 1.0, 0.0) == pytest.approx(2.0)
    assert coupling_r_bound(pair, 0.0, 0.0) == 0.0
    assert coupling_r_bound(pair, -0.5, 0.25) == pytest.approx(1.0)
    assert coupling_r_bound(adjacency_from_generator("ring", 5), 1.0, 0.0) == pytest.approx(3.618, abs=1e-3)


def test_chair_topology_with_rotational_scheme():
    b_uu, _, _, b_vv = rotational_scheme(PHI)
    r = coupling_r_bound(adjacency_from_edges(CHAIR_EDGES, 5), b_uu, b_vv)
    assert r == pytest.approx(0.42, abs=0.005)
    report = sigma_bound(0.08, 0.8, r, 0.05)
    assert report.sigma_max == pytest.approx(0.1537, abs=1e-3)
    assert report.ok


def test_sigma_bound_examples():
    report = sigma_bound(0.06, 0.6, 3.618, 0.0099)
    assert report.sigma_max == pytest.approx(0.00995, abs=1e-5)
    assert report.ok
    # strict inequality
    assert not sigma_bound(0.1, 1.0, 1.0, 0.1).ok
    assert sigma_bound(0.1, 1.0, 0.0, 5.0).ok


def test_quadratic_form_is_bounded_by_r(rng):
    """R(y, v) <= r (|y|^2 + |v|^2) on random graphs, schemes and c."""
    for _ in range(20):
        n = int(rng.integers(2, 8))
        upper = np.triu((rng.random((n, n)) < 0.6).astype(float), 1)
        adj = upper + upper.T
        cfg = CouplingConfig(adj, 1.0, *rng.uniform(-1.0, 1.0, 4))
        theta2 = rng.uniform(-2.0, -0.05)
        r = coupling_r_for(cfg, theta2)
        assert r >= coupling_r_bound(adj, cfg.b_uu, cfg.b_vv)
        for _ in range(25):
            st = NetworkState(rng.normal(size=n), rng.normal(size=n))
            x = np.concatenate([st.y, st.v])
            form = coupling_quadratic_form(st, cfg, theta2)
            assert form == pytest.approx(x @ coupling_form_matrix(cfg, theta2) @ x, abs=1e-10)
            assert form <= r * (x @ x) + 1e-9
        draws = rng.normal(size=(500, 2 * n))
        forms = np.einsum("ij,jk,ik->i", draws, coupling_form_matrix(cfg, theta2), draws)
        assert np.all(forms <= r * np.einsum("ij,ij->i", draws, draws) + 1e-9)


def test_laplacian_r_suffices_when_cross_terms_cancel(rng):
    # rotational scheme at c = 1: B_uv / sqrt(-3 theta2) + sqrt(-3 theta2) B_vu = 0
    theta2 = -1.0 / 3.0
    for _ in range(10):
        n = int(rng.integers(2, 8))
        upper = np.triu((rng.random((n, n)) < 0.6).astype(float), 1)
        adj = upper + upper.T
        cfg = CouplingConfig(adj, 1.0, *rotational_scheme(rng.uniform(0, math.pi / 2)))
        assert coupling_r_for(cfg, theta2) == pytest.approx(coupling_r_bound(adj, cfg.b_uu, cfg.b_vv))
        # R is a negative semidefinite Laplacian form when the scheme has no cross terms
        assert symmetric_eigenvalues(coupling_form_matrix(CouplingConfig(adj, 1.0, 1.0), theta2))[-1] <= 1e-10


def test_cross_only_scheme_has_positive_r():
    ring = adjacency_from_generator("ring", 5)
    cfg = CouplingConfig(ring, 1.0, 0.0, 1.0, 0.0, 0.0)
    assert coupling_r_bound(ring, cfg.b_uu, cfg.b_vv) == 0.0
    # eigenvalues of [[0, -L/2], [-L/2, 0]] are +-lambda(L)/2
    assert coupling_r_for(cfg, -1.0 / 3.0) == pytest.approx(3.618034 / 2, abs=1e-6)


# ------------------ Monitors ------------------
def test_h_energy():
    assert h_energy(NetworkState([0.0, 0.0], [0.0, 0.0])) == 0.0
    assert h_energy(NetworkState([1.0], [1.0])) == pytest.approx(1.0)


def test_boundedness_report():
    t = np.linspace(0.0, 100.0, 401)
    assert boundedness_report(t, 2.0 + np.sin(t))["bounded"]
    growing = boundedness_report(t, t ** 2)
    assert not growing["bounded"]
    assert growing["sup"] == pytest.approx(1e4)
    assert not boundedness_report(t[:2], np.array([1.0, np.inf]))["bounded"]


def test_lyapunov_violations():
    t = np.array([0.0, 1.0, 2.0, 3.0])
    assert lyapunov_violations(t, [5.0, 1.0, 0.5, 0.5], t_from=0.0) == 0.0
    assert lyapunov_violations(t, [0.0, 1.0, 0.5, 0.7], t_from=1.5) == pytest.approx(0.2)
    assert lyapunov_violations(t, [0.0, 1.0, 0.5, 0.7], t_from=0.0) == pytest.approx(1.0)


# ------------------ Errors and Timing ------------------
def test_error_norms_for_both_experiments():
    guesses = [(FhnParams(-0.7, 0.8, 0.08, 1.0), FhnParams(-0.3, 1.5, 0.01, 1.1), 0.81541),
               (FhnParams(-0.525, 0.6, 0.06, 0.75), FhnParams(-0.9, 0.2, 0.1, 0.97), 0.59213)]
    for truth, guess, expected in guesses:
        theta_true = theta_from_original(truth, 5).as_array()
        theta0 = theta_from_original(guess, 5).as_array()
        norms = error_norms(np.vstack([theta0, theta_true]), theta_true, 1.0, 5)
        assert norms.param_error[0] == pytest.approx(expected, abs=1e-5)
        assert norms.param_error[1] == pytest.approx(0.0, abs=1e-12)
        assert norms.theta_error[1] == 0.0
        assert norms.flagged == 0


def test_error_norms_flag_non_recoverable_samples():
    theta_true = theta_from_original(FhnParams(-0.7, 0.8, 0.08, 1.0), 5).as_array()
    bad = theta_true.copy()
    bad[1] = 0.2
    norms = error_norms(np.vstack([theta_true, bad]), theta_true, 1.0, 5)
    assert norms.status.tolist() == ["ok", "non_recoverable"]
    assert math.isnan(norms.param_error[1])
    assert norms.flagged == 1


def test_reduction_factor_and_time_to_tolerance():
    assert reduction_factor(1.0, 0.01) == pytest.approx(100.0)
    assert reduction_factor(1.0, 0.0) == math.inf
    assert math.isnan(reduction_factor(1.0, math.nan))
    t = np.arange(5.0)
    assert time_to_tolerance(t, [1.0, 0.5, 0.01, 0.2, 0.01], 0.05) == 4.0
    assert time_to_tolerance(t, [1.0, 0.5, 0.01, 0.02, 0.01], 0.05) == 2.0
    assert time_to_tolerance(t, [1.0, 0.5, 0.4, 0.3, 0.2], 0.05) == math.inf
    assert time_to_tolerance(t, [0.0] * 5, 0.05) == 0.0


# ------------------ Topology Search ------------------
def test_match_topologies_two_nodes():
    matches = match_topologies(2, 1.0, 0.0, 2.0, 1e-6)
    assert len(matches) == 1
    assert_allclose(matches[0], [[0.0, 1.0], [1.0, 0.0]])


def test_match_topologies_recovers_chair_spectrum():
    b_uu, _, _, b_vv = rotational_scheme(PHI)
    matches = match_topologies(5, b_uu, b_vv, 0.42, 0.005)
    assert matches
    chair = symmetric_eigenvalues(laplacian(adjacency_from_edges(CHAIR_EDGES, 5)))
    spectra = [symmetric_eigenvalues(laplacian(adj)) for adj in matches]
    assert any(np.allclose(s, chair, atol=1e-8) for s in spectra)
    for adj in matches:
        assert abs(coupling_r_bound(adj, b_uu, b_vv) - 0.42) <= 0.005


def test_match_topologies_unreachable_target():
    assert match_topologies(5, 1.0, 0.0, 100.0, 0.01) == []
    with pytest.raises(ValidationError):
        match_topologies(9, 1.0, 0.0, 1.0, 0.1)
