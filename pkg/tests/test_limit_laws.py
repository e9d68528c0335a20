import math

import numpy as np
import pytest

from skewlab.errors import ConfigError
from skewlab.ode import IntegratorConfig
from skewlab.limit_laws import (
    CovarianceEstimate,
    autocovariance,
    check_window_bound,
    estimate_ldp,
    estimate_sigma_ensemble,
    estimate_sigma_green_kubo,
    relative_frobenius,
    symmetrize_psd,
    wip_diagnostics,
    wip_path,
)
from skewlab.measure import MuSampler, sample_mu

FAST = MuSampler(burn_in=20.0)


def test_wip_path_closed_form(decay_system):
    # W_n(t) = n^-1/2 int_0^{nt} y2(0) e^-s ds
    n = 50.0
    w = wip_path(decay_system, n, 1.0, [1.0, 2.0, 3.0], record_dt=0.01)
    t = w.path.times
    np.testing.assert_allclose(w.path.states[:, 0], 2 * (1 - np.exp(-n * t)) / math.sqrt(n), atol=1e-9)


def test_zero_f0_gives_zero_sigma(zero_system):
    est, _ = estimate_sigma_ensemble(zero_system, 10.0, 30, FAST, T=2.0)
    np.testing.assert_array_equal(est.sigma, np.zeros((1, 1)))
    gk = estimate_sigma_green_kubo(zero_system, 1.0, 20.0, np.ones((2, 3)))
    np.testing.assert_array_equal(gk.sigma, np.zeros((1, 1)))


def test_ensemble_needs_30_members(bench):
    with pytest.raises(ConfigError):
        estimate_sigma_ensemble(bench, 10.0, 10, FAST)


def test_green_kubo_truncation_guard(bench):
    with pytest.raises(ConfigError):
        estimate_sigma_green_kubo(bench, 5.0, 20.0, [1.0, 1.0, 1.0])


def test_autocovariance_matches_direct(rng):
    a = rng.normal(size=(2, 300, 2))
    a[..., 1] += 0.5 * np.roll(a[..., 0], 1, axis=1)
    C = autocovariance(a, 5)
    c = a - a.reshape(-1, 2).mean(0)
    for k in range(6):
        ref = sum(c[ch, k:].T @ c[ch, : 300 - k] for ch in range(2)) / (2 * (300 - k))
        np.testing.assert_allclose(C[k], ref, atol=1e-12)


def test_symmetrize_psd_clips():
    s, clipped = symmetrize_psd(np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert clipped == pytest.approx(1.0)
    assert np.linalg.eigvalsh(s).min() >= -1e-12
    assert np.array_equal(s, s.T)


def test_covariance_estimate_flags():
    e = CovarianceEstimate(np.eye(2), "x", 10, np.zeros((2, 2)), 0.0, {})
    assert e.is_symmetric(0.0) and e.is_psd()
    assert relative_frobenius(2 * np.eye(2), np.eye(2)) == pytest.approx(1.0)


def test_sigma_ensemble_on_lorenz_is_plausible(bench):
    est, path = estimate_sigma_ensemble(bench, 100.0, 200, MuSampler(), T=2.0)
    assert 30 < est.sigma[0, 0] < 100
    assert est.is_symmetric(0.0) and est.is_psd()
    diag = wip_diagnostics(path)
    assert 0.3 < diag["var_ratio_half"][0] < 0.7
    assert "var_ratio_T2" in diag


def test_green_kubo_positive(bench):
    starts = sample_mu(bench, FAST, 4).states
    est = estimate_sigma_green_kubo(bench, 5.0, 200.0, starts)
    assert 20 < est.sigma[0, 0] < 110
    assert np.isfinite(est.std_err).all()


def _small_ldp(bench, **kw):
    starts = sample_mu(bench, FAST, 100).states
    x = np.array([[0.0], [1.0]])
    F = -np.tanh(x)
    return estimate_ldp(bench, x, [0.05, 0.2, 1.0, 4.5], [5.0, 20.0], 100, F, starts=starts, **kw)


def test_ldp_shape_properties(bench):
    est = _small_ldp(bench)
    assert est.b_hat.shape == (2, 4, 2)
    assert np.all(np.diff(est.b_hat, axis=1) <= 0)
    assert np.all(est.b_hat[:, -1, :] == 0)  # a > 2|f|_inf
    # f - F does not depend on x for the benchmark coupling
    np.testing.assert_allclose(est.b_hat[0], est.b_hat[1])
    assert est.b_uniform().shape == (4, 2)


def test_ldp_guards(bench):
    with pytest.raises(ConfigError):
        estimate_ldp(bench, [[0.0]], [0.1], [5.0], 50, [[0.0]])
    starts = sample_mu(bench, FAST, 100).states
    with pytest.raises(ConfigError):
        estimate_ldp(bench, [[0.0]], [0.1], [5.0, 5.0001], 100, [[0.0]], starts=starts,
                     cfg=IntegratorConfig(h_tau=0.005))


def test_window_bound_inequality(bench):
    starts = sample_mu(bench, FAST, 100).states
    res = check_window_bound(bench, [0.0], 0.1, 10.0, [0.0], n_windows=100, starts=starts)
    assert res["slack_ok"] and res["rhs"] >= 0.1
    assert set(res) >= {"lhs", "lhs_se", "slack", "b_hat", "lhs_shifted", "stationary_ok"}
