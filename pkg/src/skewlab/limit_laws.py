"""Estimators for the two limit laws the diffusion limit rests on.

* Rescaled integrals W_n(t) = n^-1/2 int_0^{nt} f0(y(tau)) dtau and their
  covariance Sigma, read off either from an ensemble of W_n(1) or from the
  Green-Kubo integral of the autocovariance of f0.
* The deviation tail b(a, T) of finite-time averages of f(x, .) and the
  expectation bound E|avg - F| <= a + 2|f|_inf b(a, T).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import ode
from .errors import ConfigError, InputError
from .flows import FlowSystem
from .measure import FrozenSlow, MuSampler, sample_mu
from .ode import IntegratorConfig, TrajectoryGrid
from .stats import binomial_se, correlation_with_se, covariance, jackknife_covariance_se, mean_and_se

log = logging.getLogger(__name__)

SYM_TOL = 1e-12
PSD_TOL = 1e-10


@dataclass
class WipPath:
    n: float
    T: float
    path: TrajectoryGrid

    def __post_init__(self):
        if not np.allclose(self.path.states[0], 0.0, atol=0.0):
            raise InputError("W_n must start at 0")

    def at(self, t: float) -> np.ndarray:
        return self.path.at(t)


@dataclass
class CovarianceEstimate:
    sigma: np.ndarray
    method: str
    n_samples: int
    std_err: np.ndarray
    clipped_mass: float = 0.0
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        self.sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        self.std_err = np.atleast_2d(np.asarray(self.std_err, dtype=float))

    @property
    def asymmetry(self) -> float:
        return float(np.abs(self.sigma - self.sigma.T).max())

    @property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.sigma).min())

    def is_symmetric(self, tol: float = SYM_TOL) -> bool:
        return self.asymmetry <= tol

    def is_psd(self, tol: float = PSD_TOL) -> bool:
        return self.min_eigenvalue >= -tol


@dataclass
class LdpEstimate:
    """Empirical tail b_hat[p, i, j] = P(|avg_T - F(x_p)| > a_i) at T = T_grid[j]."""

    x_points: np.ndarray
    a_grid: np.ndarray
    T_grid: np.ndarray
    b_hat: np.ndarray
    n_windows: int
    deviations: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if (self.b_hat < 0).any() or (self.b_hat > 1).any():
            raise InputError("b_hat must lie in [0, 1]")

    @property
    def std_err(self) -> np.ndarray:
        return binomial_se(self.b_hat, self.n_windows)

    def b_uniform(self) -> np.ndarray:
        """x-uniform tail: the worst case over the x grid, shape (len(a), len(T))."""
        return self.b_hat.max(axis=0)


def symmetrize_psd(sigma) -> tuple[np.ndarray, float]:
    """Symmetrize and clip negative eigenvalues to 0; returns (matrix, clipped mass)."""
    s = np.atleast_2d(np.asarray(sigma, dtype=float))
    s = 0.5 * (s + s.T)
    w, v = np.linalg.eigh(s)
    clipped = float(-w[w < 0].sum())
    if clipped > 0:
        log.info("PSD projection clipped eigenvalue mass %.3g", clipped)
        s = (v * np.clip(w, 0.0, None)) @ v.T
        s = 0.5 * (s + s.T)
    return s, clipped


def _wip_stride(n, T, cfg, record_dt):
    _, h = cfg.steps_for(n * T)
    record_dt = T / 1000.0 if record_dt is None else record_dt
    return max(1, int(round(record_dt * n / h)))


def wip_path(
    system: FlowSystem,
    n: float,
    T: float,
    eta,
    cfg: IntegratorConfig = IntegratorConfig(),
    record_dt: float | None = None,
) -> WipPath:
    """W_n on [0, T] from start(s) eta; eta of shape (M, ell) gives an ensemble.

    The fast-time integral is accumulated at full RK4 resolution; the path is
    stored every `record_dt` (default T/1000) in rescaled time t = tau / n.
    """
    if not n > 0 or not T > 0:
        raise ConfigError("n and T must be positive")
    stride = _wip_stride(n, T, cfg, record_dt)
    integral, _ = ode.fast_integral(system, eta, n * T, system.f0, cfg, record_every=stride)
    scale = 1.0 / math.sqrt(n)
    path = TrajectoryGrid(0.0, integral.dt / n, integral.states * scale, "slow")
    return WipPath(float(n), float(T), path)


def estimate_sigma_ensemble(
    system: FlowSystem,
    n: float,
    M: int,
    sampler: MuSampler = MuSampler(),
    cfg: IntegratorConfig = IntegratorConfig(),
    T: float = 2.0,
    t_read: float = 1.0,
    etas=None,
) -> tuple[CovarianceEstimate, WipPath]:
    """Sigma ~ Cov W_n(t_read) / t_read over M mu-sampled starts.

    Also returns the ensemble WIP path (horizon T) for the Brownian-likeness
    and horizon-independence diagnostics.
    """
    if M < 30:
        raise ConfigError(f"ensemble size M={M} is below the minimum of 30")
    if etas is None:
        etas = sample_mu(system, sampler, M, cfg, tag="sigma-ensemble").states
    etas = np.asarray(etas, dtype=float)
    if etas.shape[0] != M:
        raise InputError("etas must have M rows")
    path = wip_path(system, n, T, etas, cfg, record_dt=min(0.01, T / 100))
    w1 = path.at(t_read)
    sigma = covariance(w1) / t_read
    se = jackknife_covariance_se(w1) / t_read
    psd, clipped = symmetrize_psd(sigma)
    est = CovarianceEstimate(psd, "ensemble", M, se, clipped, {"n": n, "t_read": t_read})
    return est, path


def wip_diagnostics(path: WipPath, n_se: float = 3.0) -> dict:
    """Brownian-likeness of an ensemble W_n and horizon independence of Sigma.

    Checks: mean W_n(1) within n_se standard errors of 0; Var W_n(1/2) /
    Var W_n(1) per coordinate; correlation of W_n(1/2) with the increment
    W_n(1) - W_n(1/2); Var W_n(2) / (2 Var W_n(1)) when the path reaches 2.
    A degenerate (zero-variance) path gives NaN ratios, which fail the checks.
    """
    with np.errstate(invalid="ignore", divide="ignore"):
        return _wip_diagnostics(path, n_se)


def _wip_diagnostics(path, n_se):
    w_half, w1 = path.at(0.5), path.at(1.0)
    mean1, se1 = mean_and_se(w1)
    var_half = w_half.var(axis=0, ddof=1)
    var1 = w1.var(axis=0, ddof=1)
    inc = w1 - w_half
    corr = [correlation_with_se(w_half[:, i], inc[:, i]) for i in range(w1.shape[1])]
    out = {
        "mean_W1": mean1,
        "mean_W1_se": se1,
        "mean_ok": bool(np.all(np.abs(mean1) <= n_se * se1)),
        "var_ratio_half": var_half / var1,
        "var_ratio_ok": bool(np.all((var_half / var1 >= 0.4) & (var_half / var1 <= 0.6))),
        "increment_corr": np.array([c for c, _ in corr]),
        "increment_corr_se": np.array([s for _, s in corr]),
    }
    out["increment_corr_ok"] = bool(np.all(np.abs(out["increment_corr"]) <= n_se * out["increment_corr_se"]))
    if path.path.t_end >= 2.0 - 1e-12:
        ratio = path.at(2.0).var(axis=0, ddof=1) / (2.0 * var1)
        out["var_ratio_T2"] = ratio
        out["var_ratio_T2_ok"] = bool(np.all(np.abs(ratio - 1.0) <= 0.15))
    return out


def autocovariance(series, max_lag: int) -> np.ndarray:
    """Stationary cross-covariance C[k, i, j] = E (a_i(t+k) - m_i)(a_j(t) - m_j).

    `series` has shape (N, d) or (chains, N, d); chains share the mean and
    their lag products are pooled.
    """
    a = np.asarray(series, dtype=float)
    if a.ndim == 2:
        a = a[None]
    n_chain, N, d = a.shape
    if max_lag >= N:
        raise ConfigError("max_lag must be shorter than the series")
    a = a - a.reshape(-1, d).mean(axis=0)
    nfft = 1 << int(math.ceil(math.log2(2 * N)))
    spec = np.fft.rfft(a, n=nfft, axis=1)
    out = np.empty((max_lag + 1, d, d))
    counts = n_chain * (N - np.arange(max_lag + 1))
    for i in range(d):
        for j in range(d):
            cross = np.fft.irfft(spec[:, :, i] * np.conj(spec[:, :, j]), n=nfft, axis=1)
            out[:, i, j] = cross[:, : max_lag + 1].sum(axis=0) / counts
    return out


def estimate_sigma_green_kubo(
    system: FlowSystem,
    T_corr: float,
    T_run: float,
    eta,
    cfg: IntegratorConfig = IntegratorConfig(),
    sample_dt: float = 0.05,
) -> CovarianceEstimate:
    """Sigma = int_0^T_corr (C(s) + C(s)^T) ds from the autocovariance of f0.

    `eta` is one start or a batch of starts; each is run for T_run and the
    lag products of all runs are pooled.  Trapezoid in the lag variable.
    """
    if not 0 < T_corr < T_run / 10.0:
        raise ConfigError(f"T_corr={T_corr} must be below T_run/10={T_run / 10}")
    eta = np.asarray(eta, dtype=float)
    n_steps, h = cfg.steps_for(T_run)
    every = max(1, int(round(sample_dt / h)))
    traj = ode.integrate_fast(system, eta, T_run, IntegratorConfig(cfg.h_tau, record_stride=every, max_bytes=cfg.max_bytes))
    vals = np.asarray(system.f0(traj.states), dtype=float)  # (N, [K], d)
    if vals.ndim == 2:
        vals = vals[:, None, :]
    vals = np.moveaxis(vals, 1, 0)  # (K, N, d)
    lag_dt = traj.dt
    max_lag = int(round(T_corr / lag_dt))
    C = autocovariance(vals, max_lag)
    K = C + np.transpose(C, (0, 2, 1))
    sigma = lag_dt * (0.5 * K[0] + K[1:-1].sum(axis=0) + 0.5 * K[-1])
    psd, clipped = symmetrize_psd(sigma)
    # crude error: spread of per-chain estimates when several chains exist
    if vals.shape[0] >= 2:
        per = []
        for chain in vals:
            Ck = autocovariance(chain, max_lag)
            Kk = Ck + np.transpose(Ck, (0, 2, 1))
            per.append(lag_dt * (0.5 * Kk[0] + Kk[1:-1].sum(axis=0) + 0.5 * Kk[-1]))
        se = np.std(per, axis=0, ddof=1) / math.sqrt(len(per))
    else:
        se = np.full_like(psd, np.nan)
    return CovarianceEstimate(
        psd, "green_kubo", vals.shape[0] * vals.shape[1], se, clipped, {"T_corr": T_corr, "T_run": T_run}
    )


def relative_frobenius(a, b) -> float:
    """||a - b||_F / ||b||_F."""
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def _window_integrals(system, x_points, starts, T_marks, cfg):
    """int_0^T f(x_p, y) dtau at each T in T_marks, shape (len(T), W, P, d)."""
    T_marks = np.asarray(T_marks, dtype=float)
    T_max = float(T_marks.max())
    n, h = cfg.steps_for(T_max)
    idx = np.rint(T_marks / h).astype(int)
    if np.any(np.abs(idx * h - T_marks) > 1e-9 * T_marks):
        raise ConfigError(f"window lengths {T_marks.tolist()} are not multiples of the step {h}")
    # only the marks are needed, so record every gcd(marks) steps
    stride = int(np.gcd.reduce(idx))
    integral, _ = ode.fast_integral(system, starts, T_max, FrozenSlow(system.f, x_points), cfg, record_every=stride)
    return integral.states[idx // stride]


def estimate_ldp(
    system: FlowSystem,
    x_points,
    a_grid,
    T_grid,
    n_windows: int,
    F_hat,
    sampler: MuSampler = MuSampler(),
    cfg: IntegratorConfig = IntegratorConfig(),
    starts=None,
) -> LdpEstimate:
    """Fraction of mu-started windows whose time-T average of f(x, .) misses F(x) by more than a.

    Windows for all T share their starts: the average over [0, T] is read
    from one run of length max(T_grid).
    """
    if n_windows < 100:
        raise ConfigError(f"n_windows={n_windows} is below the minimum of 100")
    x_points = np.atleast_2d(np.asarray(x_points, dtype=float))
    F_hat = np.asarray(F_hat, dtype=float).reshape(x_points.shape)
    a_grid = np.sort(np.asarray(a_grid, dtype=float))
    T_grid = np.asarray(T_grid, dtype=float)
    if starts is None:
        starts = sample_mu(system, sampler, n_windows, cfg, tag="ldp").states
    starts = np.asarray(starts, dtype=float)[:n_windows]
    if starts.shape[0] < n_windows:
        raise ConfigError("not enough window starts")
    ints = _window_integrals(system, x_points, starts, T_grid, cfg)
    avgs = ints / T_grid[:, None, None, None]
    dev = np.linalg.norm(avgs - F_hat[None, None], axis=-1)  # (T, W, P)
    exceed = dev[None, :, :, :] > a_grid[:, None, None, None]  # (a, T, W, P)
    b_hat = exceed.mean(axis=2).transpose(2, 0, 1)  # (P, a, T)
    return LdpEstimate(x_points, a_grid, T_grid, b_hat, n_windows, dev)


def check_window_bound(
    system: FlowSystem,
    x,
    a: float,
    T: float,
    F_hat,
    n_windows: int = 400,
    shift_n: int = 3,
    sampler: MuSampler = MuSampler(),
    cfg: IntegratorConfig = IntegratorConfig(),
    starts=None,
    n_se: float = 3.0,
) -> dict:
    """Empirical E|1/T int_{nT}^{(n+1)T} f(x, y) - F(x)| against a + 2|f|_inf b(a, T).

    lhs and b_hat use the n=0 windows; the same starts continued to the
    window n=shift_n give the stationarity comparison.
    """
    if not math.isfinite(system.f_sup):
        raise ConfigError("check_window_bound needs a finite f_sup")
    x = np.asarray(x, dtype=float).reshape(1, system.d)
    F_hat = np.asarray(F_hat, dtype=float).reshape(1, system.d)
    if starts is None:
        starts = sample_mu(system, sampler, n_windows, cfg, tag="window_bound").states
    starts = np.asarray(starts, dtype=float)[:n_windows]
    marks = np.array([T, shift_n * T, (shift_n + 1) * T], dtype=float)
    ints = _window_integrals(system, x, starts, marks, cfg)[:, :, 0, :]
    dev0 = np.linalg.norm(ints[0] / T - F_hat[0], axis=-1)
    devn = np.linalg.norm((ints[2] - ints[1]) / T - F_hat[0], axis=-1)
    lhs, lhs_se = mean_and_se(dev0)
    lhs_n, lhs_n_se = mean_and_se(devn)
    b_hat = float((dev0 > a).mean())
    rhs = a + 2.0 * system.f_sup * b_hat
    slack = rhs - float(lhs)
    combined = math.sqrt(float(lhs_se) ** 2 + float(lhs_n_se) ** 2)
    return {
        "lhs": float(lhs),
        "lhs_se": float(lhs_se),
        "rhs": rhs,
        "slack": slack,
        "b_hat": b_hat,
        "lhs_shifted": float(lhs_n),
        "lhs_shifted_se": float(lhs_n_se),
        "shift_n": shift_n,
        "slack_ok": slack >= -n_se * float(lhs_se),
        "stationary_ok": abs(float(lhs) - float(lhs_n)) <= n_se * combined,
    }
