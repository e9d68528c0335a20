"""Numerical stand-in for the invariant measure of the fast flow.

Space averages against mu are replaced by time averages along fast-flow
trajectories (ergodicity is assumed, not checked), and draws from mu are
trajectory states taken after a burn-in.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import ode
from .errors import ConfigError, InputError
from .flows import Centered, FlowSystem
from .ode import IntegratorConfig
from .seeding import derive_rng
from .stats import batch_means, mean_and_se, trapezoid_mean


class CorrelatedSamplesWarning(UserWarning):
    pass


@dataclass(frozen=True)
class MuSampler:
    """How draws from mu are produced.

    Chains start in a ball of radius `dispersion` around `seed_point`, run
    for `burn_in` fast-time units, then emit one state every `spacing`.
    chains=None runs one chain per requested sample, which makes the draws
    independent even for statistics of long windows.
    """

    burn_in: float = 100.0
    spacing: float = 5.0
    seed_point: tuple = (1.0, 1.0, 1.0)
    dispersion: float = 1e-3
    chains: int | None = None
    seed: int = 0
    lyapunov_time: float = 1.1

    def __post_init__(self):
        if not self.burn_in > 0 or not self.spacing > 0:
            raise ConfigError("burn_in and spacing must be positive")
        if self.chains is not None and self.chains < 1:
            raise ConfigError("chains must be >= 1")
        if self.dispersion < 0:
            raise ConfigError("dispersion must be nonnegative")


@dataclass
class MuSamples:
    states: np.ndarray
    correlated: bool = False

    def __len__(self):
        return self.states.shape[0]


@dataclass
class ErgodicAverage:
    value: np.ndarray
    T_used: float
    std_err: np.ndarray
    n_batches: int = 0

    def __post_init__(self):
        self.value = np.asarray(self.value, dtype=float)
        self.std_err = np.asarray(self.std_err, dtype=float)
        if not np.isfinite(self.value).all():
            raise InputError("ergodic average is not finite")
        if (self.std_err < 0).any():
            raise InputError("negative standard error")


def _seed_point(sampler, ell):
    p = np.asarray(sampler.seed_point, dtype=float)
    return p if p.shape == (ell,) else np.ones(ell)


def sample_mu(
    system: FlowSystem,
    sampler: MuSampler,
    count: int,
    cfg: IntegratorConfig = IntegratorConfig(),
    tag: str = "mu",
) -> MuSamples:
    """`count` approximate draws from mu, shape (count, ell).

    Sample j comes from chain j % chains, so the first `chains` samples are
    all post-burn-in states; later ones are spaced `spacing` apart in time.
    """
    if count < 1:
        raise ConfigError("count must be >= 1")
    k = count if sampler.chains is None else min(sampler.chains, count)
    rng = derive_rng(sampler.seed, tag, 0)
    start = _seed_point(sampler, system.ell)
    jitter = rng.standard_normal((k, system.ell))
    jitter *= sampler.dispersion / np.maximum(np.linalg.norm(jitter, axis=1, keepdims=True), 1e-300)
    y = start + jitter * rng.uniform(size=(k, 1)) ** (1.0 / system.ell)
    y = ode.advance(system, y, sampler.burn_in, cfg)
    per_chain = -(-count // k)
    out = [y]
    for _ in range(per_chain - 1):
        y = ode.advance(system, y, sampler.spacing, cfg)
        out.append(y)
    states = np.stack(out).reshape(-1, system.ell)[:count]
    correlated = per_chain > 1 and sampler.spacing < sampler.lyapunov_time
    if correlated:
        warnings.warn(
            f"spacing {sampler.spacing} is below one Lyapunov time; samples are correlated",
            CorrelatedSamplesWarning,
            stacklevel=2,
        )
    return MuSamples(states, correlated)


def _observable_series(system, observable, eta, T, cfg):
    """Observable sampled on the RK4 grid along trajectories from eta."""
    y = np.array(eta, dtype=float)
    n, h = cfg.steps_for(T)
    first = np.asarray(observable(y), dtype=float)
    nbytes = 8 * (n + 1) * first.size
    if nbytes > cfg.max_bytes:
        raise ConfigError("observable series exceeds max_bytes; shorten T or use chains")
    vals = np.empty((n + 1,) + first.shape)
    vals[0] = first
    radius2 = system.trap_radius ** 2
    g = system.g
    for k in range(1, n + 1):
        _, y = ode._fast_stages(g, y, h)
        if k % cfg.check_every == 0 or k == n:
            ode._check(y, radius2, k * h)
        vals[k] = observable(y)
    return vals, h


def ergodic_average(
    system: FlowSystem,
    observable,
    T: float,
    eta,
    cfg: IntegratorConfig = IntegratorConfig(),
    n_batches: int = 20,
    min_batch_time: float = 1.0,
) -> ErgodicAverage:
    """Time average (1/T) int_0^T observable(y(tau)) dtau by the trapezoid rule.

    A single start `eta` of shape (ell,) gives one trajectory of length T with
    a non-overlapping batch-means error (batches shrink to fit T, but fewer
    than 10 is an error).  A batch of K >= 10 starts of shape (K, ell) splits
    the total time T into K independent segments of length T/K, and the
    segment averages serve as the batches.
    """
    if not T > 0:
        raise ConfigError("T must be positive")
    eta = np.asarray(eta, dtype=float)
    if eta.ndim == 1:
        nb = min(n_batches, int(T // min_batch_time))
        if nb < 10:
            raise ConfigError(f"T={T} is shorter than 10 batches of {min_batch_time}")
        vals, h = _observable_series(system, observable, eta, T, cfg)
        value = trapezoid_mean(vals, h)
        _, se = batch_means(vals[1:], nb)
        return ErgodicAverage(value, T, se, nb)
    if eta.ndim != 2 or eta.shape[0] < 10:
        raise ConfigError("batched eta needs shape (K, ell) with K >= 10")
    k = eta.shape[0]
    seg = T / k
    if seg < min_batch_time:
        raise ConfigError(f"segments of {seg:.3g} are shorter than {min_batch_time}")
    vals, h = _observable_series(system, observable, eta, seg, cfg)
    seg_means = trapezoid_mean(vals, h)
    value, se = mean_and_se(seg_means)
    return ErgodicAverage(value, T, se, k)


@dataclass(frozen=True)
class FrozenSlow:
    """y -> f(x, y) for fixed slow points x of shape (..., d)."""

    f: object
    x: np.ndarray

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        x = np.asarray(self.x, dtype=float)
        lead = x.shape[:-1]
        yb = y.reshape(y.shape[:-1] + (1,) * len(lead) + y.shape[-1:])
        return self.f(x, yb)


def estimate_F(
    system: FlowSystem,
    x,
    T: float,
    eta,
    cfg: IntegratorConfig = IntegratorConfig(),
    **kwargs,
) -> ErgodicAverage:
    """Averaged drift F(x) = E f(x, .) as a time average with x frozen.

    `x` may be one point (d,) or several (P, d); the value has x's shape.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (system.d,):
        raise InputError(f"x must have last dimension {system.d}")
    return ergodic_average(system, FrozenSlow(system.f, x), T, eta, cfg, **kwargs)


def mc_average(observable, samples) -> tuple[np.ndarray, np.ndarray]:
    """Mean of observable over mu-draws with an i.i.d. standard error."""
    states = samples.states if isinstance(samples, MuSamples) else np.asarray(samples)
    return mean_and_se(observable(states))


def stationarity_check(
    system: FlowSystem,
    samples,
    observable,
    shift: float,
    cfg: IntegratorConfig = IntegratorConfig(),
    n_se: float = 3.0,
) -> dict:
    """Compare E obs over mu-draws before and after flowing them for `shift`."""
    states = samples.states if isinstance(samples, MuSamples) else np.asarray(samples)
    before = np.asarray(observable(states), dtype=float)
    after = np.asarray(observable(ode.advance(system, states, shift, cfg)), dtype=float)
    m0, s0 = mean_and_se(before)
    m1, s1 = mean_and_se(after)
    diff = m1 - m0
    combined = np.sqrt(s0**2 + s1**2)
    return {
        "mean_before": m0,
        "mean_after": m1,
        "diff": diff,
        "combined_se": combined,
        "passed": bool(np.all(np.abs(diff) <= n_se * combined)),
    }


def center_f0(
    system: FlowSystem,
    T: float,
    eta,
    cfg: IntegratorConfig = IntegratorConfig(),
) -> tuple[FlowSystem, ErgodicAverage]:
    """Replace f0 by f0 - m, m its ergodic mean over a calibration run."""
    avg = ergodic_average(system, system.f0, T, eta, cfg)
    mean = tuple(float(v) for v in np.ravel(avg.value))
    f0_sup = system.f0_sup + float(np.linalg.norm(mean))
    return system.with_f0(Centered(system.f0, mean), f0_sup), avg

