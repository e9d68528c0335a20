"""Fixed-step RK4 integration of the fast flow and of the full skew product.

The skew product is integrated in fast time tau = t / eps^2, where

    dx/dtau = eps f0(y) + eps^2 f(x, y),     dy/dtau = g(y),

has O(1) rates, and the stored grid is relabelled to slow time afterwards.
The y-update is shared verbatim with `integrate_fast`, so the y-output of a
skew run is bit-identical to a plain fast-flow run of the same length.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, ConfigError, InputError, IntegrationBlowup
from .flows import FlowSystem

FRAMES = ("slow", "fast")


@dataclass
class TrajectoryGrid:
    """States on the uniform grid t0 + k*dt, k = 0..n-1.

    `states` has shape (n, *batch, dim): axis 0 is time, the last axis the
    state component, anything in between indexes ensemble members.
    """

    t0: float
    dt: float
    states: np.ndarray
    time_frame: str = "slow"

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        if not self.dt > 0:
            raise InputError(f"grid step must be positive, got {self.dt}")
        if self.states.ndim < 2 or self.states.shape[0] == 0:
            raise InputError("trajectory needs shape (n_times, ..., dim) with n_times >= 1")
        if self.time_frame not in FRAMES:
            raise InputError(f"time_frame must be one of {FRAMES}")
        if not np.isfinite(self.states).all():
            raise InputError("trajectory contains non-finite entries")

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.states.shape[0])

    @property
    def dim(self) -> int:
        return self.states.shape[-1]

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * (self.states.shape[0] - 1)

    def __len__(self):
        return self.states.shape[0]

    def member(self, i) -> "TrajectoryGrid":
        """Single ensemble member (for batched grids)."""
        return TrajectoryGrid(self.t0, self.dt, self.states[:, i], self.time_frame)

    def at(self, t: float) -> np.ndarray:
        """States at the grid point nearest to t."""
        k = int(round((t - self.t0) / self.dt))
        if not 0 <= k < len(self) or abs(self.t0 + k * self.dt - t) > 1e-9 * max(1.0, abs(t)):
            raise InputError(f"time {t} is not on the grid")
        return self.states[k]


@dataclass(frozen=True)
class IntegratorConfig:
    h_tau: float = 0.005
    method: str = "rk4"
    record_stride: int = 1
    max_bytes: int = 1 << 30
    check_every: int = 1

    def __post_init__(self):
        if not self.h_tau > 0:
            raise ConfigError("h_tau must be positive")
        if self.method != "rk4":
            raise ConfigError(f"unknown integration method {self.method!r}")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ConfigError("record_stride must be an integer >= 1")
        if self.check_every < 1:
            raise ConfigError("check_every must be >= 1")

    def steps_for(self, duration: float) -> tuple[int, float]:
        """Number of steps and the effective step covering `duration` exactly."""
        n = max(1, math.ceil(duration / self.h_tau - 1e-9))
        return n, duration / n


def rk4_step(fieldfn, state, h, t=None):
    """One classical Runge-Kutta step of dstate/dt = fieldfn(state)."""
    if not h > 0:
        raise ConfigError("step must be positive")
    state = np.asarray(state, dtype=float)
    k1 = fieldfn(state)
    k2 = fieldfn(state + 0.5 * h * k1)
    k3 = fieldfn(state + 0.5 * h * k2)
    k4 = fieldfn(state + h * k3)
    for k in (k1, k2, k3, k4):
        if not np.isfinite(k).all():
            raise IntegrationBlowup("non-finite RK4 stage", t)
    return state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _fast_stages(g, y, h):
    k1 = g(y)
    y2 = y + 0.5 * h * k1
    k2 = g(y2)
    y3 = y + 0.5 * h * k2
    k3 = g(y3)
    y4 = y + h * k3
    k4 = g(y4)
    return (y, y2, y3, y4), y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check(y, radius2, t):
    r2 = np.einsum("...i,...i->...", y, y)
    worst = r2.max() if r2.ndim else r2
    if not worst <= radius2:
        if not np.isfinite(worst):
            raise IntegrationBlowup("non-finite state", t)
        raise IntegrationBlowup(f"state left the trapping ball (|y|={math.sqrt(worst):.4g})", t)


def _alloc(n_rec, batch_shape, dim, cfg, extra=0):
    nbytes = 8 * n_rec * int(np.prod(batch_shape, dtype=np.int64)) * (dim + extra)
    if nbytes > cfg.max_bytes:
        raise CapacityError(
            f"trajectory storage of {nbytes / 2**20:.1f} MiB exceeds max_bytes="
            f"{cfg.max_bytes / 2**20:.1f} MiB; raise record_stride"
        )
    return np.empty((n_rec,) + tuple(batch_shape) + (dim,))


def integrate_fast(system: FlowSystem, eta, T_tau: float, cfg: IntegratorConfig = IntegratorConfig()) -> TrajectoryGrid:
    """Integrate dy/dtau = g(y) from eta over [0, T_tau] (fast-time grid).

    `eta` may be a single state (ell,) or a batch (..., ell).
    """
    if not T_tau > 0:
        raise ConfigError("T_tau must be positive")
    y = np.array(eta, dtype=float)
    if y.shape[-1:] != (system.ell,):
        raise InputError(f"eta must have last dimension {system.ell}")
    n, h = cfg.steps_for(T_tau)
    stride = cfg.record_stride
    out = _alloc(n // stride + 1, y.shape[:-1], system.ell, cfg)
    radius2 = system.trap_radius ** 2
    _check(y, radius2, 0.0)
    out[0] = y
    g = system.g
    for k in range(1, n + 1):
        _, y = _fast_stages(g, y, h)
        if k % cfg.check_every == 0 or k == n:
            _check(y, radius2, k * h)
        if k % stride == 0:
            out[k // stride] = y
    return TrajectoryGrid(0.0, h * stride, out, "fast")


def integrate_skew(
    system: FlowSystem,
    xi,
    eta,
    T: float,
    cfg: IntegratorConfig = IntegratorConfig(),
    frame: str = "fast",
) -> tuple[TrajectoryGrid, TrajectoryGrid]:
    """Integrate the skew product on slow-time [0, T]; returns (x grid, y grid).

    frame="fast" (default) steps the rescaled system with step h_tau;
    frame="slow" steps the original equations with step eps^2 h_tau, which is
    only sensible as a cross-check at moderate eps.  Both grids are returned
    in slow time.  Batched eta of shape (M, ell) runs an ensemble; xi is
    broadcast to the batch.
    """
    xs, ys, _ = integrate_skew_with_integrals(system, xi, eta, T, {}, cfg, frame)
    return xs, ys


def integrate_skew_with_integrals(
    system: FlowSystem,
    xi,
    eta,
    T: float,
    integrands: dict,
    cfg: IntegratorConfig = IntegratorConfig(),
    frame: str = "fast",
):
    """`integrate_skew` plus running slow-time integrals int_0^t phi(x, y) ds.

    Each integrand phi(x, y) -> (..., k) is accumulated at full resolution with
    the RK4 stage weights and stage states of the main update, and recorded
    on the same grid as x.  Returns (x grid, y grid, {name: grid}).
    """
    if not T > 0:
        raise ConfigError("T must be positive")
    if frame not in FRAMES:
        raise ConfigError(f"frame must be one of {FRAMES}")
    eps = system.eps
    y = np.array(eta, dtype=float)
    if y.shape[-1:] != (system.ell,):
        raise InputError(f"eta must have last dimension {system.ell}")
    x = np.array(np.broadcast_to(np.asarray(xi, dtype=float), y.shape[:-1] + (system.d,)))
    n, h = cfg.steps_for(T / eps**2)
    stride = cfg.record_stride
    n_rec = n // stride + 1
    xs = _alloc(n_rec, y.shape[:-1], system.d, cfg, extra=system.ell)
    ys = np.empty((n_rec,) + y.shape)
    acc = {name: np.zeros_like(np.asarray(phi(x, y), dtype=float)) for name, phi in integrands.items()}
    rec = {name: np.zeros((n_rec,) + a.shape) for name, a in acc.items()}
    radius2 = system.trap_radius ** 2
    _check(y, radius2, 0.0)
    xs[0], ys[0] = x, y
    g, f0, f = system.g, system.f0, system.f
    check_f = math.isfinite(system.f_sup)

    if frame == "fast":
        a, b, hs, ds = eps, eps * eps, h, eps * eps
        gscale = None
    else:
        a, b, hs, ds = 1.0 / eps, 1.0, h * eps * eps, 1.0
        gscale = 1.0 / (eps * eps)
    wq = hs * ds / 6.0

    for k in range(1, n + 1):
        if gscale is None:
            (y1, y2, y3, y4), y_new = _fast_stages(g, y, hs)
        else:
            k1 = gscale * g(y)
            y2 = y + 0.5 * hs * k1
            k2 = gscale * g(y2)
            y3 = y + 0.5 * hs * k2
            k3 = gscale * g(y3)
            y4 = y + hs * k3
            k4 = gscale * g(y4)
            y1 = y
            y_new = y + (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        fv = f(x, y1)
        if check_f:
            system.check_f_bound(fv)
        l1 = a * f0(y1) + b * fv
        x2 = x + 0.5 * hs * l1
        l2 = a * f0(y2) + b * f(x2, y2)
        x3 = x + 0.5 * hs * l2
        l3 = a * f0(y3) + b * f(x3, y3)
        x4 = x + hs * l3
        l4 = a * f0(y4) + b * f(x4, y4)
        for name, phi in integrands.items():
            acc[name] = acc[name] + wq * (phi(x, y1) + 2.0 * phi(x2, y2) + 2.0 * phi(x3, y3) + phi(x4, y4))
        x = x + (hs / 6.0) * (l1 + 2.0 * l2 + 2.0 * l3 + l4)
        y = y_new
        if k % cfg.check_every == 0 or k == n:
            _check(y, radius2, k * h * eps * eps)
            if not np.isfinite(x).all():
                raise IntegrationBlowup("non-finite slow state", k * h * eps * eps)
        if k % stride == 0:
            xs[k // stride] = x
            ys[k // stride] = y
            for name in acc:
                rec[name][k // stride] = acc[name]
    dt = h * stride * eps * eps
    grids = {name: TrajectoryGrid(0.0, dt, r, "slow") for name, r in rec.items()}
    return TrajectoryGrid(0.0, dt, xs, "slow"), TrajectoryGrid(0.0, dt, ys, "slow"), grids


def fast_integral(
    system: FlowSystem,
    eta,
    T_tau: float,
    integrand,
    cfg: IntegratorConfig = IntegratorConfig(),
    record_every: int = 1,
) -> tuple[TrajectoryGrid, np.ndarray]:
    """Running int_0^tau integrand(y) dtau' along the fast flow, RK4 stage weights.

    Only the integral is stored (every `record_every` steps); returns the
    fast-time grid of integrals and the final state.
    """
    if not T_tau > 0:
        raise ConfigError("T_tau must be positive")
    y = np.array(eta, dtype=float)
    if y.shape[-1:] != (system.ell,):
        raise InputError(f"eta must have last dimension {system.ell}")
    n, h = cfg.steps_for(T_tau)
    acc = np.zeros_like(np.asarray(integrand(y), dtype=float))
    out = _alloc(n // record_every + 1, acc.shape[:-1], acc.shape[-1], cfg)
    out[0] = acc
    radius2 = system.trap_radius ** 2
    _check(y, radius2, 0.0)
    g = system.g
    w = h / 6.0
    for k in range(1, n + 1):
        (y1, y2, y3, y4), y = _fast_stages(g, y, h)
        acc = acc + w * (integrand(y1) + 2.0 * integrand(y2) + 2.0 * integrand(y3) + integrand(y4))
        if k % cfg.check_every == 0 or k == n:
            _check(y, radius2, k * h)
        if k % record_every == 0:
            out[k // record_every] = acc
    if not np.isfinite(acc).all():
        raise IntegrationBlowup("non-finite integral", T_tau)
    return TrajectoryGrid(0.0, h * record_every, out, "fast"), y


def fast_to_slow(grid: TrajectoryGrid, eps: float) -> TrajectoryGrid:
    """Relabel a fast-time grid to slow time t = eps^2 tau."""
    if grid.time_frame != "fast":
        raise InputError("grid is not in fast time")
    return TrajectoryGrid(grid.t0 * eps**2, grid.dt * eps**2, grid.states, "slow")


def empirical_order(errors, steps) -> float:
    """Least-squares slope of log(error) against log(step)."""
    errors = np.asarray(errors, dtype=float)
    steps = np.asarray(steps, dtype=float)
    slope, _ = np.polyfit(np.log(steps), np.log(errors), 1)
    return float(slope)


def advance(system: FlowSystem, eta, T_tau: float, cfg: IntegratorConfig = IntegratorConfig()) -> np.ndarray:
    """Final state of the fast flow after T_tau, without storing the path."""
    y = np.array(eta, dtype=float)
    if T_tau == 0:
        return y
    n, h = cfg.steps_for(T_tau)
    radius2 = system.trap_radius ** 2
    g = system.g
    for k in range(1, n + 1):
        _, y = _fast_stages(g, y, h)
        if k % cfg.check_every == 0 or k == n:
            _check(y, radius2, k * h)
    return y
