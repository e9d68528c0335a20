"""Vector fields for the slow-fast skew product and the container that binds them.

The skew product is

    dx/dt = eps^-1 f0(y) + f(x, y),     dy/dt = eps^-2 g(y),

with x in R^d (slow) and y in R^ell (fast).  Every field here is vectorised:
inputs carry the component on the last axis and may have arbitrary leading
batch dimensions, so a whole ensemble is evaluated in one call.

All field objects are small picklable callables so systems can be shipped to
worker processes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import ConfigError, InputError

Field = Callable[..., np.ndarray]


def _last_dim(arr, n, name):
    arr = np.asarray(arr, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] != n:
        raise InputError(f"{name}: expected last dimension {n}, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class LorenzParams:
    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0
    trap_radius: float = 100.0

    def __post_init__(self):
        for name in ("sigma", "rho", "beta", "trap_radius"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"LorenzParams.{name} must be positive")

    def equilibria(self) -> np.ndarray:
        """Origin and the pair C+/C- as rows of a (3, 3) array."""
        q = math.sqrt(self.beta * (self.rho - 1.0)) if self.rho > 1 else 0.0
        z = self.rho - 1.0
        return np.array([[0.0, 0.0, 0.0], [q, q, z], [-q, -q, z]])


def lorenz_g(p: LorenzParams, y) -> np.ndarray:
    y = _last_dim(y, 3, "lorenz_g")
    y1, y2, y3 = y[..., 0], y[..., 1], y[..., 2]
    out = np.empty_like(y)
    out[..., 0] = p.sigma * (y2 - y1)
    out[..., 1] = y1 * (p.rho - y3) - y2
    out[..., 2] = y1 * y2 - p.beta * y3
    return out


@dataclass(frozen=True)
class LorenzField:
    params: LorenzParams = LorenzParams()

    def __call__(self, y):
        return lorenz_g(self.params, y)


@dataclass(frozen=True)
class LinearDecay:
    """g(y) = -rate * y.  Closed-form test flow."""

    rate: float = 1.0

    def __call__(self, y):
        return -self.rate * np.asarray(y, dtype=float)


def default_f0(y, d: int = 1) -> np.ndarray:
    """Mean-zero Lorenz observable: (y2) for d=1, (y1, y2) for d=2.

    Both vanish in mean under the Lorenz invariant measure because the flow
    commutes with (y1, y2, y3) -> (-y1, -y2, y3).
    """
    y = _last_dim(y, 3, "default_f0")
    if d == 1:
        return y[..., 1:2].copy()
    if d == 2:
        return y[..., 0:2].copy()
    raise ConfigError(f"default_f0 supports d in {{1, 2}}, got d={d}")


@dataclass(frozen=True)
class LorenzProjection:
    d: int = 1

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ConfigError(f"default_f0 supports d in {{1, 2}}, got d={self.d}")

    def __call__(self, y):
        return default_f0(y, self.d)


@dataclass(frozen=True)
class CoordinateProjection:
    """Picks coordinates `index` of y; used for custom linear observables."""

    index: tuple = (0,)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        return y[..., list(self.index)]


@dataclass(frozen=True)
class Centered:
    """Runtime-centred observable f0(y) - mean."""

    base: Field
    mean: tuple

    def __call__(self, y):
        return self.base(y) - np.asarray(self.mean, dtype=float)


@dataclass(frozen=True)
class ZeroFast:
    """f0 == 0 with output dimension d."""

    d: int = 1

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        return np.zeros(y.shape[:-1] + (self.d,))


@dataclass(frozen=True)
class ZeroCoupling:
    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.zeros(np.broadcast_shapes(x.shape, y.shape[:-1] + x.shape[-1:]))


def benchmark_f(x, y, c: float = 1.0, kappa: float = 1.0) -> np.ndarray:
    """-c tanh(x_i) + kappa sin(y1/10), componentwise in x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if c < 0 or kappa < 0:
        raise ConfigError("benchmark_f requires c, kappa >= 0")
    return -c * np.tanh(x) + kappa * np.sin(y[..., 0:1] / 10.0)


@dataclass(frozen=True)
class BenchmarkCoupling:
    c: float = 1.0
    kappa: float = 1.0

    def __post_init__(self):
        if self.c < 0 or self.kappa < 0:
            raise ConfigError("benchmark_f requires c, kappa >= 0")

    def __call__(self, x, y):
        return benchmark_f(x, y, self.c, self.kappa)

    def y_observable(self, y):
        """The y-dependent part sin(y1/10), whose mu-mean fixes F."""
        return np.sin(np.asarray(y, dtype=float)[..., 0:1] / 10.0)

    def averaged(self, mean_sin: float) -> "BenchmarkDrift":
        return BenchmarkDrift(self.c, self.kappa * float(mean_sin))

    def sup_norm(self, d: int) -> float:
        return math.sqrt(d) * (self.c + self.kappa)

    def lipschitz(self) -> float:
        return max(self.c, self.kappa / 10.0)


@dataclass(frozen=True)
class BenchmarkDrift:
    """Analytic average F(x) = -c tanh(x) + offset."""

    c: float
    offset: float

    def __call__(self, x):
        return -self.c * np.tanh(np.asarray(x, dtype=float)) + self.offset


@dataclass(frozen=True)
class SlowOnly:
    """f(x, y) = h(x), constant in y.  Its average is h itself."""

    h: Field

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.broadcast_to(self.h(x), np.broadcast_shapes(x.shape, y.shape[:-1] + x.shape[-1:])).copy()


@dataclass(frozen=True)
class TanhDecay:
    c: float = 1.0

    def __call__(self, x):
        return -self.c * np.tanh(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class ZeroDrift:
    """F == 0, the average of the zero coupling."""

    def __call__(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class FlowSystem:
    """Fields and metadata of one skew-product system.

    `f_sup`, `f0_sup` and `lip_f` are Euclidean-norm bounds used by the proof
    diagnostics; `trap_radius` bounds |y| and stands in for compactness of the
    fast attractor.
    """

    d: int
    ell: int
    g: Field
    f0: Field
    f: Field
    eps: float = 1.0
    f_sup: float = math.inf
    f0_sup: float = math.inf
    lip_f: float = math.inf
    trap_radius: float = math.inf
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ConfigError(f"d must be a positive integer, got {self.d}")
        if int(self.ell) != self.ell or self.ell < 1:
            raise ConfigError(f"ell must be a positive integer, got {self.ell}")
        if not 0.0 < self.eps <= 1.0:
            raise ConfigError(f"eps must lie in (0, 1], got {self.eps}")
        if self.f_sup < 0 or self.f0_sup < 0 or self.lip_f < 0 or not self.trap_radius > 0:
            raise ConfigError("bounds must be nonnegative and trap_radius positive")

    def with_eps(self, eps: float) -> "FlowSystem":
        return replace(self, eps=float(eps))

    def with_f0(self, f0: Field, f0_sup: float | None = None) -> "FlowSystem":
        return replace(self, f0=f0, f0_sup=self.f0_sup if f0_sup is None else f0_sup)

    def check_f_bound(self, values, tol: float = 1e-12) -> None:
        """Raise if any sampled |f(x, y)| exceeds f_sup."""
        if not math.isfinite(self.f_sup):
            return
        norms = np.linalg.norm(np.asarray(values), axis=-1)
        worst = float(norms.max(initial=0.0))
        if worst > self.f_sup * (1 + tol) + tol:
            raise InputError(f"|f| = {worst:.6g} exceeds declared bound f_sup = {self.f_sup:.6g}")


def lorenz_system(
    d: int = 1,
    eps: float = 1.0,
    c: float = 1.0,
    kappa: float = 1.0,
    params: LorenzParams | None = None,
) -> FlowSystem:
    """Default benchmark: Lorenz fast flow, projection f0, tanh/sin coupling."""
    params = params or LorenzParams()
    coupling = BenchmarkCoupling(c, kappa)
    return FlowSystem(
        d=d,
        ell=3,
        g=LorenzField(params),
        f0=LorenzProjection(d),
        f=coupling,
        eps=eps,
        f_sup=coupling.sup_norm(d),
        f0_sup=params.trap_radius,
        lip_f=coupling.lipschitz(),
        trap_radius=params.trap_radius,
        name="lorenz-benchmark",
    )
