"""The limiting additive-noise SDE and the pathwise solution map G.

X(t) = xi + int_0^t F(X(s)) ds + S W(t),  S S^T = Sigma,

is simulated by Euler-Maruyama.  G(u) = v solves v(t) = xi + u(t) +
int_0^t F(v(s)) ds for a given continuous driving path u; G is what turns
convergence of the driving noise into convergence of the slow variable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import ConvergenceError, InputError, IntegrationBlowup
from .ode import TrajectoryGrid
from .seeding import derive_rng


def matrix_sqrt_psd(sigma, sym_tol: float = 1e-10, neg_tol: float = 1e-10) -> np.ndarray:
    """Symmetric PSD square root by spectral decomposition."""
    s = np.atleast_2d(np.asarray(sigma, dtype=float))
    if s.shape[0] != s.shape[1]:
        raise InputError("Sigma must be square")
    scale = max(1.0, float(np.abs(s).max()))
    if np.abs(s - s.T).max() > sym_tol * scale:
        raise InputError("Sigma is not symmetric")
    w, v = np.linalg.eigh(0.5 * (s + s.T))
    if w.min(initial=0.0) < -neg_tol * scale:
        raise InputError(f"Sigma has a negative eigenvalue {w.min():.3g}")
    root = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T
    return 0.5 * (root + root.T)


@dataclass(frozen=True)
class SdeSpec:
    drift: object
    noise_root: np.ndarray
    xi: np.ndarray

    @classmethod
    def from_sigma(cls, drift, sigma, xi) -> "SdeSpec":
        return cls(drift, matrix_sqrt_psd(sigma), np.atleast_1d(np.asarray(xi, dtype=float)))

    @property
    def d(self) -> int:
        return self.xi.shape[-1]


@dataclass
class NoisePath:
    """Standard Brownian increments, shape (n_steps, *batch, d), each N(0, h I)."""

    increments: np.ndarray
    h: float
    seed: int | None = None

    @classmethod
    def generate(cls, n_steps: int, h: float, d: int, batch: tuple = (), seed: int = 0, tag: str = "noise", index: int = 0):
        rng = derive_rng(seed, tag, index)
        inc = rng.standard_normal((n_steps,) + tuple(batch) + (d,)) * math.sqrt(h)
        return cls(inc, h, seed)

    @property
    def n_steps(self) -> int:
        return self.increments.shape[0]

    def brownian(self) -> np.ndarray:
        """The path W on the grid, starting at 0."""
        w = np.zeros((self.n_steps + 1,) + self.increments.shape[1:])
        np.cumsum(self.increments, axis=0, out=w[1:])
        return w


def euler_maruyama(spec: SdeSpec, T: float, h: float, noise: NoisePath) -> TrajectoryGrid:
    """X_{k+1} = X_k + h F(X_k) + S dW_k on [0, T]."""
    n = int(round(T / h))
    if not h > 0 or abs(n * h - T) > 1e-9 * T:
        raise InputError("T must be a whole number of steps h")
    if noise.n_steps != n or abs(noise.h - h) > 1e-15 * h:
        raise InputError("noise grid does not match (T, h)")
    S = np.asarray(spec.noise_root, dtype=float)
    batch = noise.increments.shape[1:-1]
    x = np.array(np.broadcast_to(spec.xi, batch + (spec.d,)))
    out = np.empty((n + 1,) + x.shape)
    out[0] = x
    for k in range(n):
        drift = spec.drift(x)
        x = x + h * drift + noise.increments[k] @ S.T
        if not np.isfinite(x).all():
            raise IntegrationBlowup("SDE path is not finite", (k + 1) * h)
        out[k + 1] = x
    return TrajectoryGrid(0.0, h, out, "slow")


def apply_G(u, xi, F, h: float, tol: float = 1e-13, max_iter: int = 50) -> np.ndarray:
    """Solve v(t) = xi + u(t) + int_0^t F(v) ds on the grid of u.

    `u` has shape (n, *batch, d) with spacing h.  Each step takes the explicit
    predictor and then fixed-point corrections of the trapezoid rule until
    the update is below `tol` (relative); more than `max_iter` corrections
    means F is not Lipschitz at this step size.
    """
    u = np.asarray(u, dtype=float)
    xi = np.asarray(xi, dtype=float)
    v = np.empty_like(u)
    v[0] = xi + u[0]
    integral = np.zeros(u.shape[1:])
    F_prev = F(v[0])
    for k in range(1, u.shape[0]):
        base = xi + u[k] + integral
        cand = base + h * F_prev
        for it in range(max_iter):
            F_new = F(cand)
            nxt = base + 0.5 * h * (F_prev + F_new)
            delta = np.abs(nxt - cand).max()
            cand = nxt
            if delta <= tol * (1.0 + np.abs(nxt).max()):
                break
        else:
            raise ConvergenceError(f"fixed-point correction did not converge at step {k}")
        F_new = F(cand)
        integral = integral + 0.5 * h * (F_prev + F_new)
        v[k] = cand
        F_prev = F_new
    return v


def gronwall_bound(delta: float, lip: float, T: float) -> float:
    """sup |G(u) - G(u')| <= sup |u - u'| e^{L T}."""
    return delta * math.exp(lip * T)


class GridDrift:
    """F from values tabulated on a rectilinear grid, multilinear in between.

    Points outside the grid are clamped to its boundary.
    """

    def __init__(self, axes, values):
        self.axes = [np.asarray(a, dtype=float) for a in axes]
        values = np.asarray(values, dtype=float)
        self._lo = np.array([a[0] for a in self.axes])
        self._hi = np.array([a[-1] for a in self.axes])
        self._interp = RegularGridInterpolator(self.axes, values, method="linear")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        flat = np.clip(x.reshape(-1, x.shape[-1]), self._lo, self._hi)
        return self._interp(flat).reshape(x.shape[:-1] + (-1,))

    @staticmethod
    def axes_for(x_min, x_max, points: int = 41, pad: float = 0.2):
        """Per-coordinate grids over the observed range padded by `pad` on each side."""
        x_min = np.atleast_1d(np.asarray(x_min, dtype=float))
        x_max = np.atleast_1d(np.asarray(x_max, dtype=float))
        span = np.maximum(x_max - x_min, 1e-12)
        return [np.linspace(lo - pad * s, hi + pad * s, points) for lo, hi, s in zip(x_min, x_max, span)]
