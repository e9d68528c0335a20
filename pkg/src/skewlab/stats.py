"""Quadrature and small statistical estimators used across the pipelines."""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate, stats

from .errors import InputError


def cumtrapz(values, h: float, corrected: bool = False) -> np.ndarray:
    """Running integral along axis 0 of samples spaced `h` apart, starting at 0.

    With `corrected=True` the trapezoid sums get the Gregory end correction
    -h^2/12 (phi'(t) - phi'(0)), derivatives from second-order finite
    differences, which lifts the rule to fourth order on smooth integrands.
    """
    v = np.asarray(values, dtype=float)
    if v.shape[0] < 2:
        return np.zeros_like(v)
    out = integrate.cumulative_trapezoid(v, dx=h, axis=0, initial=0.0)
    if corrected and v.shape[0] >= 3:
        dv = np.gradient(v, h, axis=0, edge_order=2)
        out -= (h * h / 12.0) * (dv - dv[0])
    return out


def trapezoid_mean(values, h: float) -> np.ndarray:
    """Time average (1/T) int_0^T of uniformly sampled values (axis 0)."""
    v = np.asarray(values, dtype=float)
    if v.shape[0] < 2:
        raise InputError("need at least two samples for a time average")
    T = h * (v.shape[0] - 1)
    return 0.5 * h * (v[0] + v[-1] + 2.0 * v[1:-1].sum(axis=0)) / T


def batch_means(series, n_batches: int = 20) -> tuple[np.ndarray, np.ndarray]:
    """Mean and non-overlapping batch-means standard error along axis 0.

    Trailing samples that do not fill a batch are dropped from the error
    estimate only.
    """
    x = np.asarray(series, dtype=float)
    if n_batches < 2:
        raise InputError("batch means needs at least two batches")
    b = x.shape[0] // n_batches
    if b < 1:
        raise InputError(f"{x.shape[0]} samples cannot fill {n_batches} batches")
    blocks = x[: b * n_batches].reshape((n_batches, b) + x.shape[1:]).mean(axis=1)
    se = blocks.std(axis=0, ddof=1) / math.sqrt(n_batches)
    return x.mean(axis=0), se


def mean_and_se(samples) -> tuple[np.ndarray, np.ndarray]:
    """Sample mean and its standard error for i.i.d. rows."""
    x = np.asarray(samples, dtype=float)
    n = x.shape[0]
    if n < 2:
        raise InputError("need at least two samples")
    return x.mean(axis=0), x.std(axis=0, ddof=1) / math.sqrt(n)


def covariance(samples) -> np.ndarray:
    """Unbiased sample covariance of rows, exactly symmetric."""
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    xc = x - x.mean(axis=0)
    c = xc.T @ xc / (x.shape[0] - 1)
    return 0.5 * (c + c.T)


def jackknife_covariance_se(samples) -> np.ndarray:
    """Delete-one jackknife standard error of each covariance entry."""
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    s1 = x.sum(axis=0)
    s2 = x.T @ x
    # leave-one-out sums, vectorised over the deleted row
    m = (s1[None, :] - x) / (n - 1)
    s2_loo = s2[None] - x[:, :, None] * x[:, None, :]
    c_loo = (s2_loo - (n - 1) * m[:, :, None] * m[:, None, :]) / (n - 2)
    c_bar = c_loo.mean(axis=0)
    return np.sqrt((n - 1) / n * ((c_loo - c_bar) ** 2).sum(axis=0))


def correlation_with_se(a, b) -> tuple[float, float]:
    """Pearson correlation and its large-sample standard error (1 - r^2)/sqrt(n)."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    r = float(np.corrcoef(a, b)[0, 1])
    return r, (1.0 - r * r) / math.sqrt(a.size)


def binomial_se(p, n) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return np.sqrt(p * (1.0 - p) / np.asarray(n, dtype=float))


def ks_2samp_statistic(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic (scipy; the p-value is not needed)."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise InputError("KS needs nonempty samples")
    # the discarded p-value can divide by zero for one-point samples
    with np.errstate(divide="ignore", invalid="ignore"):
        return float(stats.ks_2samp(a, b, method="asymp").statistic)


def energy_distance(a, b) -> float:
    """V-statistic energy distance 2E|A-B| - E|A-A'| - E|B-B'| (>= 0).

    Rows are points in R^k; 1-D inputs are treated as scalars.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a = a[:, None] if a.ndim == 1 else a
    b = b[:, None] if b.ndim == 1 else b
    if a.shape[1] != b.shape[1]:
        raise InputError("energy distance needs samples of equal dimension")

    def mean_dist(p, q):
        total = 0.0
        for start in range(0, p.shape[0], 512):
            block = p[start : start + 512]
            total += np.sqrt(((block[:, None, :] - q[None, :, :]) ** 2).sum(-1)).sum()
        return total / (p.shape[0] * q.shape[0])

    val = 2.0 * mean_dist(a, b) - mean_dist(a, a) - mean_dist(b, b)
    return max(float(val), 0.0)


def ks_noise_floor(m: int, n: int | None = None, c_alpha: float = 1.36) -> float:
    """c(alpha) sqrt((m+n)/(m n)); defaults to the 5% level."""
    n = m if n is None else n
    return c_alpha * math.sqrt((m + n) / (m * n))
