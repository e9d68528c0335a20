import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from skewlab.errors import ConvergenceError, InputError
from skewlab.sde import (
    GridDrift,
    NoisePath,
    SdeSpec,
    apply_G,
    euler_maruyama,
    gronwall_bound,
    matrix_sqrt_psd,
)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (3, 3), elements=st.floats(-10, 10)))
def test_matrix_sqrt_reconstructs(a):
    sigma = a @ a.T
    s = matrix_sqrt_psd(sigma)
    assert np.array_equal(s, s.T)
    assert np.abs(s @ s - sigma).max() <= 1e-10 * max(1.0, np.abs(sigma).max())


def test_matrix_sqrt_diagonal_and_errors():
    np.testing.assert_allclose(matrix_sqrt_psd(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))
    np.testing.assert_array_equal(matrix_sqrt_psd(np.zeros((2, 2))), np.zeros((2, 2)))
    with pytest.raises(InputError):
        matrix_sqrt_psd(np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(InputError):
        matrix_sqrt_psd(np.diag([1.0, -1.0]))


def test_noise_path_is_seeded():
    a = NoisePath.generate(100, 0.01, 2, (5,), seed=3)
    b = NoisePath.generate(100, 0.01, 2, (5,), seed=3)
    np.testing.assert_array_equal(a.increments, b.increments)
    w = a.brownian()
    assert w.shape == (101, 5, 2) and np.all(w[0] == 0)


def test_zero_noise_is_euler():
    spec = SdeSpec.from_sigma(lambda x: -x, [[0.0]], [1.0])
    noise = NoisePath(np.zeros((100, 1)), 0.01)
    path = euler_maruyama(spec, 1.0, 0.01, noise)
    assert path.states[-1, 0] == pytest.approx(0.99**100, rel=1e-12)


def test_ou_variance():
    s, t, h, M = 1.5, 1.0, 1e-3, 20000
    spec = SdeSpec.from_sigma(lambda x: -x, [[s * s]], [0.0])
    noise = NoisePath.generate(int(t / h), h, 1, (M,), seed=11)
    x = euler_maruyama(spec, t, h, noise).states[-1, :, 0]
    exact = s * s * (1 - math.exp(-2 * t)) / 2
    # MC standard error of a sample variance of Gaussians: var * sqrt(2/(M-1))
    assert abs(x.var(ddof=1) - exact) <= 3 * exact * math.sqrt(2 / (M - 1)) + 2 * h


def test_grid_mismatch_raises():
    spec = SdeSpec.from_sigma(lambda x: -x, [[1.0]], [0.0])
    with pytest.raises(InputError):
        euler_maruyama(spec, 1.0, 0.01, NoisePath(np.zeros((50, 1)), 0.01))


def test_apply_G_closed_forms():
    t = np.linspace(0, 1, 1001)[:, None]
    u = np.sin(t)
    np.testing.assert_allclose(apply_G(u, [0.5], lambda x: 0 * x, 1e-3), 0.5 + u)
    v = apply_G(np.zeros_like(t), [1.0], lambda x: -x, 1e-3)
    np.testing.assert_allclose(v[:, 0], np.exp(-t[:, 0]), atol=1e-6)


def test_apply_G_is_lipschitz_by_gronwall(rng):
    h = 1e-3
    u1 = np.cumsum(rng.normal(size=(1001, 1)) * math.sqrt(h), axis=0)
    u2 = u1 + 0.01 * np.sin(np.arange(1001))[:, None]
    F = lambda x: -2.0 * np.tanh(x)  # noqa: E731
    gap = np.abs(apply_G(u1, [0.0], F, h) - apply_G(u2, [0.0], F, h)).max()
    assert gap <= gronwall_bound(np.abs(u1 - u2).max(), 2.0, 1.0)


def test_apply_G_nonconvergence():
    with pytest.raises(ConvergenceError):
        apply_G(np.zeros((3, 1)), [1.0], lambda x: 1e6 * x, 1.0, max_iter=5)


def test_grid_drift_interpolates_and_clamps():
    axes = GridDrift.axes_for([-1.0], [1.0], points=201, pad=0.0)
    F = GridDrift(axes, -np.tanh(axes[0])[:, None])
    np.testing.assert_allclose(F(np.array([[0.3]])), -np.tanh([[0.3]]), atol=1e-4)
    np.testing.assert_allclose(F(np.array([[5.0]])), -np.tanh([[1.0]]), atol=1e-12)
