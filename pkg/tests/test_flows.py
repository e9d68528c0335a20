import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skewlab.errors import ConfigError, InputError
from skewlab.flows import (
    BenchmarkCoupling,
    FlowSystem,
    LorenzParams,
    ZeroDrift,
    benchmark_f,
    default_f0,
    lorenz_g,
    lorenz_system,
)


def test_lorenz_equilibria_are_fixed_points():
    p = LorenzParams()
    eq = p.equilibria()
    assert eq.shape == (3, 3)
    assert np.abs(lorenz_g(p, eq)).max() <= 1e-12


def test_lorenz_g_by_hand():
    p = LorenzParams()
    y = np.array([1.0, 2.0, 3.0])
    expected = [10 * (2 - 1), 1 * (28 - 3) - 2, 1 * 2 - 8 / 3 * 3]
    np.testing.assert_allclose(lorenz_g(p, y), expected, rtol=0, atol=1e-14)


def test_lorenz_g_batched_matches_loop(rng):
    p = LorenzParams()
    y = rng.normal(size=(7, 4, 3))
    out = lorenz_g(p, y)
    for idx in np.ndindex(7, 4):
        np.testing.assert_array_equal(out[idx], lorenz_g(p, y[idx]))


def test_lorenz_params_validated():
    with pytest.raises(ConfigError):
        LorenzParams(sigma=-1.0)


def test_default_f0_projections():
    y = np.array([1.0, 2.0, 3.0])
    np.testing.assert_array_equal(default_f0(y, 1), [2.0])
    np.testing.assert_array_equal(default_f0(y, 2), [1.0, 2.0])
    with pytest.raises(ConfigError):
        default_f0(y, 3)


def test_benchmark_f_values():
    x = np.array([0.5])
    y = np.array([np.pi * 5, 0.0, 0.0])
    np.testing.assert_allclose(benchmark_f(x, y), -np.tanh(0.5) + 1.0, atol=1e-15)
    with pytest.raises(ConfigError):
        benchmark_f(x, y, c=-1.0)


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(-50, 50), min_size=2, max_size=2),
    st.lists(st.floats(-100, 100), min_size=3, max_size=3),
    st.floats(0, 3),
    st.floats(0, 3),
)
def test_benchmark_sup_norm_is_a_bound(x, y, c, kappa):
    f = BenchmarkCoupling(c, kappa)
    val = f(np.array(x), np.array(y))
    assert np.linalg.norm(val) <= f.sup_norm(2) + 1e-12


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-100, 100))
def test_benchmark_lipschitz_in_x(x1, x2, y1):
    f = BenchmarkCoupling(1.0, 1.0)
    y = np.array([y1, 0.0, 0.0])
    gap = abs(f(np.array([x1]), y) - f(np.array([x2]), y))[0]
    assert gap <= f.lipschitz() * abs(x1 - x2) + 1e-12


def test_averaged_drift():
    F = BenchmarkCoupling(2.0, 3.0).averaged(0.1)
    np.testing.assert_allclose(F(np.array([1.0])), -2 * np.tanh(1.0) + 0.3)


def test_zero_drift_shape():
    assert ZeroDrift()(np.ones((4, 2))).shape == (4, 2)


def test_system_validation():
    sys_ = lorenz_system()
    with pytest.raises(ConfigError):
        sys_.with_eps(0.0)
    with pytest.raises(ConfigError):
        FlowSystem(0, 3, sys_.g, sys_.f0, sys_.f)
    with pytest.raises(InputError):
        sys_.check_f_bound(np.array([[5.0]]))
    sys_.check_f_bound(np.array([[1.5]]))


def test_with_eps_keeps_fields():
    s = lorenz_system(eps=0.5).with_eps(0.125)
    assert s.eps == 0.125 and s.f_sup == 2.0 and s.lip_f == 1.0
