import numpy as np
import pytest

from skewlab.flows import (
    FlowSystem,
    LinearDecay,
    LorenzField,
    LorenzProjection,
    SlowOnly,
    TanhDecay,
    ZeroCoupling,
    ZeroFast,
    lorenz_system,
)


@pytest.fixture
def bench():
    return lorenz_system(d=1, eps=0.25)


@pytest.fixture
def decay_system():
    """Linear fast decay y' = -y with f0 = y[1]; everything closed form."""
    return FlowSystem(1, 3, LinearDecay(1.0), LorenzProjection(1), ZeroCoupling(), eps=1.0,
                      f_sup=0.0, f0_sup=10.0, lip_f=0.0, trap_radius=10.0)


@pytest.fixture
def zero_system():
    return FlowSystem(1, 3, LorenzField(), ZeroFast(1), ZeroCoupling(), eps=0.5,
                      f_sup=0.0, f0_sup=0.0, lip_f=0.0, trap_radius=100.0)


@pytest.fixture
def slow_only_system():
    return FlowSystem(1, 3, LorenzField(), ZeroFast(1), SlowOnly(TanhDecay(1.0)), eps=0.5,
                      f_sup=1.0, f0_sup=0.0, lip_f=1.0, trap_radius=100.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
