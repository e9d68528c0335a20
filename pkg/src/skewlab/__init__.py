"""Numerical laboratory for diffusion limits of fast-slow skew products."""
from .errors import (
    CapacityError,
    ConfigError,
    ConvergenceError,
    InputError,
    IntegrationBlowup,
    JobFailure,
    SkewLabError,
)
from .flows import FlowSystem, LorenzParams, lorenz_system
from .ode import IntegratorConfig, TrajectoryGrid, integrate_fast, integrate_skew

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "ConfigError",
    "ConvergenceError",
    "FlowSystem",
    "InputError",
    "IntegrationBlowup",
    "IntegratorConfig",
    "JobFailure",
    "LorenzParams",
    "SkewLabError",
    "TrajectoryGrid",
    "__version__",
    "integrate_fast",
    "integrate_skew",
    "lorenz_system",
]
