"""Soft-mode and correlation-length laboratory for local patch-score diffusion samplers."""

from .errors import (
    AliasingError,
    ConfigError,
    DegenerateFieldError,
    DimensionError,
    DivergenceError,
    EstimationError,
    NoTransitionError,
    ParameterError,
    SingularNoiseError,
    SizeError,
    SoftmodeError,
    UndefinedTestError,
)
from .lattice import LatticeGrid, fourier_probe, radial_autocorrelation
from .schedule import LogTimeGrid, VPSchedule, log_grid, make_schedule
from .scores import (
    EmpiricalPrototypeScore,
    GuidedScore,
    LocalTanhScore,
    PatchDictionary,
    PatchPosteriorScore,
    PrototypeSet,
    make_drift,
    make_patch_dictionary,
    uniform_dictionary,
)

__version__ = "0.1.0"

__all__ = [
    "AliasingError",
    "ConfigError",
    "DegenerateFieldError",
    "DimensionError",
    "DivergenceError",
    "EmpiricalPrototypeScore",
    "EstimationError",
    "GuidedScore",
    "LatticeGrid",
    "LocalTanhScore",
    "LogTimeGrid",
    "NoTransitionError",
    "ParameterError",
    "PatchDictionary",
    "PatchPosteriorScore",
    "PrototypeSet",
    "SingularNoiseError",
    "SizeError",
    "SoftmodeError",
    "UndefinedTestError",
    "VPSchedule",
    "fourier_probe",
    "log_grid",
    "make_drift",
    "make_patch_dictionary",
    "make_schedule",
    "radial_autocorrelation",
    "uniform_dictionary",
    "__version__",
]
