"""Variance-preserving noise schedule and the logarithmic reverse-time grid."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class VPSchedule:
    """VP schedule with ``alpha(t)^2 = exp(-B(t))`` and ``sigma^2(t) = 1 - alpha(t)^2``.

    ``B(t)`` is the integrated noise rate. With a constant rate ``beta`` it is
    ``beta * t``; a time-dependent schedule supplies ``integral`` and ``rate``.
    """

    beta: float = 1.0
    integral: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)
    rate: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    @property
    def is_constant(self) -> bool:
        return self.integral is None

    def cumulative(self, t):
        if self.integral is None:
            return self.beta * np.asarray(t, dtype=float)
        return self.integral(np.asarray(t, dtype=float))

    def beta_at(self, t):
        if self.rate is None:
            if self.integral is not None:
                raise ParameterError("time-dependent schedule needs a rate function")
            return self.beta + 0.0 * np.asarray(t, dtype=float)
        return self.rate(np.asarray(t, dtype=float))

    def alpha2(self, t):
        return np.exp(-self.cumulative(t))

    def alpha(self, t):
        return np.exp(-0.5 * self.cumulative(t))

    def sigma2(self, t):
        # expm1 keeps sigma^2 accurate at t -> 0
        return -np.expm1(-self.cumulative(t))

    def sigma(self, t):
        return np.sqrt(self.sigma2(t))


def make_schedule(beta: float = 1.0) -> VPSchedule:
    if not beta > 0:
        raise ParameterError(f"beta must be positive, got {beta!r}")
    return VPSchedule(float(beta))


def schedule_from_integral(integral, rate) -> VPSchedule:
    """Schedule for a time-dependent rate given its cumulative integral."""
    return VPSchedule(1.0, integral=integral, rate=rate)


@dataclass(frozen=True)
class LogTimeGrid:
    t_max: float
    t_min: float
    steps: int
    times: np.ndarray = field(repr=False, compare=False)

    def __len__(self):
        return len(self.times)

    @property
    def dts(self) -> np.ndarray:
        return np.diff(self.times)


def log_grid(t_max: float = 50.0, t_min: float = 1e-3, steps: int = 2000) -> LogTimeGrid:
    """Log-uniform grid from ``t_max`` down to ``t_min`` with ``steps + 1`` points."""
    if not (t_min > 0 and t_max > 0):
        raise ParameterError("grid endpoints must be positive")
    if not t_max > t_min:
        raise ParameterError("t_max must exceed t_min")
    if int(steps) != steps or steps < 1:
        raise ParameterError(f"steps must be a positive integer, got {steps!r}")
    k = np.arange(steps + 1)
    times = np.exp(np.log(t_max) + (k / steps) * (np.log(t_min) - np.log(t_max)))
    times[0], times[-1] = t_max, t_min
    return LogTimeGrid(float(t_max), float(t_min), int(steps), times)
