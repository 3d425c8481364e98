"""Correlation lengths, series smoothing, log-time derivatives and alignment."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve1d

from .errors import DegenerateFieldError, DimensionError, ParameterError
from .lattice import format_real, radial_autocorrelation


def binarize(field) -> np.ndarray:
    """``sign(x)`` with ``sign(0) = +1``."""
    return np.where(np.asarray(field) >= 0, 1.0, -1.0)


# Correlations of sign fields are often exactly zero in exact arithmetic; the
# FFT leaves a roundoff residue of either sign, so treat that band as zero.
CORRELATION_FLOOR = 1e-12


def _positive_run(values: np.ndarray) -> int:
    """Length of the leading run of correlation values clearly above zero."""
    nonpos = np.nonzero(values <= CORRELATION_FLOOR)[0]
    return int(nonpos[0]) if len(nonpos) else len(values)


def correlation_length_first_moment(field) -> float:
    """``sum r C(r) / sum C(r)`` over the leading positive run of the sign field's correlation."""
    x = np.asarray(field, dtype=float)
    if not np.any(x):
        raise DegenerateFieldError("correlation length of an identically zero field")
    corr = radial_autocorrelation(binarize(x))
    cut = _positive_run(corr.values)
    r, c = corr.radii[:cut], corr.values[:cut]
    return float(np.dot(r, c) / c.sum())


def correlation_length_second_moment(field) -> float:
    """``sqrt(sum r^2 C(r) / sum C(r))`` of the mean-subtracted continuous field."""
    x = np.asarray(field, dtype=float)
    fluct = x - x.mean()
    if not np.any(np.abs(fluct) > 1e-14 * max(1.0, np.max(np.abs(x)))):
        raise DegenerateFieldError("second-moment correlation length needs a non-constant field")
    corr = radial_autocorrelation(fluct)
    cut = _positive_run(corr.values)
    r, c = corr.radii[:cut], corr.values[:cut]
    return float(np.sqrt(np.dot(r * r, c) / c.sum()))


@dataclass(frozen=True)
class ObservableSeries:
    times: np.ndarray
    values: np.ndarray
    label: str = ""
    smoothing_width: float = 0.0

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.shape != values.shape or times.ndim != 1:
            raise DimensionError("times and values must be 1-d arrays of equal length")
        steps = np.diff(times)
        if len(steps) and not (np.all(steps > 0) or np.all(steps < 0)):
            raise ParameterError("series times must be strictly monotone")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# label = {self.label}\n# smoothing_width = {format_real(self.smoothing_width)}\n")
            w = csv.writer(fh)
            w.writerow(["t", "value"])
            for t, v in zip(self.times, self.values):
                w.writerow([format_real(t), format_real(v)])


def gaussian_kernel(width: float) -> np.ndarray:
    radius = int(np.ceil(4 * width))
    u = np.arange(-radius, radius + 1)
    k = np.exp(-0.5 * (u / width) ** 2)
    return k / k.sum()


def gaussian_smooth(series: ObservableSeries, width: float) -> ObservableSeries:
    """Gaussian smoothing along the index axis, truncated at 4 widths.

    Near the ends the truncated kernel is renormalized over the samples that
    exist, so constants are preserved exactly.
    """
    if width < 0:
        raise ParameterError("smoothing width must be non-negative")
    if width == 0:
        return ObservableSeries(series.times, series.values.copy(), series.label, 0.0)
    kernel = gaussian_kernel(width)
    num = convolve1d(series.values, kernel, mode="constant", cval=0.0)
    den = convolve1d(np.ones_like(series.values), kernel, mode="constant", cval=0.0)
    return ObservableSeries(series.times, num / den, series.label, float(width))


def log_derivative(series: ObservableSeries) -> ObservableSeries:
    """``d value / d log t``: central differences inside, one-sided at the ends."""
    if len(series.times) < 3:
        raise ParameterError("log-derivative needs at least 3 points")
    if np.any(series.times <= 0):
        raise ParameterError("log-derivative needs positive times")
    deriv = np.gradient(series.values, np.log(series.times))
    return ObservableSeries(series.times, deriv, f"d{series.label}/dlogt", series.smoothing_width)


def alignment_overlap(field, target) -> float:
    """``(1/N) sum_i sign(x_i) target_i`` in ``[-1, 1]``."""
    x = np.asarray(field, dtype=float)
    target = np.asarray(target, dtype=float)
    if x.shape != target.shape:
        raise DimensionError("field and target live on different grids")
    return float(np.mean(binarize(x) * target))


def ensemble_variance(fields) -> float:
    """Site-averaged variance of an ensemble of fields around the ensemble mean."""
    stack = np.asarray(fields, dtype=float)
    return float(np.mean(np.var(stack, axis=0)))
