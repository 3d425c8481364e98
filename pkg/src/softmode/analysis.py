"""Per-trajectory observables and ensemble medians for the reverse-trajectory pipeline."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import TrajectoryRecord
from .observables import (
    ObservableSeries,
    correlation_length_first_moment,
    gaussian_smooth,
    log_derivative,
)
from .schedule import VPSchedule
from .spectral import DispersionSpectrum, spectrum_along, xi_eq_series


@dataclass
class TrajectoryAnalysis:
    times: np.ndarray
    xi_x: np.ndarray
    xi_x_smoothed: np.ndarray
    dxi_dlogt: np.ndarray
    spectrum: DispersionSpectrum | None
    xi_eq: np.ndarray | None


def analyze_trajectory(
    record: TrajectoryRecord,
    schedule: VPSchedule,
    drift=None,
    n_max: int = 6,
    directions=("axis-0", "axis-1"),
    shells_used=(1, 2, 3),
    smoothing_width: float = 5.0,
) -> TrajectoryAnalysis:
    """Correlation length, its smoothed log-time derivative and (optionally) the shell spectrum.

    The snapshot at ``t_min`` is appended when the recording stride skipped it.
    Spectra are only computed when a ``drift`` is given.
    """
    times = np.asarray(record.times, dtype=float)
    fields = list(record.snapshots)
    if times[-1] != record.t_final:
        times = np.append(times, record.t_final)
        fields.append(record.final)
    xi = np.array([correlation_length_first_moment(x) for x in fields])
    smooth = gaussian_smooth(ObservableSeries(times, xi, "xi_x"), smoothing_width)
    deriv = log_derivative(smooth)
    spectrum = xi_eq = None
    if drift is not None:
        spectrum = spectrum_along(drift, times, fields, schedule, n_max, directions)
        xi_eq = xi_eq_series(spectrum, shells_used)
        spectrum.xi_eq = xi_eq
    return TrajectoryAnalysis(times, xi, smooth.values, deriv.values, spectrum, xi_eq)


@dataclass
class EnsembleSummary:
    """Across-trajectory medians on the recorded time axis."""

    times: np.ndarray
    xi_x: np.ndarray
    growth_rate: np.ndarray
    spectrum_times: np.ndarray | None
    abs_lambda: np.ndarray | None
    xi_eq: np.ndarray | None

    def argmin_abs_lambda(self, shell: int) -> float:
        return float(self.spectrum_times[np.argmin(self.abs_lambda[:, shell])])

    def argmax_xi_eq(self) -> float:
        return float(self.spectrum_times[np.nanargmax(self.xi_eq)])

    def argmax_growth(self) -> float:
        return float(self.times[np.argmax(self.growth_rate)])


def summarize(analyses: list[TrajectoryAnalysis]) -> EnsembleSummary:
    """Medians of ``xi_x``, of ``-dxi/dlog t`` (growth along the reverse direction), ``|lambda_n|`` and ``xi_eq``."""
    times = analyses[0].times
    xi = np.median([a.xi_x for a in analyses], axis=0)
    growth = np.median([-a.dxi_dlogt for a in analyses], axis=0)
    if analyses[0].spectrum is None:
        return EnsembleSummary(times, xi, growth, None, None, None)
    st = analyses[0].spectrum.times
    abs_lam = np.median([np.abs(a.spectrum.lam) for a in analyses], axis=0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        xi_eq = np.nanmedian([a.xi_eq for a in analyses], axis=0)
    return EnsembleSummary(times, xi, growth, st, abs_lam, xi_eq)
