"""Jacobian spectra of the reverse drift.

Matrix-free: symmetric finite-difference Rayleigh quotients of a drift along
unit-norm Fourier probes. Analytic: the plane-wave dispersion of the patch
model linearized at ``x = 0``, with a dense-matrix eigensolver as oracle.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateFieldError, DivergenceError, EstimationError, ParameterError, SizeError
from .lattice import FourierProbe, LatticeGrid, fourier_probe, format_real, grid_of, patch_offsets
from .schedule import VPSchedule
from .theory import _check_convention

EPS_FLOOR = 5e-5
EPS_REL = 1e-3


def fd_step(schedule: VPSchedule, t: float, floor: float = EPS_FLOOR, rel: float = EPS_REL) -> float:
    return max(floor, rel * float(schedule.sigma2(t)))


def directional_derivative(drift, x, t: float, v, schedule: VPSchedule, eps: float | None = None) -> float:
    """``v^T [b(x + eps v) - b(x - eps v)] / (2 eps)`` for a unit-norm direction ``v``.

    ``eps`` defaults to ``max(5e-5, 1e-3 sigma^2(t))``.
    """
    v = v.values if isinstance(v, FourierProbe) else np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if abs(norm - 1.0) > 1e-9:
        raise ParameterError(f"probe direction must have unit norm, got {norm:.6g}")
    x = np.asarray(x, dtype=float)
    if eps is None:
        eps = fd_step(schedule, t)
    plus = drift(x + eps * v, t)
    minus = drift(x - eps * v, t)
    if not (np.all(np.isfinite(plus)) and np.all(np.isfinite(minus))):
        raise DivergenceError(f"non-finite drift while probing at t={t:.6g}")
    return float(np.vdot(v, plus - minus) / (2.0 * eps))


@dataclass
class DispersionSpectrum:
    """Direction-averaged shell derivatives ``lam[i, n]`` at ``times[i]``."""

    times: np.ndarray
    lam: np.ndarray
    L: int
    directions: tuple[str, ...] = ("axis-0", "axis-1")
    xi_eq: np.ndarray | None = field(default=None)

    @property
    def n_max(self) -> int:
        return self.lam.shape[1] - 1

    @property
    def k_min(self) -> float:
        return 2.0 * np.pi / self.L

    def to_csv(self, path, comments: list[str] | None = None) -> None:
        xi = self.xi_eq if self.xi_eq is not None else xi_eq_series(self)
        with open(path, "w", newline="") as fh:
            for line in comments or []:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(["t"] + [f"lambda_{n}" for n in range(self.n_max + 1)] + ["xi_eq"])
            for t, row, xv in zip(self.times, self.lam, xi):
                w.writerow([format_real(t)] + [format_real(v) for v in row] + [format_real(xv)])


def probe_set(grid: LatticeGrid, n_max: int, directions=("axis-0", "axis-1")) -> list[list[FourierProbe]]:
    if 2 * n_max > grid.L:
        raise ParameterError(f"n_max={n_max} exceeds L/2 for L={grid.L}")
    if grid.d == 1:
        directions = ("axis-0",)
    return [[fourier_probe(grid, n, dr) for dr in directions] for n in range(n_max + 1)]


def shell_derivatives(drift, x, t: float, probes, schedule: VPSchedule, eps: float | None = None) -> np.ndarray:
    """Direction-averaged directional derivative for each shell of ``probes``."""
    return np.array(
        [np.mean([directional_derivative(drift, x, t, v, schedule, eps) for v in shell]) for shell in probes]
    )


def shell_spectrum(
    drift,
    trajectory,
    schedule: VPSchedule,
    n_max: int = 6,
    directions=("axis-0", "axis-1"),
) -> DispersionSpectrum:
    """Probe the drift at every recorded state of a trajectory."""
    return spectrum_along(drift, trajectory.times, trajectory.snapshots, schedule, n_max, directions)


def spectrum_along(drift, times, fields, schedule: VPSchedule, n_max: int = 6, directions=("axis-0", "axis-1")) -> DispersionSpectrum:
    """Shell spectrum at the states ``fields[i]`` taken at ``times[i]``."""
    fields = list(fields)
    grid = grid_of(fields[0])
    probes = probe_set(grid, n_max, directions)
    lam = np.array([shell_derivatives(drift, x, t, probes, schedule) for t, x in zip(times, fields)])
    return DispersionSpectrum(np.asarray(times, dtype=float), lam, grid.L, tuple(directions))


def spectrum_at_zero(drift, grid: LatticeGrid, schedule: VPSchedule, times, n_max: int = 6, directions=("axis-0", "axis-1")) -> DispersionSpectrum:
    """Shell spectrum of the drift linearized at the symmetric point ``x = 0``."""
    probes = probe_set(grid, n_max, directions)
    zero = grid.zeros()
    times = np.asarray(times, dtype=float)
    lam = np.array([shell_derivatives(drift, zero, t, probes, schedule) for t in times])
    return DispersionSpectrum(times, lam, grid.L, tuple(directions))


# ---------------------------------------------------------------------------
# analytic dispersion


def patch_symbol(K: int, k) -> np.ndarray:
    """``prod_mu sin((K + 1/2) k_mu) / sin(k_mu / 2)`` with the ``k_mu -> 0`` limit ``2K + 1``.

    ``k`` has shape ``(..., d)``.
    """
    k = np.atleast_1d(np.asarray(k, dtype=float))
    # the symbol is 2 pi periodic; wrapping keeps the singular point at k = 0 only
    k = np.mod(k + np.pi, 2 * np.pi) - np.pi
    half = np.sin(k / 2)
    small = np.abs(half) < 1e-8
    safe = np.where(small, 1.0, half)
    # Taylor-expanded ratio near the removable singularity
    n = 2 * K + 1
    series = n * (1 - (n * n - 1) * k * k / 24)
    ratio = np.where(small, series, np.sin((K + 0.5) * k) / safe)
    return np.prod(ratio, axis=-1)


def patch_symbol_sum(K: int, k) -> np.ndarray:
    """The same symbol as the finite sum ``sum_{u in Omega} exp(i k.u)`` (real part)."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    offsets = patch_offsets(K, k.shape[-1]).astype(float)
    return np.cos(k @ offsets.T).sum(axis=-1)


def analytic_dispersion(K: int, d: int, schedule: VPSchedule, k, t, convention: str = "main-text"):
    """``lambda(k, t) = -(c + 1/sigma^2) + alpha^2/sigma^4 * symbol(k)``.

    ``c`` is ``1/2``, ``0`` or ``-1/2`` for the main-text, tree-level and
    reverse-flow conventions; the main-text form is the plain linearization
    of ``-x/2 + s`` and equals ``-r(t)`` at ``k = 0``.
    """
    friction = _check_convention(convention)
    if np.any(np.asarray(t) <= 0):
        raise ParameterError("dispersion requires t > 0")
    k = np.asarray(k, dtype=float)
    if d == 1 and (k.ndim == 0 or k.shape[-1] != 1):
        k = k[..., None]
    if k.shape[-1] != d:
        raise ParameterError(f"wavevector must have {d} components")
    a2, s2 = schedule.alpha2(t), schedule.sigma2(t)
    return -(friction + 1.0 / s2) + a2 / s2**2 * patch_symbol(K, k)


def brillouin_zone(grid: LatticeGrid) -> np.ndarray:
    """Discrete momenta ``2 pi m / L`` mapped to ``(-pi, pi]``, shape ``(N, d)``."""
    m = np.arange(grid.L)
    k1 = 2 * np.pi * np.where(m > grid.L // 2, m - grid.L, m) / grid.L
    mesh = np.meshgrid(*([k1] * grid.d), indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


def dense_jacobian(K: int, d: int, schedule: VPSchedule, grid: LatticeGrid, t: float, convention: str = "main-text") -> np.ndarray:
    """Explicit ``N x N`` Jacobian ``-(c + 1/sigma^2) delta_ij + alpha^2/sigma^4 1[(j - i) in Omega]``."""
    friction = _check_convention(convention)
    if d != grid.d:
        raise ParameterError("patch and lattice dimensions differ")
    if grid.n_sites > 4096:
        raise SizeError(f"dense Jacobian with N={grid.n_sites} > 4096 sites is not built")
    grid.check_patch_radius(K)
    a2, s2 = float(schedule.alpha2(t)), float(schedule.sigma2(t))
    n = grid.n_sites
    sites = np.array(np.unravel_index(np.arange(n), grid.shape)).T
    J = np.zeros((n, n))
    for u in patch_offsets(K, d):
        nbr = np.ravel_multi_index(tuple(((sites + u) % grid.L).T), grid.shape)
        J[np.arange(n), nbr] += a2 / s2**2
    J[np.diag_indices(n)] -= friction + 1.0 / s2
    return J


def dense_jacobian_oracle(K: int, d: int, schedule: VPSchedule, grid: LatticeGrid, t: float, convention: str = "main-text") -> np.ndarray:
    """Sorted eigenvalues of :func:`dense_jacobian` (symmetric eigensolver)."""
    return np.sort(np.linalg.eigvalsh(dense_jacobian(K, d, schedule, grid, t, convention)))


def oracle_deviation(K: int, d: int, schedule: VPSchedule, grid: LatticeGrid, t: float, convention: str = "main-text") -> float:
    """Max deviation between dense eigenvalues and the analytic zone spectrum."""
    dense = dense_jacobian_oracle(K, d, schedule, grid, t, convention)
    analytic = np.sort(analytic_dispersion(K, d, schedule, brillouin_zone(grid), t, convention))
    return float(np.max(np.abs(dense - analytic)))


# ---------------------------------------------------------------------------
# equilibrium correlation length and critical scale


def fit_xi_eq(spectrum: DispersionSpectrum, t_index: int, shells_used=(1, 2, 3)) -> float:
    """Origin-constrained least squares of ``lam_n/lam_0 - 1`` against ``(n k_min)^2``.

    Returns ``sqrt(max(slope, 0))`` in lattice units.
    """
    lam = spectrum.lam[t_index]
    if abs(lam[0]) < 1e-12:
        raise DegenerateFieldError(f"lambda_0 vanishes at t={spectrum.times[t_index]:.6g}")
    shells = np.asarray(shells_used)
    if np.any(shells < 1) or np.any(shells > spectrum.n_max):
        raise ParameterError("shells must lie in 1..n_max")
    x = (shells * spectrum.k_min) ** 2
    y = lam[shells] / lam[0] - 1.0
    slope = float(np.dot(x, y) / np.dot(x, x))
    return float(np.sqrt(max(slope, 0.0)))


def xi_eq_series(spectrum: DispersionSpectrum, shells_used=(1, 2, 3)) -> np.ndarray:
    """``fit_xi_eq`` at every time; degenerate normalizations become NaN."""
    out = np.empty(len(spectrum.times))
    for i in range(len(out)):
        try:
            out[i] = fit_xi_eq(spectrum, i, shells_used)
        except DegenerateFieldError:
            out[i] = np.nan
    return out


def estimate_critical_scale(times, xi_series) -> float:
    """Time maximizing the across-trajectory median of ``xi_eq``.

    ``xi_series`` is a sequence of per-trajectory series on the common ``times``.
    """
    xi = np.atleast_2d(np.asarray(xi_series, dtype=float))
    if xi.shape[-1] != len(times):
        raise EstimationError("xi_eq series and time axis differ in length")
    finite = np.isfinite(xi)
    if not finite.any():
        raise EstimationError("every xi_eq value is degenerate")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        med = np.nanmedian(np.where(finite, xi, np.nan), axis=0)
    if np.all(np.isnan(med)):
        raise EstimationError("every xi_eq value is degenerate")
    return float(np.asarray(times)[np.nanargmax(med)])


# ---------------------------------------------------------------------------
# soft modes


@dataclass(frozen=True)
class SoftModeReport:
    t: float
    maximizers: np.ndarray
    classification: str
    max_value: float
    flat: bool = False


def soft_mode_set(
    K: int,
    d: int,
    schedule: VPSchedule,
    t: float,
    grid: LatticeGrid,
    dispersion=None,
    tol: float = 1e-9,
) -> SoftModeReport:
    """Maximizers of the dispersion over the discrete Brillouin zone, classified.

    ``dispersion`` maps an ``(N, d)`` array of wavevectors to values and
    defaults to the analytic patch dispersion at time ``t``.
    """
    zone = brillouin_zone(grid)
    values = analytic_dispersion(K, d, schedule, zone, t) if dispersion is None else np.asarray(dispersion(zone), float)
    top = float(values.max())
    hits = zone[values >= top - tol]
    flat = len(hits) == len(zone)
    if len(hits) == 1 and np.allclose(hits[0], 0.0):
        kind = "uniform-k0"
    elif _single_pair(hits):
        kind = "single-nonzero-k"
    else:
        kind = "multiple-maxima"
    return SoftModeReport(float(t), hits, kind, top, flat)


def _single_pair(hits: np.ndarray) -> bool:
    """True if the hits are one nonzero k together with (at most) its image -k."""
    if len(hits) == 0 or len(hits) > 2 or np.allclose(hits[0], 0.0):
        return False
    if len(hits) == 1:
        return True
    diff = np.mod(hits[0] + hits[1] + np.pi, 2 * np.pi) - np.pi
    return bool(np.allclose(diff, 0.0))
