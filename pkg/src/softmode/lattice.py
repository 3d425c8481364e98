"""Periodic lattice geometry, patches, Fourier probes and radial autocorrelation.

Fields are plain numpy arrays of shape ``(L,)`` or ``(L, L)``; :class:`LatticeGrid`
carries the geometry and validates arrays against it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from itertools import product
from pathlib import Path

import numpy as np

from .errors import AliasingError, DegenerateFieldError, DimensionError, ParameterError

DIRECTIONS = ("axis-0", "axis-1", "diagonal")


@dataclass(frozen=True)
class LatticeGrid:
    """Hypercubic periodic lattice with ``L`` sites per dimension."""

    L: int
    d: int = 2

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 1:
            raise ParameterError(f"side length must be a positive integer, got {self.L!r}")
        if self.d not in (1, 2):
            raise ParameterError(f"dimension must be 1 or 2, got {self.d!r}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.L,) * self.d

    @property
    def n_sites(self) -> int:
        return self.L**self.d

    @property
    def k_min(self) -> float:
        return 2.0 * np.pi / self.L

    def check_field(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != self.shape:
            raise DimensionError(f"field shape {x.shape} does not match lattice {self.shape}")
        return x

    def check_patch_radius(self, K: int) -> None:
        if K < 0:
            raise ParameterError(f"patch radius must be >= 0, got {K}")
        if 2 * K + 1 > self.L:
            raise DimensionError(f"patch of side {2 * K + 1} does not fit a lattice of side {self.L}")

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def coordinates(self) -> list[np.ndarray]:
        return list(np.indices(self.shape))


def grid_of(x: np.ndarray) -> LatticeGrid:
    """Infer the lattice of a field array."""
    shape = np.shape(x)
    if len(shape) not in (1, 2) or len(set(shape)) != 1:
        raise DimensionError(f"fields must be 1-d or square 2-d arrays, got shape {shape}")
    return LatticeGrid(shape[0], len(shape))


def patch_offsets(K: int, d: int) -> np.ndarray:
    """Offsets u in [-K, K]^d in lexicographic order, shape ``((2K+1)^d, d)``."""
    return np.array(list(product(range(-K, K + 1), repeat=d)), dtype=int).reshape(-1, d)


def extract_patch(field, center, K: int) -> np.ndarray:
    """Flat periodic patch of radius ``K`` around ``center`` (lexicographic offsets)."""
    x = np.asarray(field, dtype=float)
    grid = grid_of(x)
    grid.check_patch_radius(K)
    center = np.atleast_1d(np.asarray(center, dtype=int))
    if center.shape != (grid.d,):
        raise DimensionError(f"center must have {grid.d} coordinates")
    idx = (center[None, :] + patch_offsets(K, grid.d)) % grid.L
    return x[tuple(idx.T)]


@dataclass(frozen=True)
class FourierProbe:
    shell: int
    direction: str
    values: np.ndarray


def fourier_probe(grid: LatticeGrid, n: int, direction: str = "axis-0") -> FourierProbe:
    """Unit-norm cosine ``cos(n k_min c)`` along ``direction``.

    ``c`` is the coordinate along the chosen axis, or the sum of coordinates
    for ``"diagonal"``.
    """
    if direction not in DIRECTIONS:
        raise ParameterError(f"unknown probe direction {direction!r}")
    if n < 0:
        raise ParameterError("shell index must be non-negative")
    if 2 * n > grid.L:
        raise AliasingError(f"shell {n} exceeds the Nyquist shell {grid.L // 2}")
    coords = grid.coordinates()
    if direction == "axis-0":
        c = coords[0]
    elif grid.d == 1:
        raise ParameterError(f"direction {direction!r} needs a 2-d lattice")
    elif direction == "axis-1":
        c = coords[1]
    else:
        c = coords[0] + coords[1]
    # exact integer phase reduction keeps cos(pi * odd) etc. free of drift
    phase = (n * c) % grid.L
    values = np.cos(grid.k_min * phase)
    values /= np.linalg.norm(values)
    return FourierProbe(n, direction, values)


@dataclass(frozen=True)
class RadialCorrelation:
    radii: np.ndarray
    values: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "C"])
            for r, c in zip(self.radii, self.values):
                w.writerow([format_real(r), format_real(c)])

    @classmethod
    def from_csv(cls, path) -> "RadialCorrelation":
        data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1])


def format_real(value: float) -> str:
    return f"{float(value):.17g}"


def min_image_distance(grid: LatticeGrid) -> np.ndarray:
    """Euclidean min-image distance of every displacement from the origin."""
    d1 = np.minimum(np.arange(grid.L), grid.L - np.arange(grid.L)).astype(float)
    if grid.d == 1:
        return d1
    return np.sqrt(d1[:, None] ** 2 + d1[None, :] ** 2)


def periodic_autocorrelation(field) -> np.ndarray:
    """Raw periodic autocorrelation ``(1/N) sum_i x_i x_{i+r}`` for all displacements."""
    x = np.asarray(field, dtype=float)
    spec = np.fft.fftn(x)
    return np.fft.ifftn(spec * np.conj(spec)).real / x.size


def radial_autocorrelation(field, max_radius: float | None = None) -> RadialCorrelation:
    """Radially averaged autocorrelation, normalized so that ``C(0) = 1``.

    Displacements are binned to the nearest integer min-image distance and
    averaged within each bin. Bins are not reweighted by occupancy.
    """
    x = np.asarray(field, dtype=float)
    grid = grid_of(x)
    if not np.any(x):
        raise DegenerateFieldError("autocorrelation of an identically zero field is undefined")
    if max_radius is None:
        max_radius = grid.L / 2
    acf = periodic_autocorrelation(x).ravel()
    bins = np.rint(min_image_distance(grid)).astype(int).ravel()
    counts = np.bincount(bins)
    sums = np.bincount(bins, weights=acf)
    radii = np.nonzero(counts)[0]
    radii = radii[radii <= max_radius]
    values = sums[radii] / counts[radii]
    return RadialCorrelation(radii.astype(float), values / values[0])
