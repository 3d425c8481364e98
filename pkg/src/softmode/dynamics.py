"""Reverse-time Euler-Maruyama integration, ensembles and the reduced pitchfork ODE."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DivergenceError, ParameterError
from .schedule import LogTimeGrid, VPSchedule
from .scores import Drift, reverse_drift


FLOW_CONVENTIONS = ("sde", "reverse-flow")


@dataclass(frozen=True)
class IntegratorConfig:
    grid: LogTimeGrid
    noise_on: bool = True
    base_seed: int = 0
    record_every: int = 1
    # "sde": b = -x/2 - s (stepped with dt < 0); "reverse-flow": b = +x/2 + s in the same step
    flow_convention: str = "sde"

    def __post_init__(self):
        if self.record_every < 1:
            raise ParameterError("record_every must be >= 1")
        if self.flow_convention not in FLOW_CONVENTIONS:
            raise ParameterError(f"flow_convention must be one of {FLOW_CONVENTIONS}")
        if not np.all(np.diff(self.grid.times) < 0):
            raise ParameterError("integration grid must be strictly decreasing")


@dataclass
class TrajectoryRecord:
    """Snapshots of one reverse trajectory.

    ``snapshots[j]`` is the state at ``times[j]``; ``final`` is the state at
    ``t_min`` whether or not that time falls on the recording stride.
    ``observables`` holds per-time series attached by downstream analysis.
    """

    times: np.ndarray
    snapshots: np.ndarray
    final: np.ndarray
    t_final: float
    seed: int | None = None
    observables: dict[str, np.ndarray] = field(default_factory=dict)

    def __len__(self):
        return len(self.times)


def _initial_state(x_init, shape, rng, sign):
    if isinstance(x_init, str):
        if x_init != "gaussian":
            raise ParameterError(f"unknown initialization {x_init!r}")
        if shape is None:
            raise ParameterError("gaussian initialization needs a field shape")
        return sign * rng.standard_normal(shape)
    return np.array(x_init, dtype=float)


def integrate_reverse(
    model,
    schedule: VPSchedule,
    cfg: IntegratorConfig,
    x_init="gaussian",
    *,
    shape: tuple[int, ...] | None = None,
    seed: int | None = None,
    antithetic: bool = False,
    drift: Callable | None = None,
    increments: Callable[[int, float], np.ndarray] | None = None,
) -> TrajectoryRecord:
    """Integrate ``x_{k+1} = x_k + b(x_k, t_k) dt + sqrt(|dt|) eta_k`` over ``cfg.grid``.

    ``dt = t_{k+1} - t_k`` is negative. ``b`` defaults to :func:`reverse_drift`,
    or to the ``+x/2 + s`` flow when ``cfg.flow_convention == "reverse-flow"``.
    With ``antithetic=True`` every standard normal drawn (initial state and
    step noise) is negated, which yields the exact mirror trajectory for
    Z2-symmetric models. ``increments(k, dt)`` replaces the step noise
    ``sqrt(|dt|) eta_k`` (see :class:`RefinableBrownianPath`).
    """
    seed = cfg.base_seed if seed is None else seed
    rng = np.random.default_rng(seed)
    sign = -1.0 if antithetic else 1.0
    x = _initial_state(x_init, shape, rng, sign)
    if drift is None and cfg.flow_convention == "reverse-flow":
        drift = Drift(model, "reverse-flow", schedule)
    elif drift is None:
        drift = lambda y, t: reverse_drift(model, schedule, y, t)  # noqa: E731
    times = cfg.grid.times
    n = len(times)
    rec_idx = np.arange(0, n, cfg.record_every)
    snaps = np.empty((len(rec_idx),) + x.shape)
    slot = 0
    for k in range(n):
        if slot < len(rec_idx) and rec_idx[slot] == k:
            snaps[slot] = x
            slot += 1
        if k == n - 1:
            break
        t = times[k]
        dt = times[k + 1] - t
        x = x + drift(x, t) * dt
        if cfg.noise_on:
            dw = math.sqrt(-dt) * rng.standard_normal(x.shape) if increments is None else increments(k, dt)
            x = x + sign * dw
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"non-finite state after step {k} (t={times[k + 1]:.6g})", step=k)
    return TrajectoryRecord(times[rec_idx].copy(), snaps, x, float(times[-1]), seed)


class RefinableBrownianPath:
    """One Brownian path sampled on a fine grid and summed onto coarser grids.

    Fine step ``j`` draws from ``default_rng([seed, j])``. A grid with
    ``fine_steps / factor`` steps whose nodes are every ``factor``-th fine node
    sees the same path, which makes step-refinement comparisons pathwise.
    """

    def __init__(self, fine_grid: LogTimeGrid, seed: int, shape: tuple[int, ...]):
        self.fine_grid = fine_grid
        self.seed = seed
        self.shape = tuple(shape)

    def initial_state(self) -> np.ndarray:
        return np.random.default_rng([self.seed, 2**32 - 1]).standard_normal(self.shape)

    def increments(self, factor: int = 1) -> Callable[[int, float], np.ndarray]:
        if factor < 1 or self.fine_grid.steps % factor:
            raise ParameterError(f"factor {factor} does not divide {self.fine_grid.steps} fine steps")
        dts = self.fine_grid.dts

        def dw(k: int, dt: float) -> np.ndarray:
            total = np.zeros(self.shape)
            for j in range(k * factor, (k + 1) * factor):
                total += math.sqrt(-dts[j]) * np.random.default_rng([self.seed, j]).standard_normal(self.shape)
            return total

        return dw


def _ensemble_member(args):
    model, schedule, cfg, x_init, shape, seed = args
    return integrate_reverse(model, schedule, cfg, x_init, shape=shape, seed=seed)


def default_workers() -> int:
    return max(1, int(os.environ.get("SOFTMODE_WORKERS", "1")))


def run_ensemble(
    model,
    schedule: VPSchedule,
    cfg: IntegratorConfig,
    n_traj: int,
    x_init="gaussian",
    *,
    shape: tuple[int, ...] | None = None,
    workers: int | None = None,
) -> list[TrajectoryRecord]:
    """Independent trajectories with seeds ``base_seed + j``, returned in seed order."""
    if n_traj < 1:
        raise ParameterError("n_traj must be >= 1")
    jobs = [(model, schedule, cfg, x_init, shape, cfg.base_seed + j) for j in range(n_traj)]
    workers = default_workers() if workers is None else workers
    if workers <= 1 or n_traj == 1:
        return [_ensemble_member(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, n_traj)) as pool:
        return list(pool.map(_ensemble_member, jobs))


@dataclass(frozen=True)
class PitchforkParams:
    """Reduced amplitude equation ``dm/dtau = -g2 r(t) m - u m^3``."""

    r_of_t: Callable[[float], float]
    u: float = 1.0
    g2: float = 1.0

    def __post_init__(self):
        if not self.u > 0:
            raise ParameterError("cubic coefficient u must be positive")


@dataclass(frozen=True)
class PitchforkSeries:
    times: np.ndarray
    m: np.ndarray
    method: str


def integrate_pitchfork(p: PitchforkParams, grid: LogTimeGrid, m0: float, method: str = "euler") -> PitchforkSeries:
    """Integrate the amplitude equation along the reverse grid.

    The elapsed reverse time ``tau`` grows by ``|dt|`` per grid step, so a
    negative ``r`` drives ``m`` towards ``+-sqrt(-g2 r / u)``.
    """
    if method not in ("euler", "rk4"):
        raise ParameterError(f"unknown method {method!r}")

    def rhs(m, t):
        return -p.g2 * p.r_of_t(t) * m - p.u * m**3

    times = grid.times
    m = np.empty(len(times))
    m[0] = m0
    for k in range(len(times) - 1):
        t0, t1 = times[k], times[k + 1]
        h = t0 - t1
        y = m[k]
        if method == "euler":
            y = y + h * rhs(y, t0)
        else:
            tm = 0.5 * (t0 + t1)
            k1 = rhs(y, t0)
            k2 = rhs(y + 0.5 * h * k1, tm)
            k3 = rhs(y + 0.5 * h * k2, tm)
            k4 = rhs(y + h * k3, t1)
            y = y + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6
        if not math.isfinite(y):
            raise DivergenceError(f"pitchfork amplitude overflowed at step {k}", step=k)
        m[k + 1] = y
    return PitchforkSeries(times.copy(), m, method)


# ---------------------------------------------------------------------------
# snapshot export


def to_gray(x: np.ndarray, binarize: bool = False) -> np.ndarray:
    """8-bit gray levels: ``clamp(round(127.5 (x + 1)))`` or ``{-1: 0, +1: 255}`` by sign."""
    x = np.asarray(x, dtype=float)
    if binarize:
        return np.where(x >= 0, 255, 0).astype(np.uint8)
    return np.clip(np.rint(127.5 * (x + 1.0)), 0, 255).astype(np.uint8)


def write_pgm(path, x: np.ndarray, binarize: bool = False, comments: list[str] | None = None) -> None:
    """Binary P5 greymap of a 2-d field (1-d fields are written as one row)."""
    gray = to_gray(x, binarize)
    if gray.ndim == 1:
        gray = gray[None, :]
    header = "P5\n"
    for line in comments or []:
        header += f"# {line}\n"
    header += f"{gray.shape[1]} {gray.shape[0]}\n255\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(gray.tobytes())


def read_pgm(path) -> np.ndarray:
    data = open(path, "rb").read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end : end + 1].isspace():
            end += 1
        tokens.append(data[pos:end].decode("ascii"))
        pos = end
    if tokens[0] != "P5":
        raise ParameterError("not a binary PGM file")
    width, height = int(tokens[1]), int(tokens[2])
    pixels = np.frombuffer(data[pos + 1 : pos + 1 + width * height], dtype=np.uint8)
    return pixels.reshape(height, width)
