"""Guidance pulses delivered at the critical time versus at random times.

Each trial integrates the guided patch model twice with the same noise seed:
once with the pulse centred on the critical time and once centred on a time
drawn log-uniformly over the integration range. The guidance weight is
``w_pulse`` inside the window and 0 outside. Alignment of the final sign
field with the target class is compared per trial with a sign test.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import binomtest

from .dynamics import IntegratorConfig, integrate_reverse
from .errors import ParameterError, UndefinedTestError
from .lattice import LatticeGrid, format_real
from .observables import alignment_overlap
from .schedule import LogTimeGrid, VPSchedule
from .scores import GuidedScore, PatchDictionary, PatchPosteriorScore

CONDITIONS = ("critical", "random")


@dataclass(frozen=True)
class PulseConfig:
    t_critical: float
    w_pulse: float = 1.5
    half_width: float = 0.25
    trials: int = 20
    base_seed: int = 0
    window: str = "log-t"
    flow_convention: str = "sde"

    def __post_init__(self):
        if not self.half_width > 0:
            raise ParameterError("pulse half-width must be positive")
        if self.trials < 1:
            raise ParameterError("need at least one trial")
        if self.window not in ("log-t", "sigma"):
            raise ParameterError(f"unknown pulse window {self.window!r}")
        if not self.t_critical > 0:
            raise ParameterError("critical time must be positive")


def in_window(t: float, center: float, cfg: PulseConfig, schedule: VPSchedule) -> bool:
    if cfg.window == "log-t":
        return abs(np.log(t) - np.log(center)) <= cfg.half_width
    return abs(float(schedule.sigma(t)) - float(schedule.sigma(center))) <= cfg.half_width


def random_centers(cfg: PulseConfig, grid: LogTimeGrid) -> np.ndarray:
    """Log-uniform pulse centres, one per trial, from a stream independent of the noise seeds."""
    rng = np.random.default_rng([cfg.base_seed, 0x5EED])
    return np.exp(rng.uniform(np.log(grid.t_min), np.log(grid.t_max), size=cfg.trials))


@dataclass
class PulseTrial:
    trial: int
    condition: str
    t_center: float
    alignment: float


@dataclass
class PulseOutcome:
    trials: list[PulseTrial]
    medians: dict[str, float]
    differences: np.ndarray
    p_value: float | None
    note: str = ""
    config: dict = field(default_factory=dict)

    def alignments(self, condition: str) -> np.ndarray:
        return np.array([tr.alignment for tr in self.trials if tr.condition == condition])

    def to_csv(self, path, comments: list[str] | None = None) -> None:
        with open(path, "w", newline="") as fh:
            for line in comments or []:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(["trial", "condition", "t_center", "alignment"])
            for tr in self.trials:
                w.writerow([tr.trial, tr.condition, format_real(tr.t_center), format_real(tr.alignment)])

    def summary(self) -> dict:
        return {
            "medians": self.medians,
            "p_value": self.p_value if self.p_value is not None else "undefined",
            "note": self.note,
            "n_positive": int(np.sum(self.differences > 0)),
            "n_negative": int(np.sum(self.differences < 0)),
            "n_zero": int(np.sum(self.differences == 0)),
            "config": self.config,
        }

    def write_summary(self, path, extra: dict | None = None) -> None:
        data = self.summary()
        if extra:
            data.update(extra)
        with open(path, "w") as fh:
            json.dump(data, fh, indent=2, sort_keys=True)
            fh.write("\n")


def sign_test(differences) -> float:
    """Exact one-sided binomial sign test of ``P(difference > 0) > 1/2``; zeros are dropped."""
    diffs = np.asarray(differences, dtype=float)
    nonzero = diffs[diffs != 0]
    if len(nonzero) == 0:
        raise UndefinedTestError("all paired differences are zero")
    if len(nonzero) < 5:
        raise UndefinedTestError(f"sign test needs >= 5 nonzero differences, got {len(nonzero)}")
    return float(binomtest(int(np.sum(nonzero > 0)), len(nonzero), 0.5, alternative="greater").pvalue)


def target_field(dictionary: PatchDictionary, target: int, lattice: LatticeGrid) -> np.ndarray:
    """Field the single-pattern conditional model drives towards: the target's centre value everywhere."""
    return np.full(lattice.shape, dictionary.centers[target])


def run_trial(
    uncond: PatchPosteriorScore,
    cond: PatchPosteriorScore,
    schedule: VPSchedule,
    grid: LogTimeGrid,
    lattice: LatticeGrid,
    cfg: PulseConfig,
    center: float,
    seed: int,
    antithetic: bool = False,
) -> np.ndarray:
    weight = lambda t: cfg.w_pulse if in_window(t, center, cfg, schedule) else 0.0  # noqa: E731
    model = GuidedScore(cond, uncond, weight)
    icfg = IntegratorConfig(grid, True, seed, len(grid.times), cfg.flow_convention)
    return integrate_reverse(model, schedule, icfg, "gaussian", shape=lattice.shape, antithetic=antithetic).final


def run_pulse_experiment(
    dictionary: PatchDictionary,
    target: int,
    schedule: VPSchedule,
    grid: LogTimeGrid,
    cfg: PulseConfig,
    lattice: LatticeGrid,
    antithetic: bool = False,
) -> PulseOutcome:
    """Paired critical/random pulse trials; trial ``j`` uses noise seed ``base_seed + j`` in both."""
    if not 0 <= target < dictionary.size:
        raise ParameterError(f"target pattern {target} is not in the dictionary")
    uncond = PatchPosteriorScore(dictionary, schedule)
    cond = PatchPosteriorScore(dictionary.restrict(target), schedule)
    goal = target_field(dictionary, target, lattice)
    centers = {"critical": np.full(cfg.trials, cfg.t_critical), "random": random_centers(cfg, grid)}
    trials = []
    for j in range(cfg.trials):
        for cond_name in CONDITIONS:
            c = float(centers[cond_name][j])
            final = run_trial(uncond, cond, schedule, grid, lattice, cfg, c, cfg.base_seed + j, antithetic)
            trials.append(PulseTrial(j, cond_name, c, alignment_overlap(final, goal)))
    crit = np.array([tr.alignment for tr in trials if tr.condition == "critical"])
    rand = np.array([tr.alignment for tr in trials if tr.condition == "random"])
    diffs = crit - rand
    try:
        p, note = sign_test(diffs), ""
    except UndefinedTestError as exc:
        p, note = None, f"undefined-test: {exc}"
    medians = {"critical": float(np.median(crit)), "random": float(np.median(rand))}
    echo = asdict(cfg) | {"target": int(target), "random_centers": "log-uniform in t"}
    return PulseOutcome(trials, medians, diffs, p, note, echo)
