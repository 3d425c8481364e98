"""Analytic score models, reverse drifts and guidance.

Three models share one contract: ``model.score(x, t)`` returns an array shaped
like ``x`` and ``model.schedule`` is the VP schedule it was built for.

* :class:`EmpiricalPrototypeScore` - exact Bayesian score of a finite prototype set.
* :class:`LocalTanhScore` - local score of the ``+-1`` uniform dataset restricted to a patch.
* :class:`PatchPosteriorScore` - per-site posterior over a patch dictionary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import DimensionError, ParameterError, SingularNoiseError
from .lattice import grid_of, patch_offsets
from .schedule import VPSchedule

DRIFT_CONVENTIONS = ("sde", "main-text", "tree-level", "reverse-flow")


def _noise_levels(schedule: VPSchedule, t: float) -> tuple[float, float]:
    if not t > 0:
        raise SingularNoiseError(f"score is singular at t={t!r}; need t > 0")
    return float(schedule.alpha(t)), float(schedule.sigma2(t))


def _pair_index(rows: np.ndarray, priors: np.ndarray) -> np.ndarray:
    """For each row the index of its sign-flipped partner with equal prior, or -1."""
    partner = np.full(len(rows), -1)
    for i in range(len(rows)):
        for j in range(len(rows)):
            if i != j and priors[i] == priors[j] and np.array_equal(rows[i], -rows[j]):
                partner[i] = j
                break
    return partner


# ---------------------------------------------------------------------------
# data containers


@dataclass(frozen=True)
class PatchDictionary:
    """``+-1`` patches of radius ``K`` in ``d`` dimensions with prior weights.

    ``patterns`` has shape ``(M, (2K+1)^d)`` with entries in lexicographic
    offset order (see :func:`softmode.lattice.patch_offsets`).
    """

    K: int
    d: int
    patterns: np.ndarray
    priors: np.ndarray

    def __post_init__(self):
        patterns = np.asarray(self.patterns, dtype=float)
        priors = np.asarray(self.priors, dtype=float)
        if patterns.ndim != 2 or len(patterns) == 0:
            raise ParameterError("dictionary needs at least one pattern")
        if patterns.shape[1] != (2 * self.K + 1) ** self.d:
            raise DimensionError(
                f"patterns have {patterns.shape[1]} entries, expected {(2 * self.K + 1) ** self.d}"
            )
        if not np.all(np.abs(patterns) == 1):
            raise ParameterError("pattern entries must be +1 or -1")
        if priors.shape != (len(patterns),) or np.any(priors <= 0):
            raise ParameterError("priors must be positive, one per pattern")
        if abs(priors.sum() - 1.0) > 1e-12:
            raise ParameterError(f"priors sum to {priors.sum()!r}, not 1")
        object.__setattr__(self, "patterns", patterns)
        object.__setattr__(self, "priors", priors)

    @property
    def size(self) -> int:
        return len(self.patterns)

    @property
    def centers(self) -> np.ndarray:
        return self.patterns[:, self.patterns.shape[1] // 2]

    @property
    def z2_closed(self) -> bool:
        return bool(np.all(_pair_index(self.patterns, self.priors) >= 0))

    def index_of(self, pattern) -> int:
        pattern = np.asarray(pattern, dtype=float).ravel()
        hits = np.nonzero(np.all(self.patterns == pattern, axis=1))[0]
        if len(hits) == 0:
            raise ParameterError("pattern not present in the dictionary")
        return int(hits[0])

    def restrict(self, index: int) -> "PatchDictionary":
        """Single-pattern dictionary (prior 1) holding pattern ``index``."""
        if not 0 <= index < self.size:
            raise ParameterError(f"pattern index {index} out of range")
        return PatchDictionary(self.K, self.d, self.patterns[index : index + 1], np.ones(1))

    def to_text(self) -> str:
        lines = [f"{self.K} {self.d} {self.size}"]
        for prior, row in zip(self.priors, self.patterns):
            lines.append(f"{prior:.17g} " + " ".join(str(int(v)) for v in row))
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text: str) -> "PatchDictionary":
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        if not rows or len(rows[0]) != 3:
            raise ParameterError("dictionary header must read 'K d M'")
        K, d, M = (int(v) for v in rows[0])
        body = rows[1:]
        if len(body) != M:
            raise ParameterError(f"header announces {M} patterns, found {len(body)}")
        width = (2 * K + 1) ** d
        priors, patterns = [], []
        for n, row in enumerate(body, start=2):
            if len(row) != width + 1:
                raise ParameterError(f"line {n}: expected a prior and {width} entries")
            priors.append(float(row[0]))
            patterns.append([int(v) for v in row[1:]])
        return cls(K, d, np.array(patterns, dtype=float), np.array(priors))

    @classmethod
    def load(cls, path) -> "PatchDictionary":
        return cls.from_text(Path(path).read_text())


def uniform_dictionary(K: int, d: int = 2) -> PatchDictionary:
    """``{+1, -1}`` uniform patches with equal priors (the local tanh model)."""
    ones = np.ones((2 * K + 1) ** d)
    return PatchDictionary(K, d, np.stack([ones, -ones]), np.array([0.5, 0.5]))


def make_patch_dictionary(
    seed: int = 0,
    K: int = 2,
    d: int = 2,
    variant: str = "ten",
    random_mass: float = 0.1,
) -> PatchDictionary:
    """Random ``+-1`` patterns plus the two uniform patterns.

    ``variant="ten"``: eight random entries built as four random patterns and
    their flips, each at ``random_mass / 8``. ``variant="eighteen"``: eight
    random patterns plus eight flips, each at ``random_mass / 16``. The uniform
    patterns share the remaining mass equally.
    """
    if variant not in ("ten", "eighteen"):
        raise ParameterError(f"unknown dictionary variant {variant!r}")
    if not 0 < random_mass < 1:
        raise ParameterError("random_mass must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    width = (2 * K + 1) ** d
    n_base = 4 if variant == "ten" else 8
    base = rng.choice([-1.0, 1.0], size=(n_base, width))
    random_part = np.concatenate([base, -base])
    ones = np.ones((1, width))
    patterns = np.concatenate([random_part, ones, -ones])
    n_rand = len(random_part)
    priors = np.concatenate([np.full(n_rand, random_mass / n_rand), np.full(2, (1 - random_mass) / 2)])
    return PatchDictionary(K, d, patterns, priors)


@dataclass(frozen=True)
class PrototypeSet:
    """Prototype fields ``mu_m`` (stacked along axis 0) with prior weights."""

    prototypes: np.ndarray
    priors: np.ndarray | None = None
    centered: bool = False

    def __post_init__(self):
        protos = np.asarray(self.prototypes, dtype=float)
        if protos.ndim < 2 or len(protos) == 0:
            raise ParameterError("need at least one prototype")
        priors = (
            np.full(len(protos), 1.0 / len(protos))
            if self.priors is None
            else np.asarray(self.priors, dtype=float)
        )
        if priors.shape != (len(protos),) or np.any(priors <= 0):
            raise ParameterError("priors must be positive, one per prototype")
        if abs(priors.sum() - 1.0) > 1e-12:
            raise ParameterError("prototype priors must sum to 1")
        if self.centered:
            mean = np.tensordot(priors, protos, axes=1)
            if np.max(np.abs(mean)) > 1e-10 * max(1.0, np.max(np.abs(protos))):
                raise ParameterError("prototype set flagged centered but the weighted mean is non-zero")
        object.__setattr__(self, "prototypes", protos)
        object.__setattr__(self, "priors", priors)

    @property
    def field_shape(self) -> tuple[int, ...]:
        return self.prototypes.shape[1:]

    @property
    def flat(self) -> np.ndarray:
        return self.prototypes.reshape(len(self.prototypes), -1)

    @property
    def z2_closed(self) -> bool:
        return bool(np.all(_pair_index(self.flat, self.priors) >= 0))

    def second_moment(self) -> np.ndarray:
        """``C = sum_m mu_m mu_m^T`` over flattened prototypes."""
        return self.flat.T @ self.flat


def symmetric_pair(mu) -> PrototypeSet:
    mu = np.asarray(mu, dtype=float)
    return PrototypeSet(np.stack([mu, -mu]), centered=True)


# ---------------------------------------------------------------------------
# score models


class EmpiricalPrototypeScore:
    """Exact score of a prototype mixture noised by a VP schedule."""

    def __init__(self, prototypes: PrototypeSet, schedule: VPSchedule):
        self.prototypes = prototypes
        self.schedule = schedule
        self._norm2 = np.sum(prototypes.flat**2, axis=1)
        self._log_priors = np.log(prototypes.priors)
        self._partner = _pair_index(prototypes.flat, prototypes.priors)

    @property
    def z2_closed(self) -> bool:
        return bool(np.all(self._partner >= 0))

    def score(self, x, t):
        x = np.asarray(x, dtype=float)
        if x.shape != self.prototypes.field_shape:
            raise DimensionError(f"field shape {x.shape} does not match prototypes {self.prototypes.field_shape}")
        alpha, s2 = _noise_levels(self.schedule, t)
        flat = self.prototypes.flat
        logits = (alpha / s2) * (flat @ x.ravel()) - (alpha**2 / (2 * s2)) * self._norm2 + self._log_priors
        w = _stable_weights(logits)
        mean = _weighted_rows(w, flat, self._partner)
        return (alpha * mean.reshape(x.shape) - x) / s2

    __call__ = score


class LocalTanhScore:
    """Local score ``(alpha tanh(alpha S_i / sigma^2) - x_i) / sigma^2`` with patch sums ``S_i``."""

    z2_closed = True

    def __init__(self, K: int, schedule: VPSchedule):
        if K < 0:
            raise ParameterError("patch radius must be >= 0")
        self.K = K
        self.schedule = schedule

    def score(self, x, t):
        x = np.asarray(x, dtype=float)
        grid_of(x).check_patch_radius(self.K)
        alpha, s2 = _noise_levels(self.schedule, t)
        S = box_sum(x, self.K)
        return (alpha * np.tanh((alpha / s2) * S) - x) / s2

    __call__ = score


def box_sum(x: np.ndarray, K: int) -> np.ndarray:
    """Periodic sum of ``x`` over the hypercube ``[-K, K]^d`` around each site."""
    out = x
    for axis in range(x.ndim):
        acc = out.copy()
        for shift in range(1, K + 1):
            acc = acc + np.roll(out, shift, axis=axis) + np.roll(out, -shift, axis=axis)
        out = acc
    return out


class PatchPosteriorScore:
    """Per-site posterior over a patch dictionary.

    Every site weighs the patterns by ``pi_k exp(alpha/sigma^2 <p_k, y_i>)`` where
    ``y_i`` is the periodic patch centred at the site; the score pulls ``x_i``
    towards ``alpha`` times the posterior mean of the central pixel.
    The inner products are periodic cross-correlations, computed either by FFT
    (``backend="fft"``) or by summing shifted copies (``backend="direct"``).
    """

    def __init__(self, dictionary: PatchDictionary, schedule: VPSchedule, backend: str = "fft"):
        if backend not in ("fft", "direct"):
            raise ParameterError(f"unknown correlation backend {backend!r}")
        self.dictionary = dictionary
        self.schedule = schedule
        self.backend = backend
        self._log_priors = np.log(dictionary.priors)
        self._centers = dictionary.centers
        self._partner = _pair_index(dictionary.patterns, dictionary.priors)
        # correlate only one member of each sign-flipped pair
        self._rep = np.arange(dictionary.size)
        self._sign = np.ones(dictionary.size)
        for i, j in enumerate(self._partner):
            if 0 <= j < i:
                self._rep[i], self._sign[i] = self._rep[j], -self._sign[j]
        self._unique = np.unique(self._rep)
        self._slot = np.searchsorted(self._unique, self._rep)
        self._kernel_cache: dict[tuple[int, ...], np.ndarray] = {}

    @property
    def z2_closed(self) -> bool:
        return bool(np.all(self._partner >= 0))

    def _kernels(self, shape):
        cached = self._kernel_cache.get(shape)
        if cached is None:
            d = self.dictionary
            offsets = patch_offsets(d.K, d.d) % shape[0]
            ker = np.zeros((len(self._unique),) + shape)
            for row, k in enumerate(self._unique):
                ker[(row,) + tuple(offsets.T)] = d.patterns[k]
            cached = np.conj(np.fft.rfftn(ker, axes=tuple(range(1, len(shape) + 1))))
            self._kernel_cache[shape] = cached
        return cached

    def correlations(self, x: np.ndarray) -> np.ndarray:
        """``<p_k, y_i>`` for every pattern ``k`` and site ``i``, shape ``(M,) + x.shape``."""
        x = np.asarray(x, dtype=float)
        grid = grid_of(x)
        d = self.dictionary
        if grid.d != d.d:
            raise DimensionError(f"dictionary is {d.d}-d but the field is {grid.d}-d")
        grid.check_patch_radius(d.K)
        if self.backend == "fft":
            axes = tuple(range(1, x.ndim + 1))
            spec = np.fft.rfftn(x)[None] * self._kernels(x.shape)
            uniq = np.fft.irfftn(spec, s=x.shape, axes=axes)
        else:
            uniq = np.zeros((len(self._unique),) + x.shape)
            for off, col in zip(patch_offsets(d.K, d.d), d.patterns[self._unique].T):
                shifted = np.roll(x, tuple(-off), axis=tuple(range(x.ndim)))
                uniq += col.reshape((-1,) + (1,) * x.ndim) * shifted[None]
        return self._sign.reshape((-1,) + (1,) * x.ndim) * uniq[self._slot]

    def posterior_mean(self, x, t, correlations=None) -> np.ndarray:
        alpha, s2 = _noise_levels(self.schedule, t)
        ip = self.correlations(x) if correlations is None else correlations
        logits = (alpha / s2) * ip + self._log_priors.reshape((-1,) + (1,) * (ip.ndim - 1))
        w = _stable_weights(logits)
        return _weighted_rows(w, self._centers, self._partner)

    def score(self, x, t):
        x = np.asarray(x, dtype=float)
        alpha, s2 = _noise_levels(self.schedule, t)
        return (alpha * self.posterior_mean(x, t) - x) / s2

    __call__ = score


def _stable_weights(logits: np.ndarray) -> np.ndarray:
    """Unnormalized softmax weights along axis 0 with max subtraction."""
    return np.exp(logits - logits.max(axis=0, keepdims=True))


def _weighted_rows(w: np.ndarray, values: np.ndarray, partner: np.ndarray) -> np.ndarray:
    """``sum_k w_k v_k / sum_k w_k`` with sign-flip pairs combined first.

    Summing ``v_k (w_k - w_k')`` pairwise makes the result exactly odd under
    a swap of paired weights, so Z2-closed models are bitwise equivariant.
    """
    num = 0.0
    den = 0.0
    seen = np.zeros(len(partner), dtype=bool)
    for k, j in enumerate(partner):
        if seen[k]:
            continue
        seen[k] = True
        vk = values[k]
        if j >= 0 and not seen[j]:
            seen[j] = True
            num = num + vk * (w[k] - w[j])
            den = den + (w[k] + w[j])
        else:
            num = num + vk * w[k]
            den = den + w[k]
    return num / den


class GuidedScore:
    """``s_uncond + w(t) (s_cond - s_uncond)``; ``weight`` is a number or a function of t."""

    def __init__(self, cond, uncond, weight: float | Callable[[float], float]):
        self.cond = cond
        self.uncond = uncond
        self.weight = weight
        self.schedule = uncond.schedule

    @property
    def z2_closed(self) -> bool:
        return False

    def weight_at(self, t: float) -> float:
        return float(self.weight(t)) if callable(self.weight) else float(self.weight)

    def score(self, x, t):
        w = self.weight_at(t)
        su = self.uncond.score(x, t)
        if w == 0.0:
            return su
        return guided_combination(self.cond.score(x, t), su, w)

    __call__ = score


def guided_combination(s_cond, s_uncond, w: float):
    s_cond = np.asarray(s_cond, dtype=float)
    s_uncond = np.asarray(s_uncond, dtype=float)
    if s_cond.shape != s_uncond.shape:
        raise DimensionError("conditional and unconditional scores live on different grids")
    # the endpoints are returned verbatim; the affine form can be off by an ulp there
    if w == 0.0:
        return s_uncond
    if w == 1.0:
        return s_cond
    return s_uncond + w * (s_cond - s_uncond)


# ---------------------------------------------------------------------------
# functional forms


def empirical_prototype_score(prototypes: PrototypeSet, schedule: VPSchedule, x, t):
    return EmpiricalPrototypeScore(prototypes, schedule).score(x, t)


def local_tanh_score(K: int, schedule: VPSchedule, x, t):
    return LocalTanhScore(K, schedule).score(x, t)


def patch_posterior_score(dictionary: PatchDictionary, schedule: VPSchedule, x, t, backend: str = "fft"):
    return PatchPosteriorScore(dictionary, schedule, backend).score(x, t)


def guided_score(cond, uncond, w: float, x, t):
    if cond.schedule != uncond.schedule:
        raise DimensionError("guided models must share a schedule")
    return guided_combination(cond.score(x, t), uncond.score(x, t), w)


def reverse_drift(model, schedule: VPSchedule, x, t):
    """Sampler drift ``b = -(beta/2) x - beta s(x, t)``, stepped with negative dt."""
    x = np.asarray(x, dtype=float)
    beta = float(schedule.beta_at(t))
    return -0.5 * beta * x - beta * model.score(x, t)


@dataclass(frozen=True)
class Drift:
    """Drift ``c x + sign * beta * s`` bound to a model; callable as ``drift(x, t)``.

    ``convention`` selects how the linear term and the score combine:

    ``"sde"``          ``-(beta/2) x - beta s`` (the integrated sampler drift)
    ``"main-text"``    ``-(beta/2) x + beta s`` (Jacobian at 0 has mass ``1/2 + 1/sigma^2 - ...``)
    ``"tree-level"``   ``beta s``
    ``"reverse-flow"`` ``+(beta/2) x + beta s`` (velocity along decreasing t)
    """

    model: object
    convention: str = "sde"
    schedule: VPSchedule = field(default=None)

    def __post_init__(self):
        if self.convention not in DRIFT_CONVENTIONS:
            raise ParameterError(f"unknown drift convention {self.convention!r}")
        if self.schedule is None:
            object.__setattr__(self, "schedule", self.model.schedule)

    def __call__(self, x, t):
        x = np.asarray(x, dtype=float)
        beta = float(self.schedule.beta_at(t))
        s = self.model.score(x, t)
        if self.convention == "sde":
            return -0.5 * beta * x - beta * s
        if self.convention == "main-text":
            return -0.5 * beta * x + beta * s
        if self.convention == "tree-level":
            return beta * s
        return 0.5 * beta * x + beta * s


def make_drift(model, convention: str = "sde") -> Drift:
    return Drift(model, convention)
