"""Slow, loop-based reference implementations used only as test oracles.

Nothing here imports from the package internals beyond plain data containers,
so agreement with the vectorized code is a genuine cross-check.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def offsets(K: int, d: int) -> list[tuple[int, ...]]:
    return list(itertools.product(range(-K, K + 1), repeat=d))


def pair_sum_radial_correlation(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """O(N^2) autocorrelation: every ordered pair of sites, min-image distance rounded to an integer bin."""
    L = x.shape[0]
    d = x.ndim
    sites = list(itertools.product(range(L), repeat=d))
    # raw correlation per displacement
    acf = {}
    for r in itertools.product(range(L), repeat=d):
        total = 0.0
        for s in sites:
            total += x[s] * x[tuple((s[a] + r[a]) % L for a in range(d))]
        acf[r] = total / len(sites)
    bins: dict[int, list[float]] = {}
    for r, val in acf.items():
        dist = math.sqrt(sum(min(c, L - c) ** 2 for c in r))
        bins.setdefault(int(np.rint(dist)), []).append(val)
    radii = np.array(sorted(b for b in bins if b <= L / 2), dtype=float)
    vals = np.array([np.mean(bins[int(b)]) for b in radii])
    return radii, vals / vals[0]


def loop_tanh_score(x: np.ndarray, K: int, alpha: float, s2: float) -> np.ndarray:
    L, d = x.shape[0], x.ndim
    out = np.empty_like(x)
    for s in itertools.product(range(L), repeat=d):
        S = sum(x[tuple((s[a] + u[a]) % L for a in range(d))] for u in offsets(K, d))
        out[s] = (alpha * math.tanh(alpha * S / s2) - x[s]) / s2
    return out


def loop_patch_score(x: np.ndarray, patterns: np.ndarray, priors: np.ndarray, K: int, alpha: float, s2: float) -> np.ndarray:
    """Per-site posterior mean of the centre pixel with log-sum-exp weights, looped over sites and patterns."""
    L, d = x.shape[0], x.ndim
    offs = offsets(K, d)
    centre = len(offs) // 2
    out = np.empty_like(x)
    for s in itertools.product(range(L), repeat=d):
        y = np.array([x[tuple((s[a] + u[a]) % L for a in range(d))] for u in offs])
        logits = [math.log(pi) + alpha / s2 * float(np.dot(p, y)) for p, pi in zip(patterns, priors)]
        top = max(logits)
        w = [math.exp(v - top) for v in logits]
        m = sum(wk * p[centre] for wk, p in zip(w, patterns)) / sum(w)
        out[s] = (alpha * m - x[s]) / s2
    return out


def loop_prototype_score(x: np.ndarray, protos: np.ndarray, priors: np.ndarray, alpha: float, s2: float) -> np.ndarray:
    """Posterior mean of a Gaussian-noised mixture of point masses, from the likelihoods directly."""
    flat = x.ravel()
    logs = [math.log(pi) - float(np.sum((flat - alpha * mu.ravel()) ** 2)) / (2 * s2) for mu, pi in zip(protos, priors)]
    top = max(logs)
    w = np.array([math.exp(v - top) for v in logs])
    mean = sum(wk * mu for wk, mu in zip(w, protos)) / w.sum()
    return (alpha * mean - x) / s2


def direct_symbol(K: int, k: np.ndarray) -> float:
    """``sum_{u in Omega} exp(i k.u)`` summed term by term (real part)."""
    k = np.atleast_1d(k)
    return float(sum(math.cos(float(np.dot(k, u))) for u in offsets(K, len(k))))


def binomial_upper_tail(successes: int, n: int) -> float:
    return sum(math.comb(n, j) for j in range(successes, n + 1)) / 2**n
