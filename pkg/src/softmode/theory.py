"""Closed-form Ginzburg-Landau coefficients of the local patch model.

Three mass conventions coexist because the linear friction term enters the
mass with different signs depending on which drift is linearized:

==============  =============================================
convention      r(t)
==============  =============================================
main-text       1/2 + 1/sigma^2 - alpha^2 |Omega| / sigma^4
tree-level            1/sigma^2 - alpha^2 |Omega| / sigma^4
reverse-flow   -1/2 + 1/sigma^2 - alpha^2 |Omega| / sigma^4
==============  =============================================

``|Omega| = (2K+1)^d`` is the patch size. Stiffness and quartic coefficient
do not depend on the convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import NoTransitionError, ParameterError, SingularNoiseError
from .schedule import VPSchedule
from .scores import PrototypeSet

MASS_CONVENTIONS = ("main-text", "tree-level", "reverse-flow")
_FRICTION = {"main-text": 0.5, "tree-level": 0.0, "reverse-flow": -0.5}


def _check_convention(convention: str) -> float:
    try:
        return _FRICTION[convention]
    except KeyError:
        raise ParameterError(f"unknown mass convention {convention!r}") from None


def _levels(schedule: VPSchedule, t):
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise SingularNoiseError("closed forms are singular at t <= 0")
    return schedule.alpha2(t), schedule.sigma2(t)


def patch_size(K: int, d: int) -> int:
    return (2 * K + 1) ** d


def stiffness_constant(K: int, d: int) -> float:
    """Geometric factor ``K(K+1)/6 (2K+1)^d`` multiplying ``alpha^2/sigma^4`` in kappa."""
    return K * (K + 1) / 6 * patch_size(K, d)


def mass(K: int, d: int, schedule: VPSchedule, t, convention: str = "tree-level"):
    friction = _check_convention(convention)
    a2, s2 = _levels(schedule, t)
    return friction + 1.0 / s2 - a2 * patch_size(K, d) / s2**2


@dataclass(frozen=True)
class GLCoefficients:
    t: float
    r: float
    kappa: float
    u: float
    convention: str


def gl_coefficients(K: int, d: int, schedule: VPSchedule, t: float, convention: str = "tree-level") -> GLCoefficients:
    a2, s2 = _levels(schedule, t)
    omega = patch_size(K, d)
    r = float(mass(K, d, schedule, t, convention))
    kappa = float(a2 / s2**2 * stiffness_constant(K, d))
    u = float(a2**2 / (3 * s2**4) * omega**3)
    return GLCoefficients(float(t), r, kappa, u, convention)


def critical_time(K: int, d: int, schedule: VPSchedule, convention: str = "tree-level") -> float:
    """Time at which ``r(t)`` vanishes.

    Tree level has the closed form ``log(1 + |Omega|) / beta``. Otherwise
    ``sigma^4 r = c s^2 + (1 + |Omega|) s - |Omega|`` with ``s = sigma^2`` is
    root-bracketed on ``(0, 1)`` and mapped back through ``t = -log(1 - s) / beta``.
    """
    friction = _check_convention(convention)
    if not schedule.is_constant:
        raise ParameterError("critical_time needs a constant-rate schedule")
    omega = patch_size(K, d)
    if friction == 0.0:
        return float(np.log1p(omega) / schedule.beta)

    def f(s):
        return friction * s * s + (1 + omega) * s - omega

    lo, hi = 1e-300, 1.0 - 1e-16
    if np.sign(f(lo)) == np.sign(f(hi)):
        raise NoTransitionError(f"r(t) keeps one sign under the {convention} convention")
    s = brentq(f, lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps)
    return float(-np.log1p(-s) / schedule.beta)


def critical_times(K: int, d: int, schedule: VPSchedule) -> dict[str, float]:
    return {c: critical_time(K, d, schedule, c) for c in MASS_CONVENTIONS}


def effective_mass(coeffs: GLCoefficients, delta_x_var: float) -> float:
    """Fluctuation-shifted mass ``r + 3 u <dx^2>``."""
    if delta_x_var < 0:
        raise ParameterError("fluctuation variance must be non-negative")
    return coeffs.r + 3.0 * coeffs.u * delta_x_var


def prototype_jacobian(prototypes: PrototypeSet, schedule: VPSchedule, t: float, as_written: bool = True) -> np.ndarray:
    """Dense ``J(0,t) = -(1/2 + 1/sigma^2) I + c(t) C`` with ``C = sum_m mu_m mu_m^T``.

    ``as_written`` uses ``c = 1/sigma^4``; otherwise ``c = alpha^2/sigma^4``,
    which is what the exact empirical score produces.
    """
    a2, s2 = (float(v) for v in _levels(schedule, t))
    C = prototypes.second_moment()
    coupling = (1.0 if as_written else a2) / s2**2
    return -(0.5 + 1.0 / s2) * np.eye(len(C)) + coupling * C


def prototype_jacobian_spectrum(prototypes: PrototypeSet, schedule: VPSchedule, t: float, as_written: bool = True) -> np.ndarray:
    """Sorted eigenvalues of :func:`prototype_jacobian`, obtained from the spectrum of ``C``."""
    a2, s2 = (float(v) for v in _levels(schedule, t))
    flat = prototypes.flat
    # nonzero spectrum of C = F^T F equals that of the small Gram matrix F F^T
    gram_eigs = np.clip(np.linalg.eigvalsh(flat @ flat.T), 0.0, None)
    n = flat.shape[1]
    c_eigs = np.zeros(n)
    c_eigs[: len(gram_eigs)] = gram_eigs[::-1][:n]
    coupling = (1.0 if as_written else a2) / s2**2
    return np.sort(-(0.5 + 1.0 / s2) + coupling * c_eigs)


def two_prototype_r(schedule: VPSchedule, t, mu_norm2: float):
    """Reduced mass ``(sigma^2 + 2) / (2 sigma^2) - |mu|^2 / sigma^4`` of the +-mu pair."""
    _, s2 = _levels(schedule, t)
    return (s2 + 2) / (2 * s2) - mu_norm2 / s2**2


def theory_table(K: int, d: int, schedule: VPSchedule, times, convention: str = "tree-level", variances=None):
    """Rows ``(t, r, kappa, u, r_eff)``; ``r_eff = r`` where no variance is supplied."""
    times = np.asarray(times, dtype=float)
    variances = np.zeros_like(times) if variances is None else np.asarray(variances, dtype=float)
    rows = []
    for t, var in zip(times, variances):
        c = gl_coefficients(K, d, schedule, t, convention)
        rows.append((t, c.r, c.kappa, c.u, effective_mass(c, var)))
    return np.array(rows)
