"""
Contrast functions and the conditional-moment recursions they need.

This module is the reference implementation: every recursion runs forward
from ``t = 1`` over the whole observed past with zero (or intercept)
initialization, using :func:`scipy.signal.lfilter` for the linear ones and
direct sums for power-law lag weights.  The compiled objective used by the
optimizer is checked against it in the test-suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import signal

from .exceptions import InvalidArgumentError
from .models import Family, parse_family

__all__ = [
    "ContrastSpec",
    "ConditionalMoments",
    "CONTRAST_NAMES",
    "cond_moments",
    "contrast_ls",
    "contrast_lav",
    "contrast_gqmle",
    "contrast_larch",
    "contrast_poisson",
    "gqmle_value",
    "poisson_value",
    "contrast_series",
    "power_lag_sums",
    "default_contrast",
]

CONTRAST_NAMES = ("ls", "lav", "gqmle", "larch-ls", "poisson-qmle")
_MOMENT_ORDER = {"ls": 2, "lav": 1, "gqmle": 3, "larch-ls": 4, "poisson-qmle": 2}
_COMPATIBLE = {
    "ls": ("tvar1",),
    "lav": ("tvar1",),
    "gqmle": ("tvar1-scale", "tvarinf", "tvarma", "tvarchinf", "tvgarch", "tvarmagarch"),
    "larch-ls": ("tvlarchinf", "tvglarch"),
    "poisson-qmle": ("tvingarch", "tvingarch-thr"),
}
_ALIASES = {
    "least-squares": "ls",
    "lse": "ls",
    "least-absolute-value": "lav",
    "qmle": "gqmle",
    "gaussian-qmle": "gqmle",
    "larch": "larch-ls",
    "larchls": "larch-ls",
    "poisson": "poisson-qmle",
    "pqmle": "poisson-qmle",
}


@dataclass(frozen=True)
class ContrastSpec:
    """
    Contrast ``kind`` scoring data from ``family``.

    ``variance_floor`` bounds ``M_t**2`` (Gaussian QMLE) and ``lambda_t``
    (Poisson QMLE) from below; every application of the floor is counted.
    """

    kind: str
    family: Family
    variance_floor: float = 1e-8

    def __post_init__(self):
        kind = _ALIASES.get(str(self.kind).lower(), str(self.kind).lower())
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "family", parse_family(self.family))
        if kind not in CONTRAST_NAMES:
            raise InvalidArgumentError(f"unknown contrast {self.kind!r}; choose from {CONTRAST_NAMES}")
        if self.family.kind not in _COMPATIBLE[kind]:
            raise InvalidArgumentError(
                f"contrast {kind!r} does not score {self.family}; it needs one of {_COMPATIBLE[kind]}")
        if not self.variance_floor > 0:
            raise InvalidArgumentError("variance_floor must be positive")

    @property
    def moment_order(self) -> int:
        return _MOMENT_ORDER[self.kind]

    @property
    def smooth(self) -> bool:
        """False for LAV, which has no derivative in theta."""
        return self.kind != "lav"


def default_contrast(family) -> str:
    family = parse_family(family)
    for kind, fams in _COMPATIBLE.items():
        if family.kind in fams:
            return kind
    raise InvalidArgumentError(f"no contrast for {family}")  # pragma: no cover


class ConditionalMoments(NamedTuple):
    """``f_t`` and ``M_t`` (or ``lambda_t`` for count models) at one time point."""

    mean: float
    scale: float
    intensity: float | None = None
    floored: bool = False


def contrast_ls(x1, x2, theta):
    """``(x1 - theta x2)**2``."""
    return (np.asarray(x1, float) - theta * np.asarray(x2, float)) ** 2


def contrast_lav(x1, x2, theta):
    """``|x1 - theta x2|``; not differentiable where the residual vanishes."""
    return np.abs(np.asarray(x1, float) - theta * np.asarray(x2, float))


def gqmle_value(x, f, m2):
    """``log M^2 + (x - f)^2 / M^2``."""
    return np.log(m2) + (x - f) ** 2 / m2


def poisson_value(x, lam):
    """``lambda - x log lambda``."""
    return lam - x * np.log(lam)


def power_lag_sums(y, exponent, truncation_lag=None):
    """
    ``S_t = sum_{j=1}^{min(t-1, L)} j**-exponent * y_{t-j}`` for ``t = 1..n``.

    Direct summation, O(n^2).
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    if n == 0:
        return np.zeros(0)
    w = np.arange(1, n, dtype=float) ** (-exponent)
    if truncation_lag is not None:
        w[truncation_lag:] = 0.0
    full = np.convolve(y, np.concatenate([[0.0], w]))[:n]
    return full


def _garch_variance(theta_c0, c, d, e2):
    # sigma2_t - sum d_j sigma2_{t-j} = c0 + sum c_i e2_{t-i}, zero start
    drive = theta_c0 + signal.lfilter(np.concatenate([[0.0], c]), [1.0], e2)
    return signal.lfilter([1.0], np.concatenate([[1.0], -np.asarray(d)]), drive)


def _arma_residuals(x, phi, psi, scale=1.0):
    # scale * r_t + sum psi_j r_{t-j} = x_t + sum phi_i x_{t-i}
    y = signal.lfilter(np.concatenate([[1.0], phi]), [1.0], x)
    return signal.lfilter([1.0], np.concatenate([[scale], psi]), y)


def contrast_series(spec: ContrastSpec, theta, x, truncation_lag=None):
    """
    Contrast values ``Phi_t`` for ``t = 1..len(x)`` at a fixed ``theta``.

    Returns
    -------
    phi : ndarray
    n_floor : ndarray of bool
        Where the variance / intensity floor was applied.
    """
    fam = spec.family
    th = np.asarray(theta, dtype=float)
    x = np.asarray(x, dtype=float)
    n = x.size
    xlag = np.concatenate([[0.0], x[:-1]])
    floor = spec.variance_floor
    k = fam.kind
    fl = np.zeros(n, dtype=bool)

    if spec.kind == "ls":
        return contrast_ls(x, xlag, th[0]), fl
    if spec.kind == "lav":
        return contrast_lav(x, xlag, th[0]), fl

    if spec.kind == "gqmle":
        if k == "tvar1-scale":
            f = th[0] * xlag
            m2 = np.full(n, th[1] ** 2)
        elif k == "tvarinf":
            f = th[0] * power_lag_sums(x, th[1], truncation_lag)
            m2 = np.full(n, th[2] ** 2)
        elif k == "tvarma":
            p, q = fam.p, fam.q
            sig = th[p + q]
            xi = _arma_residuals(x, th[:p], th[p:p + q], sig)
            f = x - sig * xi
            m2 = np.full(n, sig**2)
        elif k == "tvarchinf":
            f = np.zeros(n)
            m2 = th[0] + th[1] * power_lag_sums(x * x, th[2], truncation_lag)
        elif k == "tvgarch":
            p, q = fam.p, fam.q
            f = np.zeros(n)
            m2 = _garch_variance(th[0], th[1:1 + p], th[1 + p:1 + p + q], x * x)
        else:
            p, q, gp, gq = fam.p, fam.q, fam.p2, fam.q2
            eps = _arma_residuals(x, th[:p], th[p:p + q])
            f = x - eps
            o = p + q
            m2 = _garch_variance(th[o], th[o + 1:o + 1 + gp], th[o + 1 + gp:o + 1 + gp + gq], eps * eps)
        fl = m2 < floor
        m2 = np.where(fl, floor, m2)
        return gqmle_value(x, f, m2), fl

    if spec.kind == "larch-ls":
        if k == "tvlarchinf":
            lvl = th[0] + th[1] * power_lag_sums(x, th[2], truncation_lag)
        else:
            p, q = fam.p, fam.q
            lvl = _garch_variance(th[0], th[1:1 + p], th[1 + p:1 + p + q], x)
        return (x * x - lvl * lvl) ** 2, fl

    lam = _intensity(fam, th, x, floor)
    fl = lam[1]
    return poisson_value(x, lam[0]), fl


def _intensity(fam, th, x, floor):
    n = x.size
    p, q = fam.p, fam.q
    a0 = th[0]
    if fam.kind == "tvingarch":
        a, b = th[1:1 + p], th[1 + p:1 + p + q]
        drive = a0 + signal.lfilter(np.concatenate([[0.0], a]), [1.0], x)
        den = np.concatenate([[1.0], -b])
        if q:
            zi = signal.lfiltic([1.0], den, y=np.full(q, a0))
            lam = signal.lfilter([1.0], den, drive, zi=zi)[0]
        else:
            lam = drive
        fl = lam < floor
        return np.where(fl, floor, lam), fl
    # threshold recursion is nonlinear once floored: plain loop
    ell = fam.ell
    a = th[1:1 + p]
    b = th[1 + p:1 + p + q]
    c = th[1 + p + q:1 + p + 2 * q]
    lam = np.zeros(n)
    fl = np.zeros(n, dtype=bool)
    for t in range(n):
        v = a0
        for i in range(1, p + 1):
            v += a[i - 1] * (lam[t - i] if t - i >= 0 else a0)
        for j in range(1, q + 1):
            if t - j >= 0:
                v += b[j - 1] * max(x[t - j] - ell, 0.0) - c[j - 1] * min(x[t - j], ell)
        if v < floor:
            v = floor
            fl[t] = True
        lam[t] = v
    return lam, fl


def _as_series(x_t, past):
    past = np.asarray(past if past is not None else [], dtype=float).ravel()
    return np.concatenate([past[::-1], [float(x_t)]])


def cond_moments(spec: ContrastSpec, theta, past, truncation_lag=None) -> ConditionalMoments:
    """
    ``(f_t, M_t)`` or ``lambda_t`` given ``past = (x_{t-1}, x_{t-2}, ..., x_1)``.

    The recursion runs with fixed ``theta`` from the start of the sample, so
    latent states start at zero (intensities at the intercept).
    """
    fam = spec.family
    th = np.asarray(theta, dtype=float)
    if th.size != fam.dim:
        raise InvalidArgumentError(f"theta must have {fam.dim} entries")
    series = _as_series(0.0, past)
    floor = spec.variance_floor
    k = fam.kind
    if spec.kind in ("ls", "lav"):
        prev = series[-2] if series.size > 1 else 0.0
        return ConditionalMoments(th[0] * prev, 1.0)
    if spec.kind == "poisson-qmle":
        lam, fl = _intensity(fam, th, series, floor)
        return ConditionalMoments(float(lam[-1]), math.sqrt(lam[-1]), float(lam[-1]), bool(fl[-1]))
    if spec.kind == "larch-ls":
        if k == "tvlarchinf":
            lvl = th[0] + th[1] * power_lag_sums(series, th[2], truncation_lag)[-1]
        else:
            p, q = fam.p, fam.q
            lvl = _garch_variance(th[0], th[1:1 + p], th[1 + p:1 + p + q], series)[-1]
        return ConditionalMoments(0.0, float(abs(lvl)))
    m2, f = _gaussian_moments(spec, th, series, truncation_lag)
    floored = m2 < floor
    return ConditionalMoments(float(f), math.sqrt(max(m2, floor)), None, bool(floored))


def _gaussian_moments(spec, th, series, truncation_lag):
    # series ends with a placeholder 0 at time t; f_t and M_t^2 do not depend on it
    fam = spec.family
    k = fam.kind
    prev = series[-2] if series.size > 1 else 0.0
    if k == "tvar1-scale":
        return float(th[1] ** 2), th[0] * prev
    if k == "tvarinf":
        return float(th[2] ** 2), th[0] * power_lag_sums(series, th[1], truncation_lag)[-1]
    if k == "tvarma":
        p, q = fam.p, fam.q
        sig = th[p + q]
        xi = _arma_residuals(series, th[:p], th[p:p + q], sig)
        return float(sig**2), -sig * xi[-1]
    if k == "tvarchinf":
        return float(th[0] + th[1] * power_lag_sums(series * series, th[2], truncation_lag)[-1]), 0.0
    if k == "tvgarch":
        p, q = fam.p, fam.q
        return float(_garch_variance(th[0], th[1:1 + p], th[1 + p:1 + p + q], series * series)[-1]), 0.0
    p, q, gp, gq = fam.p, fam.q, fam.p2, fam.q2
    eps = _arma_residuals(series, th[:p], th[p:p + q])
    o = p + q
    m2 = _garch_variance(th[o], th[o + 1:o + 1 + gp], th[o + 1 + gp:o + 1 + gp + gq], eps * eps)[-1]
    return float(m2), -eps[-1]


def contrast_gqmle(spec: ContrastSpec, theta, x_t, past, truncation_lag=None):
    """``log M_t^2 + (x_t - f_t)^2 / M_t^2`` with the floor applied to ``M_t^2``."""
    if spec.kind != "gqmle":
        raise InvalidArgumentError("contrast_gqmle needs a Gaussian QMLE spec")
    phi, _ = contrast_series(spec, theta, _as_series(x_t, past), truncation_lag)
    return float(phi[-1])


def contrast_larch(spec: ContrastSpec, theta, x_t, past, truncation_lag=None):
    """``(x_t^2 - L_t^2)^2`` with ``L_t = a_0 + sum_j a_j x_{t-j}``."""
    if spec.kind != "larch-ls":
        raise InvalidArgumentError("contrast_larch needs a LARCH least-squares spec")
    phi, _ = contrast_series(spec, theta, _as_series(x_t, past), truncation_lag)
    return float(phi[-1])


def contrast_poisson(spec: ContrastSpec, theta, x_t, past):
    """``lambda_t - x_t log lambda_t`` with ``lambda_t`` floored."""
    if spec.kind != "poisson-qmle":
        raise InvalidArgumentError("contrast_poisson needs a Poisson QMLE spec")
    phi, _ = contrast_series(spec, theta, _as_series(x_t, past))
    return float(phi[-1])
