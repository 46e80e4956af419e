"""
Innovation distributions and the random number contract.

Every stream is a Philox counter-based generator keyed by
``SeedSequence(entropy=seed, spawn_key=stream)``, so replication ``r`` of a
Monte Carlo run always reads the same numbers whatever happens to the other
replications.  Continuous innovations are produced by inverse-CDF from open
uniforms ``(k + 1/2) 2**-53``; Poisson counts use inversion for intensities
below 10 and PTRS (transformed rejection with squeeze) above.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .exceptions import InvalidArgumentError

__all__ = [
    "InnovationSpec",
    "gaussian",
    "uniform_sym",
    "custom",
    "make_rng",
    "open_uniform",
    "poisson_sample",
]

_NORM_ORDERS = (1, 2, 4, 8)
_POISSON_INVERSION_LIMIT = 10.0


def make_rng(seed: int, stream=()) -> np.random.Generator:
    """Philox generator for ``seed`` and an integer tuple ``stream``."""
    if isinstance(stream, (int, np.integer)):
        stream = (int(stream),)
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


def open_uniform(rng: np.random.Generator, size) -> np.ndarray:
    """Uniforms on the open interval (0, 1)."""
    return rng.random(size) + 2.0**-54


@dataclass(frozen=True)
class InnovationSpec:
    """
    Distribution of the i.i.d. innovations ``xi_t``.

    Parameters
    ----------
    family : {"gaussian", "uniform", "custom"}
    scale : float
        Standard deviation for ``gaussian``, half-width for ``uniform``.
    probs, quantiles : tuple of float
        Inverse-CDF table for ``custom``; linear interpolation in between.
    """

    family: str = "gaussian"
    scale: float = 1.0
    probs: tuple = ()
    quantiles: tuple = ()
    moment_norms: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.family not in ("gaussian", "uniform", "custom"):
            raise InvalidArgumentError(f"unknown innovation family {self.family!r}")
        if not self.scale > 0:
            raise InvalidArgumentError("innovation scale must be positive")
        if self.family == "custom":
            p = np.asarray(self.probs, dtype=float)
            q = np.asarray(self.quantiles, dtype=float)
            if p.size < 2 or p.size != q.size or np.any(np.diff(p) <= 0) or np.any(np.diff(q) < 0):
                raise InvalidArgumentError("custom inverse-CDF table must be increasing and of equal length")
            if p[0] < 0 or p[-1] > 1:
                raise InvalidArgumentError("custom probabilities must lie in [0, 1]")
            object.__setattr__(self, "probs", tuple(p))
            object.__setattr__(self, "quantiles", tuple(q))
        object.__setattr__(self, "moment_norms", {p: self._norm(p) for p in _NORM_ORDERS})

    def _norm(self, p: float) -> float:
        if self.family == "gaussian":
            abs_moment = 2.0 ** (p / 2) * math.gamma((p + 1) / 2) / math.sqrt(math.pi)
            return self.scale * abs_moment ** (1.0 / p)
        if self.family == "uniform":
            return self.scale * (1.0 / (p + 1)) ** (1.0 / p)
        draws = self.ppf(open_uniform(make_rng(20_220_919), 10**6))
        return float(np.mean(np.abs(draws) ** p) ** (1.0 / p))

    def norm(self, p: float) -> float:
        """``||xi_0||_p``."""
        if p in self.moment_norms:
            return self.moment_norms[p]
        return self._norm(p)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        if self.family == "gaussian":
            return self.scale * special.ndtri(u)
        if self.family == "uniform":
            return self.scale * (2.0 * u - 1.0)
        return np.interp(u, self.probs, self.quantiles)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return self.ppf(open_uniform(rng, size))

    def to_dict(self) -> dict:
        d = {"family": self.family, "scale": self.scale}
        if self.family == "custom":
            d.update(probs=list(self.probs), quantiles=list(self.quantiles))
        return d

    @classmethod
    def from_config(cls, obj) -> "InnovationSpec":
        if obj is None:
            return gaussian()
        if isinstance(obj, InnovationSpec):
            return obj
        if isinstance(obj, str):
            key = obj.lower()
            if key in ("gaussian", "normal"):
                return gaussian()
            if key in ("uniform", "uniform_sym"):
                return uniform_sym()
            raise InvalidArgumentError(f"unknown innovation family {obj!r}")
        obj = dict(obj)
        fam = obj.pop("family", "gaussian").lower()
        if fam in ("normal",):
            fam = "gaussian"
        if fam == "uniform_sym":
            fam = "uniform"
        if "half_width" in obj:
            obj["scale"] = obj.pop("half_width")
        if "sigma" in obj:
            obj["scale"] = obj.pop("sigma")
        if fam == "uniform":
            obj.setdefault("scale", math.sqrt(3.0))
        return cls(fam, **obj)


def gaussian(sigma: float = 1.0) -> InnovationSpec:
    return InnovationSpec("gaussian", sigma)


def uniform_sym(half_width: float = math.sqrt(3.0)) -> InnovationSpec:
    """Uniform on ``[-half_width, half_width]``; the default has unit variance."""
    return InnovationSpec("uniform", half_width)


def custom(probs, quantiles) -> InnovationSpec:
    return InnovationSpec("custom", 1.0, tuple(probs), tuple(quantiles))


def _poisson_inversion(lam, u):
    k = np.zeros(lam.shape, dtype=np.int64)
    p = np.exp(-lam)
    cdf = p.copy()
    active = u > cdf
    step = 0
    while np.any(active) and step < 200:
        step += 1
        k[active] += 1
        p[active] *= lam[active] / k[active]
        cdf[active] += p[active]
        active &= u > cdf
    return k


def _poisson_ptrs(lam, rng):
    # Hörmann (1993), same constants as the reference transformed rejection sampler
    slam = np.sqrt(lam)
    loglam = np.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    out = np.zeros(lam.shape, dtype=np.int64)
    pending = np.arange(lam.size)
    while pending.size:
        uu = open_uniform(rng, pending.size) - 0.5
        vv = open_uniform(rng, pending.size)
        us = 0.5 - np.abs(uu)
        aa, bb = a[pending], b[pending]
        k = np.floor((2.0 * aa / us + bb) * uu + lam[pending] + 0.43)
        accept = (us >= 0.07) & (vv <= vr[pending])
        reject = (k < 0) | ((us < 0.013) & (vv > us))
        kk = np.maximum(k, 0.0)
        lhs = np.log(vv) + np.log(invalpha[pending]) - np.log(aa / (us * us) + bb)
        rhs = -lam[pending] + kk * loglam[pending] - special.gammaln(kk + 1.0)
        accept |= ~reject & (lhs <= rhs)
        out[pending[accept]] = k[accept].astype(np.int64)
        pending = pending[~accept]
    return out


def poisson_sample(lam, rng: np.random.Generator) -> np.ndarray:
    """Poisson counts with intensities ``lam`` (any shape) from ``rng``."""
    lam = np.asarray(lam, dtype=float)
    shape = lam.shape
    flat = lam.ravel()
    if np.any(~np.isfinite(flat)) or np.any(flat < 0):
        raise InvalidArgumentError("Poisson intensity must be finite and nonnegative")
    out = np.zeros(flat.shape, dtype=np.int64)
    small = flat < _POISSON_INVERSION_LIMIT
    u = open_uniform(rng, flat.size)
    if np.any(small):
        out[small] = _poisson_inversion(flat[small], u[small])
    if np.any(~small):
        out[~small] = _poisson_ptrs(flat[~small], rng)
    return out.reshape(shape)
