"""
Compactly supported smoothing kernels, the bandwidth rule and localization
windows used by the localized estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import integrate

from .exceptions import InvalidArgumentError

__all__ = [
    "KernelSpec",
    "Window",
    "bandwidth",
    "kernel_eval",
    "kernel_l2_squared",
    "kernel_integral",
    "localization_window",
    "uniform",
    "epanechnikov",
    "piecewise_constant",
]

_SHAPES = ("uniform", "epanechnikov", "piecewise")
_SIMPSON_PANELS = 2**14


@dataclass(frozen=True)
class KernelSpec:
    """
    Kernel with compact support ``[-c, c]``.

    Parameters
    ----------
    shape : {"uniform", "epanechnikov", "piecewise"}
        Kernel family.
    support_radius : float
        ``c``; the kernel vanishes for ``|x| >= c``.
    breakpoints, values : tuple of float
        Only for ``shape="piecewise"``: ``K(x) = values[i]`` on
        ``[breakpoints[i], breakpoints[i + 1])``.
    """

    shape: str
    support_radius: float = 1.0
    breakpoints: tuple = ()
    values: tuple = ()
    sup_bound: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.shape not in _SHAPES:
            raise InvalidArgumentError(f"unknown kernel shape {self.shape!r}")
        if not self.support_radius > 0:
            raise InvalidArgumentError("support_radius must be positive")
        if self.shape == "piecewise":
            bp = tuple(float(b) for b in self.breakpoints)
            vals = tuple(float(v) for v in self.values)
            if len(bp) < 2 or len(vals) != len(bp) - 1:
                raise InvalidArgumentError("piecewise kernel needs len(values) == len(breakpoints) - 1")
            if any(b1 >= b2 for b1, b2 in zip(bp[:-1], bp[1:])):
                raise InvalidArgumentError("breakpoints must be strictly increasing")
            if max(abs(bp[0]), abs(bp[-1])) > self.support_radius + 1e-12:
                raise InvalidArgumentError("breakpoints exceed the support radius")
            object.__setattr__(self, "breakpoints", bp)
            object.__setattr__(self, "values", vals)
        object.__setattr__(self, "sup_bound", self._grid_sup())

    @property
    def name(self) -> str:
        return self.shape

    def pieces(self):
        """Closed-form pieces ``(a, b, f)`` with ``K = f`` on the open interval ``(a, b)``."""
        c = self.support_radius
        if self.shape == "uniform":
            return [(-c, c, lambda x: np.full_like(x, 0.5 / c))]
        if self.shape == "epanechnikov":
            return [(-c, c, lambda x: 0.75 / c * (1.0 - (x / c) ** 2))]
        return [
            (a, b, lambda x, v=v: np.full_like(x, v))
            for a, b, v in zip(self.breakpoints[:-1], self.breakpoints[1:], self.values)
        ]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        c = self.support_radius
        inside = np.abs(x) < c
        if self.shape == "piecewise":
            idx = np.searchsorted(self.breakpoints, x, side="right") - 1
            ok = inside & (idx >= 0) & (idx < len(self.values))
            out[ok] = np.asarray(self.values)[idx[ok]]
            return out
        for a, b, f in self.pieces():
            m = inside & (x >= a) & (x < b)
            out[m] = f(x[m])
        return out

    def _grid_sup(self) -> float:
        grid = np.linspace(-self.support_radius, self.support_radius, 10_001)
        best = 0.0
        for a, b, f in self.pieces():
            g = grid[(grid >= a) & (grid <= b)]
            g = np.concatenate([g, [a, b]])
            best = max(best, float(np.max(np.abs(f(g)))))
        return best

    def to_dict(self) -> dict:
        d = {"shape": self.shape, "support_radius": self.support_radius}
        if self.shape == "piecewise":
            d.update(breakpoints=list(self.breakpoints), values=list(self.values))
        return d

    @classmethod
    def from_name(cls, name: str) -> "KernelSpec":
        key = name.strip().lower()
        if key in ("uniform", "u"):
            return uniform()
        if key in ("epanechnikov", "e", "epa"):
            return epanechnikov()
        raise InvalidArgumentError(f"unknown kernel {name!r}; expected 'uniform' or 'epanechnikov'")


def uniform() -> KernelSpec:
    return KernelSpec("uniform")


def epanechnikov() -> KernelSpec:
    return KernelSpec("epanechnikov")


def piecewise_constant(breakpoints, values) -> KernelSpec:
    bp = tuple(float(b) for b in breakpoints)
    c = max(abs(bp[0]), abs(bp[-1]))
    return KernelSpec("piecewise", support_radius=c, breakpoints=bp, values=tuple(values))


def kernel_eval(k: KernelSpec, x: float) -> float:
    """Value of the kernel at a single point; exactly 0 outside ``(-c, c)``."""
    return float(k(np.asarray([x], dtype=float))[0])


def _simpson_pieces(k: KernelSpec, power: int) -> float:
    pieces = k.pieces()
    total_len = sum(b - a for a, b, _ in pieces)
    acc = 0.0
    for a, b, f in pieces:
        m = max(2, int(round(_SIMPSON_PANELS * (b - a) / total_len)))
        m += m % 2
        x = np.linspace(a, b, m + 1)
        acc += integrate.simpson(f(x) ** power, x=x)
    return float(acc)


def kernel_integral(k: KernelSpec) -> float:
    """Composite Simpson quadrature of ``K`` with panels aligned to breakpoints."""
    return _simpson_pieces(k, 1)


def kernel_l2_squared(k: KernelSpec) -> float:
    """``∫ K(x)^2 dx`` by adaptive quadrature on each smooth piece."""
    acc = 0.0
    for a, b, f in k.pieces():
        val, _ = integrate.quad(lambda x: float(f(np.asarray(x, dtype=float))) ** 2, a, b,
                                epsabs=1e-13, epsrel=1e-13)
        acc += val
    return acc


def bandwidth(n: int, lam: float = 0.35) -> float:
    """``h_n = n ** (-lam)``."""
    if n < 2:
        raise InvalidArgumentError(f"bandwidth needs n >= 2, got {n}")
    if not 0.0 < lam < 1.0:
        raise InvalidArgumentError("bandwidth exponent must lie in (0, 1)")
    return float(n) ** (-lam)


class Window(NamedTuple):
    """Inclusive 1-based index range ``i_n..j_n`` of a localization window."""

    i_n: int
    j_n: int
    boundary: bool = False

    @property
    def size(self) -> int:
        return self.j_n - self.i_n + 1


def localization_window(n: int, u: float, h: float, c: float = 1.0) -> Window:
    """
    Indices ``[floor(n(u - c h)), floor(n(u + c h))]`` clamped to ``[1, n]``.

    ``boundary`` is set when either end had to be clamped.
    """
    if h <= 0:
        raise InvalidArgumentError("bandwidth must be positive")
    lo = math.floor(n * (u - c * h) + 1e-9)
    hi = math.floor(n * (u + c * h) + 1e-9)
    boundary = lo < 1 or hi > n
    i_n = min(max(1, lo), n)
    j_n = min(max(i_n, hi), n)
    return Window(int(i_n), int(j_n), bool(boundary))
