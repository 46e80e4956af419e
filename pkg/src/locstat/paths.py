"""
Deterministic parameter curves ``u -> theta(u)`` on ``[0, 1]``.

Curves given in config files use a tiny grammar, one expression per
component::

    0.3
    0.1 + 0.4*u
    1 + 0.5*sin(5*u)
    0.1 + 0.4*cos(4*u)^2
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .exceptions import ConfigError, InvalidArgumentError

__all__ = ["PathExpr", "ParameterPath", "parse_expr", "constant_path"]

_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_PATTERNS = [
    ("const", re.compile(rf"^({_NUM})$")),
    ("linear", re.compile(rf"^({_NUM})([-+])({_NUM})?\*?u$")),
    ("sin", re.compile(rf"^({_NUM})([-+])({_NUM})?\*?sin\(({_NUM})\*?u\)$")),
    ("cos2", re.compile(rf"^({_NUM})([-+])({_NUM})?\*?cos\(({_NUM})\*?u\)(?:\^2|\*\*2)$")),
]


@dataclass(frozen=True)
class PathExpr:
    """One grammar expression ``a + b * g(k u)``."""

    kind: str
    a: float
    b: float = 0.0
    k: float = 0.0

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "const":
            return np.full_like(u, self.a)
        if self.kind == "linear":
            return self.a + self.b * u
        if self.kind == "sin":
            return self.a + self.b * np.sin(self.k * u)
        return self.a + self.b * np.cos(self.k * u) ** 2

    @property
    def lipschitz(self) -> float:
        if self.kind == "const":
            return 0.0
        if self.kind == "linear":
            return abs(self.b)
        # d/du cos^2(ku) = -k sin(2ku)
        return abs(self.b * self.k)

    def __str__(self):
        if self.kind == "const":
            return repr(self.a)
        if self.kind == "linear":
            return f"{self.a!r}+{self.b!r}*u"
        if self.kind == "sin":
            return f"{self.a!r}+{self.b!r}*sin({self.k!r}*u)"
        return f"{self.a!r}+{self.b!r}*cos({self.k!r}*u)^2"


def parse_expr(text) -> PathExpr:
    """Parse one component expression of the config grammar."""
    if isinstance(text, (int, float)):
        return PathExpr("const", float(text))
    if isinstance(text, PathExpr):
        return text
    s = re.sub(r"\s+", "", str(text))
    for kind, pat in _PATTERNS:
        m = pat.match(s)
        if not m:
            continue
        g = m.groups()
        a = float(g[0])
        if kind == "const":
            return PathExpr("const", a)
        b = float(g[2]) if g[2] is not None else 1.0
        if g[1] == "-":
            b = -b
        k = float(g[3]) if kind in ("sin", "cos2") else 0.0
        return PathExpr(kind, a, b, k)
    raise ConfigError(f"cannot parse path expression {text!r}")


class ParameterPath:
    """
    Curve ``u -> theta(u) in R^d`` with Hölder metadata.

    Parameters
    ----------
    components : sequence
        One entry per coordinate: a grammar string, a number, a
        :class:`PathExpr` or a vectorized callable of ``u``.
    holder_rho : float, default 1.0
    holder_K : float, optional
        Computed from the expressions when all components are grammar
        expressions; required otherwise.
    names : sequence of str, optional
    """

    def __init__(self, components: Sequence, holder_rho: float = 1.0,
                 holder_K: float | None = None, names: Sequence[str] | None = None):
        if len(components) == 0:
            raise InvalidArgumentError("a parameter path needs at least one component")
        funcs: list[Callable] = []
        exprs: list[PathExpr | None] = []
        for c in components:
            if callable(c) and not isinstance(c, PathExpr):
                funcs.append(c)
                exprs.append(None)
            else:
                e = parse_expr(c)
                funcs.append(e)
                exprs.append(e)
        self._funcs = funcs
        self.exprs = tuple(exprs)
        if not 0.0 < holder_rho <= 1.0:
            raise InvalidArgumentError("holder_rho must lie in (0, 1]")
        self.holder_rho = float(holder_rho)
        if holder_K is None:
            if any(e is None for e in exprs):
                holder_K = float("nan")
            else:
                holder_K = max(e.lipschitz for e in exprs)
        self.holder_K = float(holder_K)
        self.names = tuple(names) if names is not None else tuple(f"theta_{i + 1}" for i in range(len(funcs)))

    @property
    def dim(self) -> int:
        return len(self._funcs)

    def eval(self, u):
        """``theta(u)``; scalar ``u`` gives shape ``(d,)``, array ``u`` gives ``(len(u), d)``."""
        arr = np.asarray(u, dtype=float)
        cols = [np.broadcast_to(np.asarray(f(arr), dtype=float), arr.shape) for f in self._funcs]
        out = np.stack(cols, axis=-1)
        return out

    __call__ = eval

    def on_grid(self, n: int):
        """``theta_t = theta(t / n)`` for ``t = 1..n`` as an ``(n, d)`` array."""
        return self.eval(np.arange(1, n + 1) / n)

    def is_constant(self) -> bool:
        return all(e is not None and e.kind == "const" for e in self.exprs)

    def to_list(self):
        if any(e is None for e in self.exprs):
            raise InvalidArgumentError("callable components cannot be serialized")
        return [str(e) for e in self.exprs]

    def frozen_at(self, u: float) -> "ParameterPath":
        """Constant path equal to ``theta(u)`` everywhere."""
        return constant_path(self.eval(u), names=self.names)

    def __repr__(self):
        try:
            body = ", ".join(self.to_list())
        except InvalidArgumentError:
            body = f"<{self.dim} callables>"
        return f"ParameterPath([{body}])"


def constant_path(theta, names=None) -> ParameterPath:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    return ParameterPath([PathExpr("const", float(v)) for v in theta], names=names)
