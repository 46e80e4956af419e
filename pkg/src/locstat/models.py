"""
Time-varying model families and seeded simulation of their triangular arrays.

Every family is simulated from the zero past: ``X_t = 0`` for ``t <= 0``,
with latent states (conditional variances, MA innovations) also started at
zero, except INGARCH intensities which start at the intercept.  ARMA-type
families use the single convention

    X_t = -sum_i phi_i X_{t-i} + sigma_t xi_t + sum_j psi_j xi_{t-j}
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import InvalidArgumentError, SimulationExplosion
from .innovations import (InnovationSpec, _poisson_inversion, gaussian, make_rng, poisson_sample,
                          uniform_sym)
from .paths import ParameterPath

__all__ = [
    "Family",
    "ModelSpec",
    "Trajectory",
    "parse_family",
    "simulate",
    "simulate_batch",
    "stationary_version",
    "builtin_scenario",
    "SCENARIOS",
]

X_LIMIT = 1e12
VAR_LIMIT = 1e24

_KINDS = {
    "tvar1": 0,
    "tvar1-scale": 0,
    "tvarinf": 0,
    "tvarma": 2,
    "tvarchinf": 0,
    "tvgarch": 2,
    "tvarmagarch": 4,
    "tvlarchinf": 0,
    "tvglarch": 2,
    "tvingarch": 2,
    "tvingarch-thr": 3,
}
_ALIASES = {
    "ar1": "tvar1",
    "ar1-scale": "tvar1-scale",
    "arinf": "tvarinf",
    "arma": "tvarma",
    "archinf": "tvarchinf",
    "garch": "tvgarch",
    "armagarch": "tvarmagarch",
    "larchinf": "tvlarchinf",
    "glarch": "tvglarch",
    "ingarch": "tvingarch",
    "ingarch-thr": "tvingarch-thr",
    "tvingarch-threshold": "tvingarch-thr",
    "ingarch-threshold": "tvingarch-thr",
}


@dataclass(frozen=True)
class Family:
    """
    Model family with its orders.

    ``p, q`` are the ARMA / GARCH / INGARCH orders, ``p2, q2`` the GARCH
    orders of an ARMA-GARCH model and ``ell`` the threshold of the
    threshold INGARCH model.
    """

    kind: str
    p: int = 0
    q: int = 0
    p2: int = 0
    q2: int = 0
    ell: int = 0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InvalidArgumentError(f"unknown model family {self.kind!r}")
        if min(self.p, self.q, self.p2, self.q2, self.ell) < 0:
            raise InvalidArgumentError("orders must be nonnegative")
        if self.kind in ("tvgarch", "tvglarch") and self.p < 1:
            raise InvalidArgumentError(f"{self.kind} needs p >= 1")
        if self.kind == "tvingarch" and self.p < 1:
            raise InvalidArgumentError("tvingarch needs p >= 1")
        if self.kind == "tvarmagarch" and self.p2 < 1:
            raise InvalidArgumentError("tvarmagarch needs p' >= 1")
        if self.kind == "tvingarch-thr" and (self.q < 1 or self.ell < 1):
            raise InvalidArgumentError("tvingarch-thr needs q >= 1 and a positive threshold")

    # --- layout -----------------------------------------------------------
    @property
    def param_names(self) -> tuple:
        k, p, q = self.kind, self.p, self.q
        phi = [f"phi{i}" for i in range(1, p + 1)]
        psi = [f"psi{j}" for j in range(1, q + 1)]
        if k == "tvar1":
            return ("a1",)
        if k == "tvar1-scale":
            return ("a1", "sigma")
        if k == "tvarinf":
            return ("mu", "kappa", "sigma")
        if k == "tvarma":
            return tuple(phi + psi + ["sigma"])
        if k == "tvarchinf":
            return ("c0", "c1", "p")
        if k in ("tvgarch", "tvglarch"):
            return tuple(["c0"] + [f"c{i}" for i in range(1, p + 1)] + [f"d{j}" for j in range(1, q + 1)])
        if k == "tvarmagarch":
            return tuple(phi + psi + ["c0"] + [f"c{i}" for i in range(1, self.p2 + 1)]
                         + [f"d{j}" for j in range(1, self.q2 + 1)])
        if k == "tvlarchinf":
            return ("a0", "mu", "kappa")
        if k == "tvingarch":
            return tuple(["a0"] + [f"a{i}" for i in range(1, p + 1)] + [f"b{j}" for j in range(1, q + 1)])
        return tuple(["a0"] + [f"a{i}" for i in range(1, p + 1)] + [f"b{j}" for j in range(1, q + 1)]
                     + [f"c{j}" for j in range(1, q + 1)])

    @property
    def dim(self) -> int:
        return len(self.param_names)

    @property
    def is_count(self) -> bool:
        return self.kind in ("tvingarch", "tvingarch-thr")

    @property
    def power_law(self) -> bool:
        return self.kind in ("tvarinf", "tvarchinf", "tvlarchinf")

    def index(self, name: str) -> int:
        return self.param_names.index(name)

    def intercept_index(self):
        """Index of the intercept that must stay above a positive floor, if any."""
        if self.kind in ("tvgarch", "tvarchinf"):
            return 0
        if self.kind == "tvarmagarch":
            return self.p + self.q
        if self.kind in ("tvingarch", "tvingarch-thr"):
            return 0
        return None

    def nonnegative_indices(self) -> tuple:
        k = self.kind
        if k in ("tvgarch", "tvingarch", "tvingarch-thr"):
            return tuple(range(self.dim))
        if k == "tvarchinf":
            return (0, 1)
        if k == "tvarmagarch":
            return tuple(range(self.p + self.q, self.dim))
        if k in ("tvlarchinf", "tvglarch"):
            return (0,)
        return ()

    def scale_index(self):
        if self.kind in ("tvar1-scale", "tvarinf", "tvarma"):
            return self.dim - 1
        return None

    def default_bounds(self):
        """Natural parameter box shrunk by 1e-3 away from non-identifiable edges."""
        lo, hi = [], []
        for name in self.param_names:
            if self.kind in ("tvar1", "tvar1-scale") and name == "a1":
                lo.append(-0.99), hi.append(0.99)
            elif name == "sigma":
                lo.append(1e-3), hi.append(10.0)
            elif name in ("mu",):
                lo.append(-0.999), hi.append(0.999)
            elif name in ("kappa", "p"):
                lo.append(1.001), hi.append(6.0)
            elif name.startswith(("phi", "psi")):
                lo.append(-0.999), hi.append(0.999)
            elif name in ("c0",) and self.kind == "tvglarch":
                lo.append(0.0), hi.append(5.0)
            elif name == "a0" and self.kind == "tvlarchinf":
                lo.append(0.0), hi.append(5.0)
            elif name == "c0":
                lo.append(1e-6), hi.append(5.0)
            elif name == "a0":
                lo.append(1e-3), hi.append(10.0)
            elif self.kind == "tvglarch":
                lo.append(-0.999), hi.append(0.999)
            else:
                lo.append(0.0), hi.append(0.999)
        return np.array(lo), np.array(hi)

    @property
    def orders(self) -> np.ndarray:
        return np.array([self.p, self.q, self.p2, self.q2, self.ell], dtype=np.int64)

    def __str__(self):
        k = self.kind
        if k in ("tvarma", "tvgarch", "tvglarch", "tvingarch"):
            return f"{k}({self.p},{self.q})"
        if k == "tvarmagarch":
            return f"{k}({self.p},{self.q},{self.p2},{self.q2})"
        if k == "tvingarch-thr":
            return f"{k}({self.p},{self.q},{self.ell})"
        return k


def parse_family(text) -> Family:
    """Parse ``"tvgarch(1,1)"``, ``"tvar1"``, ``"ingarch(1,0)"`` and the like."""
    if isinstance(text, Family):
        return text
    s = re.sub(r"\s+", "", str(text)).lower()
    m = re.fullmatch(r"([a-z0-9\-]+)(?:\(([\d,]*)\))?", s)
    if not m:
        raise InvalidArgumentError(f"cannot parse family {text!r}")
    kind = _ALIASES.get(m.group(1), m.group(1))
    if kind not in _KINDS:
        raise InvalidArgumentError(f"unknown model family {text!r}")
    args = [int(a) for a in m.group(2).split(",") if a] if m.group(2) else []
    need = _KINDS[kind]
    if len(args) != need:
        raise InvalidArgumentError(f"{kind} takes {need} orders, got {len(args)}")
    if kind in ("tvarma", "tvgarch", "tvglarch", "tvingarch"):
        return Family(kind, p=args[0], q=args[1])
    if kind == "tvarmagarch":
        return Family(kind, p=args[0], q=args[1], p2=args[2], q2=args[3])
    if kind == "tvingarch-thr":
        return Family(kind, p=args[0], q=args[1], ell=args[2])
    return Family(kind)


@dataclass(frozen=True)
class ModelSpec:
    """Family, parameter curve and innovation law of a locally stationary model."""

    family: Family
    path: ParameterPath
    innovations: InnovationSpec = field(default_factory=gaussian)
    truncation_lag: int | None = None
    intercept_floor: float = 1e-8
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "family", parse_family(self.family))
        if self.path.dim != self.family.dim:
            raise InvalidArgumentError(
                f"{self.family} needs {self.family.dim} parameters {self.family.param_names}, "
                f"path has {self.path.dim}")
        if self.truncation_lag is not None and self.truncation_lag < 1:
            raise InvalidArgumentError("truncation_lag must be a positive integer")
        self.check_signs()

    def check_signs(self, n_grid: int = 1000):
        grid = self.path.eval(np.linspace(0.0, 1.0, n_grid))
        if not np.all(np.isfinite(grid)):
            raise InvalidArgumentError("parameter path is not finite on [0, 1]")
        for i in self.family.nonnegative_indices():
            if np.any(grid[:, i] < 0):
                raise InvalidArgumentError(f"{self.family.param_names[i]} must be nonnegative on [0, 1]")
        i0 = self.family.intercept_index()
        if i0 is not None and np.any(grid[:, i0] < self.intercept_floor):
            raise InvalidArgumentError(
                f"intercept {self.family.param_names[i0]} falls below the floor {self.intercept_floor}")
        si = self.family.scale_index()
        if si is not None and np.any(grid[:, si] <= 0):
            raise InvalidArgumentError("scale parameter sigma must be positive")

    @property
    def param_names(self):
        return self.family.param_names

    def theta(self, u):
        return self.path.eval(u)

    def frozen(self, u: float) -> "ModelSpec":
        """Same model with the parameter frozen at ``theta(u)``."""
        return replace(self, path=self.path.frozen_at(u))


@dataclass
class Trajectory:
    """Simulated or observed series ``x_1..x_n``."""

    values: np.ndarray
    aux: np.ndarray | None = None
    seed: int | None = None
    aux_name: str | None = None
    model: ModelSpec | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1:
            raise InvalidArgumentError("trajectory values must be one-dimensional")

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    def __len__(self):
        return self.n


def _innovations_for(model, n_total, rng, batch):
    shape = (batch, n_total)
    return model.innovations.sample(rng, shape)


def _check(t, x, var=None):
    bad = ~np.isfinite(x) | (np.abs(x) > X_LIMIT)
    if var is not None:
        bad |= ~np.isfinite(var) | (var > VAR_LIMIT)
    if np.any(bad):
        raise SimulationExplosion(t)


def _power_weights(exponent, m):
    return np.arange(1, m + 1, dtype=float) ** (-exponent)


def simulate_batch(model: ModelSpec, thetas: np.ndarray, xi=None, rng=None, uniforms=None,
                   batch: int = 1):
    """
    Run the family recursion for ``T = len(thetas)`` steps on a batch.

    Parameters
    ----------
    thetas : ndarray of shape (T, d)
        Parameter at each step.
    xi : ndarray of shape (B, T), optional
        Innovations for continuous families.  Drawn from ``rng`` when absent.
    uniforms : ndarray of shape (B, T), optional
        Count families only: drive Poisson draws by inversion of these
        uniforms instead of the sampler, which makes paths couplable.

    Returns
    -------
    x, aux : ndarray of shape (B, T)
    """
    fam = model.family
    thetas = np.asarray(thetas, dtype=float)
    T = thetas.shape[0]
    L = model.truncation_lag
    if fam.is_count:
        if uniforms is not None:
            batch = uniforms.shape[0]
        return _simulate_counts(model, thetas, rng, uniforms, batch)
    if xi is None:
        if rng is None:
            raise InvalidArgumentError("need innovations or a generator")
        xi = _innovations_for(model, T, rng, batch)
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    B = xi.shape[0]
    x = np.zeros((B, T))
    aux = np.zeros((B, T))
    k = fam.kind

    if k in ("tvar1", "tvar1-scale"):
        sig = thetas[:, 1] if k == "tvar1-scale" else np.ones(T)
        prev = np.zeros(B)
        for t in range(T):
            prev = thetas[t, 0] * prev + sig[t] * xi[:, t]
            _check(t + 1, prev)
            x[:, t] = prev
        return x, None

    if k in ("tvarinf", "tvarchinf", "tvlarchinf"):
        y = x if k != "tvarchinf" else np.zeros((B, T))
        for t in range(T):
            m = t if L is None else min(t, L)
            if m:
                if k == "tvarinf":
                    w = thetas[t, 0] * _power_weights(thetas[t, 1], m)
                else:
                    w = thetas[t, 1] * _power_weights(thetas[t, 2], m)
                # y[:, t-1], y[:, t-2], ..., y[:, t-m]
                s = y[:, t - m:t][:, ::-1] @ w
            else:
                s = np.zeros(B)
            if k == "tvarinf":
                xt = thetas[t, 2] * xi[:, t] + s
                _check(t + 1, xt)
            elif k == "tvarchinf":
                var = thetas[t, 0] + s
                _check(t + 1, np.zeros(B), var)
                sd = np.sqrt(var)
                xt = sd * xi[:, t]
                aux[:, t] = sd
                y[:, t] = xt * xt
            else:
                lvl = thetas[t, 0] + s
                xt = xi[:, t] * lvl
                _check(t + 1, xt)
                aux[:, t] = lvl
            x[:, t] = xt
        return x, (None if k == "tvarinf" else aux)

    if k == "tvarma":
        p, q = fam.p, fam.q
        for t in range(T):
            th = thetas[t]
            val = th[p + q] * xi[:, t]
            for i in range(1, min(p, t) + 1):
                val = val - th[i - 1] * x[:, t - i]
            for j in range(1, min(q, t) + 1):
                val = val + th[p + j - 1] * xi[:, t - j]
            _check(t + 1, val)
            x[:, t] = val
        return x, None

    if k in ("tvgarch", "tvarmagarch"):
        if k == "tvgarch":
            p_a, q_a, off = 0, 0, 0
            gp, gq = fam.p, fam.q
        else:
            p_a, q_a = fam.p, fam.q
            off = p_a + q_a
            gp, gq = fam.p2, fam.q2
        eps = np.zeros((B, T))
        var = np.zeros((B, T))
        for t in range(T):
            th = thetas[t]
            v = np.full(B, th[off])
            for i in range(1, min(gp, t) + 1):
                v = v + th[off + i] * eps[:, t - i] ** 2
            for j in range(1, min(gq, t) + 1):
                v = v + th[off + gp + j] * var[:, t - j]
            _check(t + 1, np.zeros(B), v)
            var[:, t] = v
            e = np.sqrt(v) * xi[:, t]
            eps[:, t] = e
            if k == "tvgarch":
                x[:, t] = e
                continue
            val = e.copy()
            for i in range(1, min(p_a, t) + 1):
                val = val - th[i - 1] * x[:, t - i]
            for j in range(1, min(q_a, t) + 1):
                val = val + th[p_a + j - 1] * eps[:, t - j]
            _check(t + 1, val)
            x[:, t] = val
        return x, (np.sqrt(var) if k == "tvgarch" else eps)

    if k == "tvglarch":
        p, q = fam.p, fam.q
        sig = np.zeros((B, T))
        for t in range(T):
            th = thetas[t]
            s = np.full(B, th[0])
            for i in range(1, min(p, t) + 1):
                s = s + th[i] * x[:, t - i]
            for j in range(1, min(q, t) + 1):
                s = s + th[p + j] * sig[:, t - j]
            sig[:, t] = s
            xt = xi[:, t] * s
            _check(t + 1, xt, s * s)
            x[:, t] = xt
        return x, sig

    raise InvalidArgumentError(f"no simulator for {fam}")  # pragma: no cover


def _simulate_counts(model, thetas, rng, uniforms, batch):
    fam = model.family
    T = thetas.shape[0]
    B = batch
    p, q = fam.p, fam.q
    x = np.zeros((B, T))
    lam = np.zeros((B, T))
    a0_init = thetas[0, 0]
    floor = model.intercept_floor
    for t in range(T):
        th = thetas[t]
        val = np.full(B, th[0])
        if fam.kind == "tvingarch":
            for i in range(1, p + 1):
                if t - i >= 0:
                    val = val + th[i] * x[:, t - i]
            for j in range(1, q + 1):
                val = val + th[p + j] * (lam[:, t - j] if t - j >= 0 else a0_init)
        else:
            ell = fam.ell
            for i in range(1, p + 1):
                val = val + th[i] * (lam[:, t - i] if t - i >= 0 else a0_init)
            for j in range(1, q + 1):
                if t - j >= 0:
                    xv = x[:, t - j]
                    val = val + th[p + j] * np.maximum(xv - ell, 0.0) - th[p + q + j] * np.minimum(xv, ell)
        val = np.maximum(val, floor)
        _check(t + 1, val)
        lam[:, t] = val
        if uniforms is not None:
            x[:, t] = _poisson_inversion(val, uniforms[:, t])
        else:
            x[:, t] = poisson_sample(val, rng)
    return x, lam


def simulate(model: ModelSpec, n: int, seed: int = 0, innovations=None, stream=()) -> Trajectory:
    """
    Simulate ``X_1..X_n`` with ``theta_t = path(t / n)`` from the zero past.

    Parameters
    ----------
    innovations : array_like of length n, optional
        Deterministic replacement for the innovation draws (unit-test hook).
        Not available for count families.
    stream : tuple of int
        Extra key for the random stream, e.g. the replication index.
    """
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    thetas = model.path.on_grid(n)
    rng = make_rng(seed, stream)
    if innovations is not None:
        if model.family.is_count:
            raise InvalidArgumentError("count families draw Poisson variables; no innovation hook")
        xi = np.asarray(innovations, dtype=float).reshape(1, -1)
        if xi.shape[1] != n:
            raise InvalidArgumentError("innovation hook must have length n")
        x, aux = simulate_batch(model, thetas, xi=xi)
    else:
        x, aux = simulate_batch(model, thetas, rng=rng)
    return Trajectory(x[0], None if aux is None else aux[0], seed=seed,
                      aux_name=_aux_name(model.family), model=model)


def _aux_name(fam):
    if fam.kind in ("tvgarch", "tvarchinf", "tvglarch", "tvlarchinf"):
        return "sigma"
    if fam.kind == "tvarmagarch":
        return "eps"
    if fam.is_count:
        return "lambda"
    return None


def stationary_version(model: ModelSpec, u: float, n: int, burn_in: int = 1000, seed: int = 0,
                       stream=()) -> Trajectory:
    """
    Simulate the process with the parameter frozen at ``theta(u)`` for
    ``burn_in + n`` steps and keep the last ``n``.

    ``burn_in=0`` is allowed; the first values then still carry the zero
    initialization.
    """
    if burn_in < 0:
        raise InvalidArgumentError("burn_in must be nonnegative")
    frozen = model.frozen(u)
    total = burn_in + n
    thetas = np.repeat(frozen.path.eval(u)[None, :], total, axis=0)
    rng = make_rng(seed, stream)
    x, aux = simulate_batch(frozen, thetas, rng=rng)
    return Trajectory(x[0, burn_in:], None if aux is None else aux[0, burn_in:], seed=seed,
                      aux_name=_aux_name(model.family), model=frozen)


def _garch11_sec5():
    return ModelSpec(
        Family("tvgarch", 1, 1),
        ParameterPath(["1+0.5*sin(5*u)", "0.1+0.4*cos(4*u)^2", "0.1+0.4*u"], names=("c0", "c1", "d1")),
        gaussian(),
        name="garch11_sec5",
    )


def _archinf_sec5():
    return ModelSpec(
        Family("tvarchinf"),
        ParameterPath(["1+0.5*sin(5*u)", "0.1+0.5*cos(4*u)^2", "2.1+1*u"], names=("c0", "c1", "p")),
        uniform_sym(math.sqrt(3.0)),
        name="archinf_sec5",
    )


def _ingarch10_sec5():
    return ModelSpec(
        Family("tvingarch", 1, 0),
        ParameterPath(["1+0.5*sin(5*u)", "0.3+0.5*u"], names=("a0", "a1")),
        gaussian(),
        name="ingarch10_sec5",
    )


SCENARIOS = {
    "garch11_sec5": _garch11_sec5,
    "archinf_sec5": _archinf_sec5,
    "ingarch10_sec5": _ingarch10_sec5,
}


def builtin_scenario(name: str) -> ModelSpec:
    """The three simulation designs: tvGARCH(1,1), tvARCH(inf) and tvINGARCH(1,0)."""
    key = str(name).strip().lower().replace("-", "_")
    if key not in SCENARIOS:
        raise InvalidArgumentError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}")
    return SCENARIOS[key]()
