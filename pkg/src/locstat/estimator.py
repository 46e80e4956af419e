"""
Kernel-localized M-estimation of a parameter curve ``u -> theta(u)``.

At each ``u`` the estimator minimizes

    L_n(u, theta) = 1/(n h) * sum_{t in window(u)} Phi_t(theta) K((t/n - u)/h)

over a box by Nelder-Mead with projection onto the box, restarted from a
fixed set of Halton points plus the solution at the previous grid point.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import qmc
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import _fast
from .contrasts import ContrastSpec, contrast_series, default_contrast
from .exceptions import DegenerateWindowError, InvalidArgumentError
from .kernels import KernelSpec, bandwidth, localization_window
from .models import Family, Trajectory, parse_family

__all__ = [
    "ThetaBox",
    "OptimizerConfig",
    "EstimatorConfig",
    "EstimateCurve",
    "YuleWalker",
    "default_u_grid",
    "make_config",
    "localized_objective",
    "estimate_at",
    "estimate_curve",
    "weighted_yule_walker",
    "LocalMEstimator",
]

TIE_TOL = 1e-12


def default_u_grid():
    """``u = k/50`` for ``k = 1..49``."""
    return np.arange(1, 50) / 50.0


@dataclass(frozen=True)
class ThetaBox:
    """Compact box ``[lower, upper]`` searched by the optimizer."""

    lower: np.ndarray
    upper: np.ndarray
    names: tuple = ()
    advisory: tuple = ()

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise InvalidArgumentError("box bounds must be 1-d arrays of equal length")
        if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)) or np.any(lo >= hi):
            raise InvalidArgumentError("box needs finite lower < upper in every coordinate")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "advisory", tuple(self.advisory))

    @classmethod
    def default(cls, family) -> "ThetaBox":
        fam = parse_family(family)
        lo, hi = fam.default_bounds()
        return cls(lo, hi, fam.param_names, (_advisory_name(fam),))

    @property
    def dim(self) -> int:
        return self.lower.size

    def contains(self, theta, tol=0.0) -> bool:
        th = np.asarray(theta, dtype=float)
        return bool(th.shape == self.lower.shape and np.all(th >= self.lower - tol) and np.all(th <= self.upper + tol))

    def project(self, theta):
        return np.clip(np.asarray(theta, dtype=float), self.lower, self.upper)

    def min_norm_point(self):
        """Box point of smallest Euclidean norm (coordinate-wise clip of 0)."""
        return np.clip(0.0, self.lower, self.upper)

    def on_edge(self, theta, rel=1e-6):
        span = self.upper - self.lower
        th = np.asarray(theta, dtype=float)
        return (th - self.lower <= rel * span) | (self.upper - th <= rel * span)

    def to_dict(self):
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist(), "names": list(self.names)}


def _advisory_name(fam: Family) -> str:
    return {
        "tvgarch": "garch_moment",
        "tvarchinf": "arch_moment",
        "tvarma": "arma_roots",
        "tvarmagarch": "arma_garch",
        "tvlarchinf": "larch_contraction",
        "tvglarch": "larch_contraction",
        "tvingarch": "ingarch_contraction",
        "tvingarch-thr": "ingarch_contraction",
    }.get(fam.kind, "ar_contraction")


@dataclass(frozen=True)
class OptimizerConfig:
    """
    Nelder-Mead settings.

    ``objective_scale`` multiplies the objective seen by the optimizer; it
    exists to check that estimates do not depend on the scale of the contrast.
    """

    restarts: int = 8
    tol: float = 1e-8
    xtol: float = 1e-7
    max_iter_per_dim: int = 500
    warm_start: bool = True
    objective_scale: float = 1.0

    def __post_init__(self):
        if self.restarts < 0:
            raise InvalidArgumentError("restarts must be >= 0")
        if not self.tol > 0 or not self.xtol > 0:
            raise InvalidArgumentError("optimizer tolerances must be positive")
        if self.max_iter_per_dim < 1:
            raise InvalidArgumentError("max_iter_per_dim must be >= 1")
        if not self.objective_scale > 0:
            raise InvalidArgumentError("objective_scale must be positive")


@dataclass(frozen=True)
class EstimatorConfig:
    contrast: ContrastSpec
    theta_box: ThetaBox
    kernel: KernelSpec
    bandwidth_exponent: float = 0.35
    u_grid: np.ndarray = field(default_factory=default_u_grid)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    truncation_lag: int | None = None

    def __post_init__(self):
        grid = np.atleast_1d(np.asarray(self.u_grid, dtype=float)).copy()
        if grid.size == 0:
            raise InvalidArgumentError("u_grid must not be empty")
        if np.any(np.diff(grid) <= 0):
            raise InvalidArgumentError("u_grid must be strictly increasing")
        if np.any(grid <= 0) or np.any(grid >= 1):
            raise InvalidArgumentError("u_grid must lie in (0, 1)")
        grid.flags.writeable = False
        object.__setattr__(self, "u_grid", grid)
        if self.theta_box.dim != self.contrast.family.dim:
            raise InvalidArgumentError(
                f"box has {self.theta_box.dim} coordinates but {self.contrast.family} has {self.contrast.family.dim}")
        if not 0 < self.bandwidth_exponent < 1:
            raise InvalidArgumentError("bandwidth exponent must lie in (0, 1)")
        if self.contrast.family.power_law:
            i = _exponent_index(self.contrast.family)
            if self.theta_box.lower[i] <= 1.0:
                raise InvalidArgumentError("power-law decay exponent must stay above 1 on the box")

    @property
    def family(self) -> Family:
        return self.contrast.family

    def to_dict(self):
        return {
            "family": str(self.family),
            "contrast": self.contrast.kind,
            "kernel": self.kernel.to_dict(),
            "bandwidth_exponent": self.bandwidth_exponent,
            "u_grid": self.u_grid.tolist(),
            "theta_box": self.theta_box.to_dict(),
            "optimizer": {
                "restarts": self.optimizer.restarts,
                "tol": self.optimizer.tol,
                "xtol": self.optimizer.xtol,
                "max_iter_per_dim": self.optimizer.max_iter_per_dim,
                "warm_start": self.optimizer.warm_start,
            },
            "variance_floor": self.contrast.variance_floor,
            "truncation_lag": self.truncation_lag,
        }


def make_config(family, contrast=None, kernel="epanechnikov", bandwidth_exponent=0.35, u_grid=None,
                bounds=None, optimizer=None, variance_floor=1e-8, truncation_lag=None) -> EstimatorConfig:
    """Build an :class:`EstimatorConfig` from names and defaults."""
    fam = parse_family(family)
    spec = ContrastSpec(contrast or default_contrast(fam), fam, variance_floor)
    if bounds is None:
        box = ThetaBox.default(fam)
    elif isinstance(bounds, ThetaBox):
        box = bounds
    else:
        lo, hi = bounds
        box = ThetaBox(lo, hi, fam.param_names, (_advisory_name(fam),))
    k = kernel if isinstance(kernel, KernelSpec) else KernelSpec.from_name(kernel)
    return EstimatorConfig(spec, box, k, bandwidth_exponent,
                           default_u_grid() if u_grid is None else u_grid,
                           optimizer or OptimizerConfig(), truncation_lag)


def _exponent_index(fam: Family) -> int:
    return 1 if fam.kind == "tvarinf" else 2


def _values(traj) -> np.ndarray:
    if isinstance(traj, Trajectory):
        return traj.values
    x = np.asarray(traj, dtype=float)
    if x.ndim != 1:
        raise InvalidArgumentError("series must be one-dimensional")
    return x


class _Prepared:
    """Data, bandwidth and interpolation table shared by all grid points of one fit."""

    def __init__(self, x, cfg: EstimatorConfig):
        self.x = np.ascontiguousarray(x, dtype=np.float64)
        self.n = self.x.size
        if self.n < 2:
            raise InvalidArgumentError("need at least 2 observations")
        if not np.all(np.isfinite(self.x)):
            raise InvalidArgumentError("series contains non-finite values")
        self.cfg = cfg
        fam = cfg.family
        self.h = bandwidth(self.n, cfg.bandwidth_exponent)
        self.code = _fast.CODES[(fam.kind, cfg.contrast.kind)]
        self.orders = fam.orders
        self.floor = cfg.contrast.variance_floor
        if self.code in _fast.POWER_LAW_CODES:
            i = _exponent_index(fam)
            self.nodes, self.bw = _fast.chebyshev_nodes(cfg.theta_box.lower[i], cfg.theta_box.upper[i])
            y = self.x * self.x if fam.kind == "tvarchinf" else self.x
            self.table = _fast.power_sum_table(y, self.nodes, 1, self.n, cfg.truncation_lag)
        else:
            self.nodes = np.zeros(1)
            self.bw = np.zeros(1)
            self.table = np.zeros((1, 1))

    def window(self, u):
        k = self.cfg.kernel
        win = localization_window(self.n, u, self.h, k.support_radius)
        t = np.arange(win.i_n, win.j_n + 1)
        w = k((t / self.n - u) / self.h) / (self.n * self.h)
        if not np.any(w > 0):
            raise DegenerateWindowError(f"no kernel mass in the window at u={u}")
        return win, np.ascontiguousarray(w)

    def table_rows(self, lo, hi):
        if self.code in _fast.POWER_LAW_CODES:
            return np.ascontiguousarray(self.table[lo - 1:hi])
        return self.table

    def objective(self, theta, win, w):
        th = np.ascontiguousarray(theta, dtype=np.float64)
        return _fast.window_objective(self.code, th, self.x, win.i_n, win.j_n, w, self.orders, self.floor,
                                      self.table_rows(win.i_n, win.j_n), self.nodes, self.bw)


def localized_objective(traj, cfg: EstimatorConfig, u: float, theta, method: str = "compiled") -> float:
    """
    Kernel-weighted average of the contrast around ``u`` at ``theta``.

    ``method="reference"`` evaluates the contrast by the plain numpy
    recursions over the full past instead of the compiled window routine.
    """
    th = np.asarray(theta, dtype=float)
    if not cfg.theta_box.contains(th):
        raise InvalidArgumentError(f"theta {th} lies outside the parameter box")
    x = _values(traj)
    if method == "reference":
        n = x.size
        if n < 2:
            raise InvalidArgumentError("need at least 2 observations")
        h = bandwidth(n, cfg.bandwidth_exponent)
        win = localization_window(n, u, h, cfg.kernel.support_radius)
        t = np.arange(win.i_n, win.j_n + 1)
        w = cfg.kernel((t / n - u) / h) / (n * h)
        if not np.any(w > 0):
            raise DegenerateWindowError(f"no kernel mass in the window at u={u}")
        phi, _ = contrast_series(cfg.contrast, th, x[:win.j_n], cfg.truncation_lag)
        return float(np.sum(w * phi[win.i_n - 1:win.j_n]))
    if method != "compiled":
        raise InvalidArgumentError("method must be 'compiled' or 'reference'")
    prep = _Prepared(x, cfg)
    win, w = prep.window(u)
    return float(prep.objective(th, win, w)[0])


_HALTON_CACHE: dict = {}


def _restart_points(box: ThetaBox, r0: int):
    key = (box.dim, r0)
    if key not in _HALTON_CACHE:
        pts = qmc.Halton(d=box.dim, scramble=False).random(r0 + 1)[1:] if r0 else np.zeros((0, box.dim))
        _HALTON_CACHE[key] = pts
    pts = _HALTON_CACHE[key]
    return box.lower + (box.upper - box.lower) * (0.05 + 0.9 * pts)


def _optimize(prep: _Prepared, u, warm=None):
    cfg = prep.cfg
    box = cfg.theta_box
    opt = cfg.optimizer
    win, w = prep.window(u)
    rows = prep.table_rows(win.i_n, win.j_n)
    d = box.dim
    maxiter = opt.max_iter_per_dim * d
    starts = list(_restart_points(box, opt.restarts))
    if warm is not None and opt.warm_start:
        starts.append(box.project(warm))
    if not starts:
        starts.append(box.project(0.5 * (box.lower + box.upper)))
    lo = np.ascontiguousarray(box.lower)
    hi = np.ascontiguousarray(box.upper)

    def f(th):
        return prep.objective(th, win, w)

    start_vals = [f(s)[0] for s in starts]
    cands = []
    nfev = len(starts)
    iters = 0
    n_conv = 0
    for s in starts:
        th, val, it, ne, conv = _fast.nelder_mead(
            np.ascontiguousarray(s, dtype=np.float64), lo, hi, opt.tol, opt.xtol, maxiter, opt.objective_scale,
            prep.code, prep.x, win.i_n, win.j_n, w, prep.orders, prep.floor, rows, prep.nodes, prep.bw)
        cands.append((f(th)[0], th))
        nfev += ne
        iters += it
        n_conv += int(conv)
    mn = box.min_norm_point()
    cands.append((f(mn)[0], mn))
    nfev += 1

    best = min(c[0] for c in cands)
    tied = [c for c in cands if c[0] - best < TIE_TOL * max(1.0, abs(best))]
    val, theta = min(tied, key=lambda c: (float(np.linalg.norm(c[1])), c[0]))
    theta = box.project(theta)
    value, nfl = f(theta)
    all_vals = np.array(start_vals + [c[0] for c in cands])
    degenerate = bool(np.ptp(all_vals) <= TIE_TOL * max(1.0, abs(best)))
    # an all-zero window carries no information even when the objective is not flat
    degenerate = degenerate or not np.any(prep.x[win.i_n - 1:win.j_n])
    diag = {
        "u": float(u),
        "window": [int(win.i_n), int(win.j_n)],
        "boundary": bool(win.boundary),
        "restarts_used": len(starts),
        "restarts_converged": n_conv,
        "converged": n_conv > 0,
        "iterations": int(iters),
        "evaluations": int(nfev),
        "floor_count": int(nfl),
        "degenerate": degenerate,
        "at_box_edge": box.on_edge(theta).tolist(),
    }
    return np.asarray(theta, dtype=float), float(value), diag


def estimate_at(traj, cfg: EstimatorConfig, u: float, warm_start=None):
    """
    ``theta_hat(u)`` and a diagnostics dict.

    Parameters
    ----------
    warm_start : array_like, optional
        Extra starting point, typically the estimate at the previous grid point.

    Returns
    -------
    theta_hat : ndarray of shape (d,)
    diagnostics : dict
        Keys include ``objective``, ``converged``, ``boundary``,
        ``floor_count`` and ``degenerate``.
    """
    prep = _Prepared(_values(traj), cfg)
    theta, value, diag = _optimize(prep, u, warm_start)
    diag["objective"] = value
    return theta, diag


@dataclass
class EstimateCurve:
    """Estimates on a ``u``-grid with per-point diagnostics."""

    u: np.ndarray
    theta: np.ndarray
    objective: np.ndarray
    converged: np.ndarray
    boundary: np.ndarray
    floor_count: np.ndarray
    degenerate: np.ndarray
    param_names: tuple
    diagnostics: list = field(default_factory=list)
    n: int = 0
    bandwidth: float = float("nan")

    @property
    def dim(self):
        return self.theta.shape[1]

    def component(self, name):
        return self.theta[:, list(self.param_names).index(name)]

    def to_csv(self, path=None) -> str:
        """Columns ``u, theta_1..theta_d, objective, converged, boundary_flag``."""
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["u"] + [f"theta_{i + 1}" for i in range(self.dim)] + ["objective", "converged", "boundary_flag"])
        for k in range(self.u.size):
            wr.writerow([repr(float(self.u[k]))] + [repr(float(v)) for v in self.theta[k]]
                        + [repr(float(self.objective[k])), int(self.converged[k]), int(self.boundary[k])])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def to_dict(self):
        return {
            "param_names": list(self.param_names),
            "n": self.n,
            "bandwidth": self.bandwidth,
            "u": self.u.tolist(),
            "theta": self.theta.tolist(),
            "objective": self.objective.tolist(),
            "converged": self.converged.tolist(),
            "boundary_flag": self.boundary.tolist(),
            "floor_count": self.floor_count.tolist(),
            "degenerate": self.degenerate.tolist(),
            "diagnostics": self.diagnostics,
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_dict(cls, obj) -> "EstimateCurve":
        theta = np.asarray(obj["theta"], dtype=float).reshape(len(obj["u"]), len(obj["param_names"]))
        return cls(np.asarray(obj["u"], dtype=float), theta, np.asarray(obj["objective"], dtype=float),
                   np.asarray(obj["converged"], dtype=bool), np.asarray(obj["boundary_flag"], dtype=bool),
                   np.asarray(obj["floor_count"], dtype=np.int64), np.asarray(obj["degenerate"], dtype=bool),
                   tuple(obj["param_names"]), list(obj.get("diagnostics", [])), int(obj.get("n", 0)),
                   float(obj.get("bandwidth", float("nan"))))

    @classmethod
    def from_json(cls, text) -> "EstimateCurve":
        return cls.from_dict(json.loads(text))


def estimate_curve(traj, cfg: EstimatorConfig) -> EstimateCurve:
    """
    Estimate on every point of ``cfg.u_grid`` in increasing order, warm
    starting each point from the previous estimate.

    A degenerate window at one ``u`` yields a NaN row flagged in the
    diagnostics instead of aborting the curve.
    """
    prep = _Prepared(_values(traj), cfg)
    grid = cfg.u_grid
    k, d = grid.size, cfg.theta_box.dim
    theta = np.full((k, d), np.nan)
    obj = np.full(k, np.nan)
    conv = np.zeros(k, dtype=bool)
    bnd = np.zeros(k, dtype=bool)
    flo = np.zeros(k, dtype=np.int64)
    deg = np.zeros(k, dtype=bool)
    diags = []
    warm = None
    for i, u in enumerate(grid):
        try:
            th, val, diag = _optimize(prep, u, warm)
        except DegenerateWindowError as exc:
            diags.append({"u": float(u), "degenerate_window": True, "error": str(exc)})
            deg[i] = True
            continue
        theta[i], obj[i] = th, val
        conv[i], bnd[i] = diag["converged"], diag["boundary"]
        flo[i], deg[i] = diag["floor_count"], diag["degenerate"]
        diags.append(diag)
        warm = th
    return EstimateCurve(grid.copy(), theta, obj, conv, bnd, flo, deg, cfg.theta_box.names or cfg.family.param_names,
                         diags, prep.n, prep.h)


@dataclass(frozen=True)
class YuleWalker:
    theta: float
    degenerate: bool


def weighted_yule_walker(traj, cfg: EstimatorConfig, u: float) -> YuleWalker:
    """
    Closed-form minimizer of the localized least-squares objective for tvAR(1):
    ``sum K_j x_j x_{j-1} / sum K_j x_{j-1}^2`` over the window, clipped to the box.
    """
    if cfg.contrast.kind != "ls" or cfg.family.kind != "tvar1":
        raise InvalidArgumentError("weighted Yule-Walker needs the LS contrast on tvar1")
    x = _values(traj)
    n = x.size
    h = bandwidth(n, cfg.bandwidth_exponent)
    win = localization_window(n, u, h, cfg.kernel.support_radius)
    t = np.arange(win.i_n, win.j_n + 1)
    w = cfg.kernel((t / n - u) / h)
    cur = x[t - 1]
    prev = np.where(t >= 2, x[np.maximum(t - 2, 0)], 0.0)
    den = float(np.sum(w * prev * prev))
    box = cfg.theta_box
    if den == 0.0:
        return YuleWalker(float(box.min_norm_point()[0]), True)
    val = float(np.sum(w * cur * prev)) / den
    return YuleWalker(float(np.clip(val, box.lower[0], box.upper[0])), False)


class LocalMEstimator(BaseEstimator):
    """
    Scikit-learn style wrapper around :func:`estimate_curve`.

    Parameters
    ----------
    family : str
        Model family, e.g. ``"tvgarch(1,1)"`` or ``"tvar1"``.
    contrast : str, optional
        Contrast name; the family's natural contrast when omitted.
    kernel : {"epanechnikov", "uniform"}
    bandwidth_exponent : float
        ``h = n ** -bandwidth_exponent``.
    u_grid : array_like, optional
        Defaults to ``k/50``, ``k = 1..49``.
    bounds : tuple of array_like, optional
        ``(lower, upper)`` of the parameter box.
    restarts, tol, max_iter_per_dim : optimizer settings.

    Attributes
    ----------
    curve_ : EstimateCurve
    theta_ : ndarray of shape (len(u_grid), d)
    u_grid_ : ndarray
    n_samples_ : int

    Examples
    --------
    >>> est = LocalMEstimator("tvar1", contrast="ls").fit(x)   # doctest: +SKIP
    >>> est.predict([0.25, 0.5])                               # doctest: +SKIP
    """

    def __init__(self, family="tvar1", contrast=None, kernel="epanechnikov", bandwidth_exponent=0.35,
                 u_grid=None, bounds=None, restarts=8, tol=1e-8, max_iter_per_dim=500, truncation_lag=None):
        self.family = family
        self.contrast = contrast
        self.kernel = kernel
        self.bandwidth_exponent = bandwidth_exponent
        self.u_grid = u_grid
        self.bounds = bounds
        self.restarts = restarts
        self.tol = tol
        self.max_iter_per_dim = max_iter_per_dim
        self.truncation_lag = truncation_lag

    def _config(self):
        opt = OptimizerConfig(restarts=self.restarts, tol=self.tol, max_iter_per_dim=self.max_iter_per_dim)
        return make_config(self.family, self.contrast, self.kernel, self.bandwidth_exponent, self.u_grid,
                           self.bounds, opt, truncation_lag=self.truncation_lag)

    @staticmethod
    def _series(X):
        if isinstance(X, Trajectory):
            X = X.values
        arr = check_array(X, ensure_2d=False, dtype=np.float64)
        if arr.ndim == 2:
            if arr.shape[1] != 1:
                raise ValueError("expected a single series: shape (n,) or (n, 1)")
            arr = arr[:, 0]
        return arr

    def fit(self, X, y=None):
        x = self._series(X)
        cfg = self._config()
        self.config_ = cfg
        self.curve_ = estimate_curve(x, cfg)
        self.theta_ = self.curve_.theta
        self.u_grid_ = self.curve_.u
        self.param_names_ = self.curve_.param_names
        self.n_samples_ = x.size
        return self

    def predict(self, u):
        """Estimated parameter at arbitrary ``u`` by linear interpolation of the curve."""
        check_is_fitted(self, "curve_")
        u = np.atleast_1d(np.asarray(u, dtype=float))
        ok = ~np.any(np.isnan(self.theta_), axis=1)
        out = np.column_stack([np.interp(u, self.u_grid_[ok], self.theta_[ok, i]) for i in range(self.theta_.shape[1])])
        return out

    def transform(self, X):
        """Local parameter ``theta_hat(t/n)`` for each time point of a series of length n."""
        x = self._series(X)
        return self.predict(np.arange(1, x.size + 1) / x.size)

    def fit_transform(self, X, y=None):
        return self.fit(X).transform(X)
