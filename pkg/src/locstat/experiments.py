"""
Monte Carlo harness: replicate simulate -> estimate_curve pipelines and
summarize the estimation error by RSMISE.

RSMISE of a component is

    sqrt( mean_r  mean_k (theta_hat_r(u_k) - theta*(u_k))^2 )

i.e. the grid average of the squared error, averaged over replications.

Replication ``r`` draws its trajectory from the stream
``SeedSequence(entropy=master_seed, spawn_key=(r,))`` so that dropping one
replication never shifts the others, and the same ``r`` reuses the same
innovations across sample sizes and kernels.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy import stats

from .contrasts import ContrastSpec, default_contrast
from .estimator import (EstimateCurve, EstimatorConfig, OptimizerConfig, ThetaBox, default_u_grid,
                        estimate_at, estimate_curve, make_config)
from .exceptions import InvalidArgumentError, SimulationExplosion
from .kernels import KernelSpec, bandwidth, kernel_l2_squared
from .models import Family, ModelSpec, builtin_scenario, simulate
from .paths import constant_path

__all__ = [
    "McScenario",
    "RmiseReport",
    "CltResult",
    "SCHEMA_VERSION",
    "UNRELIABLE_FRACTION",
    "paper_scenario",
    "run_mc",
    "truth_oracle",
    "table_report",
    "read_table_csv",
    "clt_check",
    "ad_normality_pvalue",
]

SCHEMA_VERSION = 1
UNRELIABLE_FRACTION = 0.05
SEED_DERIVATION = "numpy.random.SeedSequence(entropy=master_seed, spawn_key=(r,)) -> Philox"
_KERNEL_TAGS = {"uniform": "U", "epanechnikov": "E"}


def _as_kernel(k) -> KernelSpec:
    return k if isinstance(k, KernelSpec) else KernelSpec.from_name(k)


@dataclass(frozen=True)
class McScenario:
    """
    One Monte Carlo design.

    Parameters
    ----------
    model : ModelSpec
    contrast : ContrastSpec or str, optional
        Defaults to the family's natural contrast.
    ns : sequence of int
    R : int
        Replications per sample size.
    kernels : sequence of KernelSpec or names
    u_grid : array_like, optional
        Defaults to ``k/50, k = 1..49``.
    master_seed : int
    """

    model: ModelSpec
    contrast: ContrastSpec | str | None = None
    ns: tuple = (1000, 3000)
    R: int = 100
    kernels: tuple = ("epanechnikov",)
    u_grid: np.ndarray = field(default_factory=default_u_grid)
    master_seed: int = 0
    bandwidth_exponent: float = 0.35
    theta_box: ThetaBox | None = None
    optimizer: OptimizerConfig | None = None
    name: str = ""

    def __post_init__(self):
        if int(self.R) < 1:
            raise InvalidArgumentError("R must be >= 1")
        ns = tuple(int(n) for n in np.atleast_1d(self.ns))
        if not ns:
            raise InvalidArgumentError("ns must not be empty")
        if any(n < 2 for n in ns):
            raise InvalidArgumentError("sample sizes must be >= 2")
        kernels = tuple(_as_kernel(k) for k in self.kernels)
        if not kernels:
            raise InvalidArgumentError("need at least one kernel")
        fam = self.model.family
        c = self.contrast
        if c is None:
            c = ContrastSpec(default_contrast(fam), fam)
        elif not isinstance(c, ContrastSpec):
            c = ContrastSpec(c, fam)
        object.__setattr__(self, "contrast", c)
        object.__setattr__(self, "ns", ns)
        object.__setattr__(self, "R", int(self.R))
        object.__setattr__(self, "kernels", kernels)
        object.__setattr__(self, "u_grid", np.asarray(self.u_grid, dtype=float))
        object.__setattr__(self, "name", self.name or self.model.name or str(fam))

    @property
    def family(self) -> Family:
        return self.model.family

    def config(self, kernel) -> EstimatorConfig:
        return make_config(self.family, self.contrast.kind, _as_kernel(kernel), self.bandwidth_exponent,
                           self.u_grid, self.theta_box, self.optimizer, self.contrast.variance_floor,
                           self.model.truncation_lag)


def paper_scenario(name: str, full: bool = False, **overrides) -> McScenario:
    """
    Built-in design with both kernels.  Desk scale is ``R=100, ns=(1000, 3000)``;
    ``full=True`` switches to ``R=1000, ns=(1000, 3000, 10000)``.
    """
    model = builtin_scenario(name)
    kw = dict(ns=(1000, 3000, 10000) if full else (1000, 3000), R=1000 if full else 100,
              kernels=("uniform", "epanechnikov"))
    kw.update(overrides)
    return McScenario(model, **kw)


def truth_oracle(traj, cfg: EstimatorConfig):
    """Estimator stand-in returning the true curve; RSMISE is then exactly zero."""
    return traj.model.path.eval(cfg.u_grid)


def _replicate(scenario: McScenario, n: int, r: int, estimator, error_scale: float):
    out = {"n": n, "r": r, "errors": [None] * len(scenario.kernels), "reasons": [None] * len(scenario.kernels)}
    try:
        traj = simulate(scenario.model, n, seed=scenario.master_seed, stream=(r,))
    except SimulationExplosion as exc:
        out["reasons"] = [f"explosion at t={exc.t}"] * len(scenario.kernels)
        return out
    truth = scenario.model.path.eval(scenario.u_grid)
    for i, k in enumerate(scenario.kernels):
        cfg = scenario.config(k)
        res = estimator(traj, cfg)
        if isinstance(res, EstimateCurve):
            theta, ok = res.theta, bool(np.any(res.converged))
        else:
            theta, ok = np.asarray(res, dtype=float), True
        err = error_scale * (theta - truth)
        if not ok:
            out["reasons"][i] = "no grid point converged"
        elif not np.any(np.all(np.isfinite(err), axis=1)):
            out["reasons"][i] = "every window degenerate"
        else:
            out["errors"][i] = err
    return out


@dataclass
class RmiseReport:
    """
    RSMISE per ``(n, kernel, component)`` with exclusion bookkeeping.

    ``rsmise[(n, kernel)]`` is an array over components.  ``wall_clock`` is
    kept on the object but left out of the JSON payload so that the payload
    depends on ``master_seed`` only.
    """

    scenario: str
    family: str
    param_names: tuple
    ns: tuple
    kernels: tuple
    R: int
    master_seed: int
    u_grid: np.ndarray
    rsmise: dict
    n_used: dict
    excluded: dict
    errors: dict | None = None
    wall_clock: float = 0.0

    def value(self, n, kernel, component) -> float:
        return float(self.rsmise[(int(n), kernel)][list(self.param_names).index(component)])

    def is_unreliable(self, n, kernel) -> bool:
        return len(self.excluded[(int(n), kernel)]) > UNRELIABLE_FRACTION * self.R

    @property
    def unreliable(self) -> bool:
        return any(self.is_unreliable(n, k) for (n, k) in self.rsmise)

    @property
    def seeds(self) -> dict:
        return {"master_seed": self.master_seed, "derivation": SEED_DERIVATION,
                "replications": list(range(self.R))}

    def to_dict(self, include_errors: bool = False) -> dict:
        results = []
        for n in self.ns:
            for k in self.kernels:
                row = {
                    "n": n,
                    "kernel": k,
                    "rsmise": {c: float(v) for c, v in zip(self.param_names, self.rsmise[(n, k)])},
                    "n_used": self.n_used[(n, k)],
                    "excluded": [{"replication": r, "reason": why} for r, why in self.excluded[(n, k)]],
                    "unreliable": self.is_unreliable(n, k),
                }
                if include_errors and self.errors is not None:
                    row["error_curves"] = {str(r): e.tolist() for r, e in self.errors[(n, k)].items()}
                results.append(row)
        return {
            "schema_version": SCHEMA_VERSION,
            "scenario": self.scenario,
            "family": self.family,
            "param_names": list(self.param_names),
            "ns": list(self.ns),
            "kernels": list(self.kernels),
            "R": self.R,
            "u_grid": self.u_grid.tolist(),
            "seeds": self.seeds,
            "unreliable": self.unreliable,
            "results": results,
        }

    def to_json(self, path=None, include_errors: bool = False) -> str:
        text = json.dumps(self.to_dict(include_errors), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_dict(cls, obj) -> "RmiseReport":
        names = tuple(obj["param_names"])
        rs, used, exc, errs = {}, {}, {}, {}
        for row in obj["results"]:
            key = (int(row["n"]), row["kernel"])
            rs[key] = np.array([row["rsmise"][c] for c in names], dtype=float)
            used[key] = int(row["n_used"])
            exc[key] = [(int(e["replication"]), e["reason"]) for e in row["excluded"]]
            if "error_curves" in row:
                errs[key] = {int(r): np.asarray(v, dtype=float) for r, v in row["error_curves"].items()}
        return cls(obj["scenario"], obj["family"], names, tuple(obj["ns"]), tuple(obj["kernels"]), int(obj["R"]),
                   int(obj["seeds"]["master_seed"]), np.asarray(obj["u_grid"], dtype=float), rs, used, exc,
                   errs or None)

    @classmethod
    def from_json(cls, text) -> "RmiseReport":
        return cls.from_dict(json.loads(text))


def run_mc(scenario: McScenario, threads: int = 1, estimator=None, error_scale: float = 1.0,
           keep_errors: bool = False, progress=None) -> RmiseReport:
    """
    Run every ``(n, r)`` replication and reduce the squared errors.

    Parameters
    ----------
    threads : int
        Worker processes.  Results are reduced in replication order, so the
        report does not depend on this value.
    estimator : callable, optional
        ``estimator(traj, cfg)`` returning an :class:`EstimateCurve` or a
        ``(len(u_grid), d)`` array.  Defaults to :func:`estimate_curve`;
        :func:`truth_oracle` is the zero-error hook.
    error_scale : float
        Multiplies every per-replication error curve (test hook).
    progress : callable, optional
        Called as ``progress(done, total)`` in the sequential path.
    """
    if threads < 1:
        raise InvalidArgumentError("threads must be >= 1")
    if not error_scale > 0:
        raise InvalidArgumentError("error_scale must be positive")
    est = estimator or estimate_curve
    tasks = [(n, r) for n in scenario.ns for r in range(scenario.R)]
    t0 = time.perf_counter()
    if threads == 1:
        outs = []
        for i, (n, r) in enumerate(tasks):
            outs.append(_replicate(scenario, n, r, est, error_scale))
            if progress is not None:
                progress(i + 1, len(tasks))
    else:
        outs = Parallel(n_jobs=threads, backend="loky")(
            delayed(_replicate)(scenario, n, r, est, error_scale) for n, r in tasks)
    outs.sort(key=lambda o: (scenario.ns.index(o["n"]), o["r"]))
    knames = tuple(k.name for k in scenario.kernels)
    d = scenario.family.dim
    rs, used, exc = {}, {}, {}
    errs = {} if keep_errors else None
    for n in scenario.ns:
        for i, kname in enumerate(knames):
            rows, kept, dropped = [], {}, []
            for o in outs:
                if o["n"] != n:
                    continue
                if o["errors"][i] is None:
                    dropped.append((o["r"], o["reasons"][i]))
                    continue
                e = o["errors"][i]
                rows.append(np.nanmean(e * e, axis=0))
                if keep_errors:
                    kept[o["r"]] = e
            key = (n, kname)
            rs[key] = np.sqrt(np.mean(np.vstack(rows), axis=0)) if rows else np.full(d, np.nan)
            used[key] = len(rows)
            exc[key] = dropped
            if keep_errors:
                errs[key] = kept
    return RmiseReport(scenario.name, str(scenario.family), scenario.family.param_names, scenario.ns, knames,
                       scenario.R, scenario.master_seed, scenario.u_grid.copy(), rs, used, exc, errs,
                       time.perf_counter() - t0)


def _column_name(component, kernel):
    return f"{component}_{_KERNEL_TAGS.get(kernel, kernel)}"


def table_report(report: RmiseReport, fmt: str = "text", components=None, digits: int = 3) -> str:
    """
    Render RSMISE as a table with one row per ``n`` and one column per
    ``(component, kernel)``, components outermost.

    ``fmt="csv"`` writes full-precision values so the table parses back
    exactly with :func:`read_table_csv`; ``fmt="text"`` aligns columns and
    rounds to ``digits``.  An empty ``components`` list gives the header only.
    """
    comps = list(report.param_names) if components is None else list(components)
    cols = [(c, k) for c in comps for k in report.kernels]
    header = ["n"] + [_column_name(c, k) for c, k in cols]
    rows = []
    if cols:
        for n in report.ns:
            rows.append([n] + [report.value(n, k, c) for c, k in cols])
    if fmt == "csv":
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([str(row[0])] + [repr(v) for v in row[1:]])
        return buf.getvalue()
    if fmt != "text":
        raise InvalidArgumentError("fmt must be 'text' or 'csv'")
    cells = [header] + [[str(row[0])] + [f"{v:.{digits}f}" for v in row[1:]] for row in rows]
    widths = [max(len(r[j]) for r in cells) for j in range(len(header))]
    return "\n".join("  ".join(s.rjust(w) for s, w in zip(r, widths)) for r in cells) + "\n"


def read_table_csv(text: str):
    """Inverse of ``table_report(fmt="csv")``: ``(header, ns, values)``."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise InvalidArgumentError("empty table")
    header = rows[0]
    ns = [int(r[0]) for r in rows[1:]]
    vals = np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=float).reshape(len(ns), len(header) - 1)
    return header, ns, vals


def ad_normality_pvalue(z) -> tuple:
    """
    Anderson-Darling test of normality with estimated mean and variance.

    Returns ``(statistic, p_value)``; the p-value uses the D'Agostino-Stephens
    approximation on the small-sample corrected statistic.
    """
    z = np.asarray(z, dtype=float)
    m = z.size
    if m < 8 or np.ptp(z) == 0:
        return float("nan"), float("nan")
    a2 = float(stats.anderson(z, dist="norm").statistic)
    a = a2 * (1.0 + 0.75 / m + 2.25 / m**2)
    if a >= 0.6:
        p = math.exp(1.2937 - 5.709 * a + 0.0186 * a * a)
    elif a >= 0.34:
        p = math.exp(0.9177 - 4.279 * a - 1.38 * a * a)
    elif a >= 0.2:
        p = 1.0 - math.exp(-8.318 + 42.796 * a - 59.938 * a * a)
    else:
        p = 1.0 - math.exp(-13.436 + 101.14 * a - 223.73 * a * a)
    return a2, min(max(p, 0.0), 1.0)


@dataclass
class CltResult:
    empirical_var: float
    theoretical_var: float
    ratio: float
    normality_pvalue: float
    low_power: bool
    z: np.ndarray

    def to_dict(self):
        return {
            "empirical_var": self.empirical_var,
            "theoretical_var": self.theoretical_var,
            "ratio": self.ratio,
            "normality_pvalue": self.normality_pvalue,
            "low_power": self.low_power,
        }

    def __getitem__(self, key):
        return self.to_dict()[key]


LOW_POWER_R = 30


def _clt_one(model, cfg, n, r, seed, u):
    traj = simulate(model, n, seed=seed, stream=(r,))
    theta, _ = estimate_at(traj, cfg, u)
    return float(theta[0])


def clt_check(theta_star: float, n: int, R: int, kernel="epanechnikov", u: float = 0.5, lam: float = 0.35,
              master_seed: int = 0, threads: int = 1, bounds=(-0.99, 0.99)) -> CltResult:
    """
    Compare the spread of ``z_r = sqrt(n h_n) (theta_hat_r(u) - theta*)`` for
    the localized LS estimator of a constant tvAR(1) with its limit variance
    ``(1 - theta*^2) * int K^2``.

    Fewer than ``LOW_POWER_R`` replications are flagged ``low_power``; the
    normality p-value needs at least 8.
    """
    if not abs(theta_star) < 1:
        raise InvalidArgumentError("|theta*| must be < 1")
    if R < 2:
        raise InvalidArgumentError("need R >= 2 for a sample variance")
    k = _as_kernel(kernel)
    model = ModelSpec(Family("tvar1"), constant_path([theta_star]))
    cfg = make_config("tvar1", "ls", k, lam, [u], bounds=bounds)
    if threads == 1:
        est = [_clt_one(model, cfg, n, r, master_seed, u) for r in range(R)]
    else:
        est = Parallel(n_jobs=threads, backend="loky")(
            delayed(_clt_one)(model, cfg, n, r, master_seed, u) for r in range(R))
    z = math.sqrt(n * bandwidth(n, lam)) * (np.asarray(est) - theta_star)
    emp = float(np.var(z, ddof=1))
    theo = (1.0 - theta_star**2) * kernel_l2_squared(k)
    _, p = ad_normality_pvalue(z)
    return CltResult(emp, theo, emp / theo, p, R < LOW_POWER_R, z)
