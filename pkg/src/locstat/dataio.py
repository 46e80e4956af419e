"""
File formats: trajectory CSV, user series CSV, static SVG line plots and
the JSON run configuration.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .estimator import EstimatorConfig, OptimizerConfig, make_config
from .exceptions import ConfigError, DataError, LocstatError
from .innovations import InnovationSpec
from .models import ModelSpec, Trajectory, builtin_scenario, parse_family
from .paths import ParameterPath

__all__ = [
    "write_trajectory_csv",
    "read_trajectory_csv",
    "SeriesFile",
    "read_series",
    "svg_line_plot",
    "RunConfig",
    "load_config",
]


def write_trajectory_csv(traj: Trajectory, path=None) -> str:
    """Columns ``t, x`` plus the auxiliary series (``sigma``, ``eps`` or ``lambda``) when present."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    has_aux = traj.aux is not None
    wr.writerow(["t", "x"] + ([traj.aux_name or "aux"] if has_aux else []))
    for t in range(traj.n):
        row = [t + 1, repr(float(traj.values[t]))]
        if has_aux:
            row.append(repr(float(traj.aux[t])))
        wr.writerow(row)
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def read_trajectory_csv(path) -> Trajectory:
    """Inverse of :func:`write_trajectory_csv`."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:2] != ["t", "x"]:
        raise DataError("trajectory file must start with a 't,x' header", 1)
    vals, aux = [], []
    for i, row in enumerate(rows[1:], start=2):
        try:
            vals.append(float(row[1]))
            if len(rows[0]) > 2:
                aux.append(float(row[2]))
        except (ValueError, IndexError):
            raise DataError(f"non-numeric cell in {row!r}", i) from None
    return Trajectory(np.array(vals), np.array(aux) if len(rows[0]) > 2 else None,
                      aux_name=rows[0][2] if len(rows[0]) > 2 else None)


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


@dataclass
class SeriesFile:
    """
    A real-valued column of a comma-separated file.

    Parameters
    ----------
    path : str or Path
    column : str or int, optional
        Header name or 0-based index.  Defaults to the last column, which
        suits ``Date,Close`` style files.
    transform : {"none", "log_return"}
        ``log_return`` maps ``y_1..y_m`` to ``log(y_t / y_{t-1})``, ``t = 2..m``.
    """

    path: str | Path
    column: str | int | None = None
    transform: str = "none"
    values: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.transform not in ("none", "log_return"):
            raise ConfigError("transform must be 'none' or 'log_return'")

    def load(self) -> np.ndarray:
        with open(self.path, newline="", encoding="utf-8-sig") as fh:
            rows = [r for r in csv.reader(fh)]
        if not rows:
            raise DataError("file is empty")
        first = [c.strip() for c in rows[0]]
        col = self.column
        if isinstance(col, str) and col.lstrip("-").isdigit():
            col = int(col)
        if col is None:
            j = len(first) - 1
        elif isinstance(col, int):
            j = col
        else:
            if col not in first:
                raise DataError(f"column {col!r} not found in header {first!r}", 1)
            j = first.index(col)
        if not -len(first) <= j < len(first):
            raise DataError(f"column index {j} out of range", 1)
        # a header row is recognized by a non-numeric cell in the selected column
        header = not _is_number(first[j])
        start = 1 if header else 0
        out = []
        for i in range(start, len(rows)):
            row = rows[i]
            if not row or all(not c.strip() for c in row):
                continue
            try:
                cell = row[j].strip()
            except IndexError:
                raise DataError(f"missing column {j}", i + 1) from None
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"non-numeric cell {cell!r}", i + 1) from None
            if not math.isfinite(v):
                raise DataError(f"non-finite value {cell!r}", i + 1)
            out.append((i + 1, v))
        y = np.array([v for _, v in out], dtype=float)
        if self.transform == "log_return":
            bad = [r for r, v in out if v <= 0]
            if bad:
                raise DataError("log_return needs strictly positive values", bad[0])
            y = np.diff(np.log(y))
        self.values = y
        return y


def read_series(path, column=None, transform="none") -> np.ndarray:
    return SeriesFile(path, column, transform).load()


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _nice_ticks(lo, hi, k=5):
    if not hi > lo:
        return [lo]
    step = 10 ** math.floor(math.log10((hi - lo) / k))
    for m in (1, 2, 5, 10):
        if (hi - lo) / (m * step) <= k:
            step *= m
            break
    start = math.ceil(lo / step) * step
    return [start + i * step for i in range(int(math.floor((hi - start) / step + 1e-9)) + 1)]


def svg_line_plot(x, series: dict, title: str = "", xlabel: str = "u", path=None,
                  width: int = 640, height: int = 400) -> str:
    """
    Static SVG chart of one or more curves over a common abscissa.

    NaN values break the polyline.  Only a text rendering is produced; the
    numbers given are not modified.
    """
    x = np.asarray(x, dtype=float)
    ys = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    ml, mr, mt, mb = 60, 20, 30 if title else 12, 40
    pw, ph = width - ml - mr, height - mt - mb
    finite = np.concatenate([v[np.isfinite(v)] for v in ys.values()]) if ys else np.array([])
    y0, y1 = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    x0, x1 = (float(x.min()), float(x.max())) if x.size else (0.0, 1.0)
    if x1 - x0 < 1e-12:
        x0, x1 = x0 - 0.5, x1 + 0.5

    def sx(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return mt + (y1 - v) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect width="{width}" height="{height}" fill="white"/>']
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{_esc(title)}</text>')
    out.append(f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for t in _nice_ticks(x0, x1):
        out.append(f'<line x1="{sx(t):.2f}" y1="{mt + ph}" x2="{sx(t):.2f}" y2="{mt + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{sx(t):.2f}" y="{mt + ph + 16}" text-anchor="middle">{t:g}</text>')
    for t in _nice_ticks(y0, y1):
        out.append(f'<line x1="{ml - 4}" y1="{sy(t):.2f}" x2="{ml}" y2="{sy(t):.2f}" stroke="black"/>')
        out.append(f'<text x="{ml - 6}" y="{sy(t) + 4:.2f}" text-anchor="end">{t:.4g}</text>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 6}" text-anchor="middle">{_esc(xlabel)}</text>')
    for i, (name, v) in enumerate(ys.items()):
        color = _PALETTE[i % len(_PALETTE)]
        seg = []
        for xi, yi in zip(x, v):
            if np.isfinite(yi):
                seg.append(f"{sx(xi):.2f},{sy(yi):.2f}")
            elif seg:
                out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(seg)}"/>')
                seg = []
        if seg:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(seg)}"/>')
        ly = mt + 14 + 14 * i
        out.append(f'<line x1="{ml + pw - 90}" y1="{ly - 4}" x2="{ml + pw - 70}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw - 66}" y="{ly}">{_esc(name)}</text>')
    out.append("</svg>")
    text = "\n".join(out) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def _esc(s: str) -> str:
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


_SECTIONS = {
    "model": {"scenario", "family", "path", "names", "holder_rho", "holder_K", "innovations", "truncation_lag",
              "intercept_floor", "name"},
    "estimator": {"contrast", "kernel", "bandwidth_exponent", "u_grid", "bounds", "restarts", "tol", "xtol",
                  "max_iter_per_dim", "warm_start", "variance_floor", "truncation_lag"},
    "simulate": {"n", "seed"},
    "mc": {"ns", "R", "kernels", "master_seed", "full"},
    "tau": {"u", "s_max", "p", "R", "burn_in", "seed"},
    "series": {"path", "column", "transform"},
}


def _check_keys(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be an object")
    extra = sorted(set(obj) - set(allowed))
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(extra)}")


@dataclass
class RunConfig:
    """
    Parsed JSON run configuration.

    Top-level sections are ``model``, ``estimator``, ``simulate``, ``mc``,
    ``tau`` and ``series``; every section is optional and unknown keys are
    rejected.  ``model`` either names a built-in ``scenario`` or gives
    ``family`` and ``path`` (one expression per parameter).
    """

    raw: dict = field(default_factory=dict)

    def __post_init__(self):
        _check_keys(self.raw, _SECTIONS, "config")
        for sec, keys in _SECTIONS.items():
            if sec in self.raw:
                _check_keys(self.raw[sec], keys, sec)

    def section(self, name) -> dict:
        return dict(self.raw.get(name, {}))

    def merged(self, name, **overrides) -> dict:
        """Section values with non-None ``overrides`` taking precedence."""
        out = self.section(name)
        out.update({k: v for k, v in overrides.items() if v is not None})
        return out

    def model(self, **overrides) -> ModelSpec:
        m = self.merged("model", **overrides)
        try:
            if m.get("scenario"):
                rest = set(m) - {"scenario"}
                if rest:
                    raise ConfigError(f"'scenario' cannot be combined with {sorted(rest)}")
                return builtin_scenario(m["scenario"])
            if "family" not in m or "path" not in m:
                raise ConfigError("model needs either 'scenario' or both 'family' and 'path'")
            fam = parse_family(m["family"])
            comps = m["path"]
            names = m.get("names")
            if isinstance(comps, dict):
                names = list(comps)
                comps = list(comps.values())
            if isinstance(comps, (str, int, float)):
                comps = [comps]
            path = ParameterPath(list(comps), m.get("holder_rho", 1.0), m.get("holder_K"),
                                 names or fam.param_names)
            return ModelSpec(fam, path, InnovationSpec.from_config(m.get("innovations")),
                             m.get("truncation_lag"), m.get("intercept_floor", 1e-8), m.get("name", ""))
        except ConfigError:
            raise
        except (LocstatError, TypeError, KeyError) as exc:
            raise ConfigError(f"model: {exc}") from exc

    def estimator(self, family, **overrides) -> EstimatorConfig:
        e = self.merged("estimator", **overrides)
        try:
            opt = OptimizerConfig(**{k: e[k] for k in ("restarts", "tol", "xtol", "max_iter_per_dim", "warm_start")
                                     if k in e})
            bounds = e.get("bounds")
            if isinstance(bounds, dict):
                _check_keys(bounds, {"lower", "upper"}, "estimator.bounds")
                bounds = (bounds["lower"], bounds["upper"])
            return make_config(family, e.get("contrast"), e.get("kernel", "epanechnikov"),
                               e.get("bandwidth_exponent", 0.35), e.get("u_grid"), bounds, opt,
                               e.get("variance_floor", 1e-8), e.get("truncation_lag"))
        except ConfigError:
            raise
        except (LocstatError, TypeError, KeyError) as exc:
            raise ConfigError(f"estimator: {exc}") from exc


def load_config(path) -> RunConfig:
    """Read a JSON run configuration; syntax and schema problems raise :class:`ConfigError`."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return RunConfig(raw)
