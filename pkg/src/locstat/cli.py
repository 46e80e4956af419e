"""
Command-line interface.

Subcommands: simulate, estimate, fit, mc, check, tau.  Exit codes are 0 on
success, 2 when the result carries raised flags (non-convergence,
degenerate windows, an unreliable Monte Carlo report, a failed
admissibility check), 3 on a runtime model failure, 64 on usage or
configuration errors and 65 on malformed input data.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataio import RunConfig, SeriesFile, load_config, svg_line_plot, write_trajectory_csv
from .exceptions import (ConfigError, DataError, InadmissibleError, InvalidArgumentError, LocstatError,
                         SimulationExplosion)
from .experiments import McScenario, run_mc, table_report, truth_oracle
from .estimator import estimate_curve
from .innovations import InnovationSpec
from .models import builtin_scenario, parse_family, simulate
from .theory import check_admissible, estimate_tau

EXIT_OK = 0
EXIT_DEGRADED = 2
EXIT_RUNTIME = 3
EXIT_USAGE = 64
EXIT_DATA = 65
SCHEMA_VERSION = 1
MIN_FIT_LENGTH = 200


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _threads(args) -> int:
    if args.threads is not None:
        val = args.threads
    else:
        env = os.environ.get("LOCSTAT_THREADS", "").strip()
        if not env:
            return 1
        try:
            val = int(env)
        except ValueError:
            raise ConfigError(f"LOCSTAT_THREADS must be an integer, got {env!r}") from None
    if val < 1:
        raise ConfigError("thread count must be >= 1")
    return val


def _config(args) -> RunConfig:
    return load_config(args.config) if getattr(args, "config", None) else RunConfig({})


def _model(args, cfg: RunConfig):
    """Model from --scenario, else --family/--path layered over the config, else the config alone."""
    if getattr(args, "scenario", None):
        return builtin_scenario(args.scenario)
    m = cfg.section("model")
    if getattr(args, "family", None) or getattr(args, "path", None):
        m.pop("scenario", None)
        for key in ("family", "path", "innovations"):
            if getattr(args, key, None) is not None:
                m[key] = getattr(args, key)
        return RunConfig({"model": m}).model()
    if not m:
        raise ConfigError("no model given: use --scenario, --family/--path or a config 'model' section")
    return cfg.model()


def _write(text: str, out):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _add_model_args(p, family_help="model family, e.g. garch(1,1)"):
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--scenario", help="built-in design: garch11_sec5, archinf_sec5, ingarch10_sec5")
    p.add_argument("--family", help=family_help)
    p.add_argument("--path", nargs="+", help="one expression in u per parameter, e.g. '0.5' '0.1+0.4*u'")
    p.add_argument("--innovations", help="gaussian or uniform")


def _add_estimator_args(p, kernel=True):
    p.add_argument("--contrast", help="ls, lav, gqmle, larch-ls or poisson-qmle")
    if kernel:
        p.add_argument("--kernel", help="uniform or epanechnikov")
    p.add_argument("--bandwidth-exponent", type=float, help="lambda in h = n^-lambda (default 0.35)")
    p.add_argument("--restarts", type=int, help="quasi-random restarts per grid point")


def cmd_simulate(args) -> int:
    cfg = _config(args)
    model = _model(args, cfg)
    sim = cfg.merged("simulate", n=args.n, seed=args.seed)
    if "n" not in sim:
        raise ConfigError("simulate needs --n or simulate.n in the config")
    try:
        traj = simulate(model, int(sim["n"]), seed=int(sim.get("seed", 0)))
    except SimulationExplosion as exc:
        print(f"locstat simulate: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    _write(write_trajectory_csv(traj), args.out)
    return EXIT_OK


def _estimator_config(args, cfg: RunConfig, family):
    return cfg.estimator(family, contrast=args.contrast, kernel=args.kernel,
                         bandwidth_exponent=args.bandwidth_exponent, restarts=args.restarts)


def _curve_payload(curve, family, extra=None):
    obj = curve.to_dict()
    obj["schema_version"] = SCHEMA_VERSION
    obj["family"] = str(family)
    obj["all_converged"] = bool(np.all(curve.converged))
    obj["any_degenerate"] = bool(np.any(curve.degenerate))
    if extra:
        obj.update(extra)
    return obj


def _emit_curve(curve, family, out, extra=None):
    if out is not None and str(out).endswith(".json"):
        _write(_dump(_curve_payload(curve, family, extra)), out)
    else:
        _write(curve.to_csv(), out)


def _family_of(args, cfg):
    fam = args.family or cfg.section("model").get("family")
    if fam is None and (args.scenario or cfg.section("model").get("scenario")):
        fam = _model(args, cfg).family
    if fam is None:
        raise ConfigError("give --family (or a config model section)")
    return fam


def cmd_estimate(args) -> int:
    cfg = _config(args)
    fam = _family_of(args, cfg)
    x = SeriesFile(args.input, args.column or "x", args.transform).load()
    ecfg = _estimator_config(args, cfg, fam)
    curve = estimate_curve(x, ecfg)
    _emit_curve(curve, ecfg.family, args.out)
    return EXIT_OK if np.all(curve.converged) and not np.any(curve.degenerate) else EXIT_DEGRADED


def cmd_fit(args) -> int:
    cfg = _config(args)
    ser = cfg.merged("series", path=args.input, column=args.column, transform=args.transform)
    if "path" not in ser:
        raise ConfigError("fit needs --input or series.path in the config")
    x = SeriesFile(ser["path"], ser.get("column"), ser.get("transform", "none")).load()
    if x.size < MIN_FIT_LENGTH:
        print(f"locstat fit: series has {x.size} observations; at least {MIN_FIT_LENGTH} are needed "
              "for the kernel windows to carry data", file=sys.stderr)
        return EXIT_DATA
    fam = args.family or cfg.section("model").get("family") or "garch(1,1)"
    ecfg = _estimator_config(args, cfg, fam)
    curve = estimate_curve(x, ecfg)
    derived = {}
    if ecfg.family.kind == "tvgarch" and ecfg.family.p == 1 and ecfg.family.q == 1:
        derived["c1+d1"] = (curve.component("c1") + curve.component("d1")).tolist()
    _emit_curve(curve, ecfg.family, args.out, {"derived": derived})
    if args.json:
        _write(_dump(_curve_payload(curve, ecfg.family, {"derived": derived})), args.json)
    plots = []
    if args.plot_dir and not args.no_plot:
        d = Path(args.plot_dir)
        d.mkdir(parents=True, exist_ok=True)
        for name in curve.param_names:
            f = d / f"{name}.svg"
            svg_line_plot(curve.u, {name: curve.component(name)}, title=f"{name}(u)", path=f)
            plots.append(str(f))
        for name, vals in derived.items():
            f = d / f"{name.replace('+', '_plus_')}.svg"
            svg_line_plot(curve.u, {name: np.asarray(vals)}, title=f"{name}(u)", path=f)
            plots.append(str(f))
    ok = bool(np.all(curve.converged)) and not np.any(curve.degenerate)
    summary = {"schema_version": SCHEMA_VERSION, "n": int(x.size), "points": int(curve.u.size),
               "family": str(ecfg.family), "all_converged": bool(np.all(curve.converged)),
               "any_degenerate": bool(np.any(curve.degenerate)), "plots": plots}
    print(json.dumps(summary, sort_keys=True), file=sys.stderr if args.out in (None, "-") else sys.stdout)
    return EXIT_OK if ok else EXIT_DEGRADED


def cmd_mc(args) -> int:
    cfg = _config(args)
    model = _model(args, cfg)
    mc = cfg.merged("mc", ns=args.n, R=args.reps, kernels=args.kernel, master_seed=args.seed,
                    full=args.full or None)
    full = bool(mc.get("full", False))
    ns = mc.get("ns") or ((1000, 3000, 10000) if full else (1000, 3000))
    R = mc.get("R") or (1000 if full else 100)
    kernels = mc.get("kernels") or ("uniform", "epanechnikov")
    est = cfg.section("estimator")
    probe = cfg.estimator(model.family, contrast=args.contrast, bandwidth_exponent=args.bandwidth_exponent,
                          restarts=args.restarts)
    sc = McScenario(model, probe.contrast, ns, int(R), kernels, probe.u_grid, int(mc.get("master_seed", 0)),
                    probe.bandwidth_exponent, probe.theta_box if "bounds" in est else None, probe.optimizer)
    estimator = truth_oracle if args.estimator == "truth" else None
    report = run_mc(sc, threads=_threads(args), estimator=estimator)
    if args.out is not None and str(args.out).endswith(".csv"):
        _write(table_report(report, "csv"), args.out)
    else:
        _write(report.to_json() + "\n", args.out)
    if args.out not in (None, "-"):
        sys.stdout.write(table_report(report, "text"))
    if report.unreliable:
        print("locstat mc: more than 5% of replications excluded; report marked unreliable", file=sys.stderr)
        return EXIT_DEGRADED
    return EXIT_OK


def cmd_check(args) -> int:
    cfg = _config(args)
    if args.theta is not None:
        if not args.family:
            raise ConfigError("--theta needs --family")
        fam = parse_family(args.family)
        if len(args.theta) != fam.dim:
            raise ConfigError(f"{fam} needs {fam.dim} values for --theta")
        res = check_admissible(fam, np.asarray(args.theta, dtype=float),
                               InnovationSpec.from_config(args.innovations))
        label = str(fam)
    else:
        model = _model(args, cfg)
        res = check_admissible(model)
        label = model.name or str(model.family)
    obj = {"schema_version": SCHEMA_VERSION, "model": label}
    obj.update(res.to_dict())
    _write(_dump(obj), args.out)
    return EXIT_OK if res.ok else EXIT_DEGRADED


def _tau_csv(res) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["s", "tau_hat", "lambda_bound"])
    for i, s in enumerate(res.s):
        lb = "" if res.lambda_bound is None else repr(float(res.lambda_bound[i]))
        wr.writerow([int(s), repr(float(res.tau_hat[i])), lb])
    return buf.getvalue()


def cmd_tau(args) -> int:
    cfg = _config(args)
    model = _model(args, cfg)
    t = cfg.merged("tau", u=args.u, s_max=args.s_max, p=args.p, R=args.reps, burn_in=args.burn_in, seed=args.seed)
    res = estimate_tau(model, float(t.get("u", 0.5)), int(t.get("s_max", 20)), float(t.get("p", 2)),
                       int(t.get("R", 10_000)), int(t.get("burn_in", 500)), int(t.get("seed", 0)))
    if args.out is not None and str(args.out).endswith(".json"):
        obj = {"schema_version": SCHEMA_VERSION}
        obj.update(res.to_dict())
        _write(_dump(obj), args.out)
    else:
        _write(_tau_csv(res), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="locstat", description="Localized M-estimation for locally stationary time series.")
    p.add_argument("--version", action="version", version=f"locstat {__version__}")
    p.add_argument("--threads", type=int, default=None,
                   help="worker processes (default: $LOCSTAT_THREADS or 1)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="simulate a trajectory to CSV")
    _add_model_args(s)
    s.add_argument("--n", type=int, help="sample size")
    s.add_argument("--seed", type=int, help="master seed (default 0)")
    s.add_argument("--out", help="output CSV (default stdout)")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", help="estimate the parameter curve of a trajectory CSV")
    e.add_argument("--input", required=True, help="CSV with an 'x' column (as written by simulate)")
    e.add_argument("--column", help="column name or 0-based index (default 'x')")
    e.add_argument("--transform", default="none", choices=("none", "log_return"))
    _add_model_args(e)
    _add_estimator_args(e)
    e.add_argument("--out", help="curve output, .csv or .json (default CSV on stdout)")
    e.set_defaults(func=cmd_estimate)

    f = sub.add_parser("fit", help="fit a model to a real-valued series, with optional SVG plots")
    f.add_argument("--config", help="JSON run configuration")
    f.add_argument("--input", help="comma-separated data file")
    f.add_argument("--column", help="column name or 0-based index (default: last column)")
    f.add_argument("--transform", choices=("none", "log_return"), help="default none")
    f.add_argument("--family", help="model family (default garch(1,1))")
    _add_estimator_args(f)
    f.add_argument("--out", help="curve output, .csv or .json (default CSV on stdout)")
    f.add_argument("--json", help="also write the JSON curve payload here")
    f.add_argument("--plot-dir", help="write one SVG per component (and derived curves) here")
    f.add_argument("--no-plot", action="store_true", help="skip SVG output even if --plot-dir is given")
    f.set_defaults(func=cmd_fit, scenario=None, path=None, innovations=None)

    m = sub.add_parser("mc", help="Monte Carlo RSMISE table")
    _add_model_args(m)
    _add_estimator_args(m, kernel=False)
    m.add_argument("--n", type=int, action="append", help="sample size (repeatable)")
    m.add_argument("--reps", type=int, help="replications R (default 100)")
    m.add_argument("--kernel", action="append", dest="kernel",
                   help="kernel (repeatable; default uniform and epanechnikov)")
    m.add_argument("--seed", type=int, help="master seed (default 0)")
    m.add_argument("--full", action="store_true", help="R=1000 and n in {1000, 3000, 10000}")
    m.add_argument("--estimator", choices=("curve", "truth"), default="curve",
                   help="'truth' replaces the estimator by the true curve (harness check)")
    m.add_argument("--out", help="report, .json or .csv table (default JSON on stdout)")
    m.set_defaults(func=cmd_mc)

    c = sub.add_parser("check", help="admissibility of a parameter path or point")
    _add_model_args(c)
    c.add_argument("--theta", type=float, nargs="+", help="check a single parameter point of --family")
    c.add_argument("--out", help="JSON output (default stdout)")
    c.set_defaults(func=cmd_check)

    t = sub.add_parser("tau", help="coupling estimate of tau(s) for the stationary version at u")
    _add_model_args(t)
    t.add_argument("--u", type=float, help="rescaled time (default 0.5)")
    t.add_argument("--s-max", type=int, help="largest lag (default 20)")
    t.add_argument("--p", type=float, help="moment order 1 or 2 (default 2)")
    t.add_argument("--reps", type=int, help="coupled pairs R (default 10000)")
    t.add_argument("--burn-in", type=int, help="steps before the coupling starts (default 500)")
    t.add_argument("--seed", type=int, help="seed (default 0)")
    t.add_argument("--out", help=".csv or .json (default CSV on stdout)")
    t.set_defaults(func=cmd_tau)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, InvalidArgumentError) as exc:
        print(f"locstat {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"locstat {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SimulationExplosion, InadmissibleError, LocstatError) as exc:
        print(f"locstat {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except FileNotFoundError as exc:
        print(f"locstat {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
