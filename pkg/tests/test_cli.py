import csv
import io
import json
from pathlib import Path

import numpy as np
import pytest

from locstat.cli import EXIT_DATA, EXIT_DEGRADED, EXIT_OK, EXIT_USAGE, main
from locstat.estimator import EstimateCurve
from locstat.experiments import RmiseReport
from locstat.models import builtin_scenario, simulate


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def returns_file(tmp_path_factory):
    tr = simulate(builtin_scenario("garch11_sec5"), 1200, seed=4)
    path = tmp_path_factory.mktemp("data") / "returns.csv"
    rows = [f"2000-01-{i % 28 + 1:02d},{v!r}" for i, v in enumerate(tr.values.tolist())]
    path.write_text("Date,Return\n" + "\n".join(rows) + "\n")
    return path


def test_simulate_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        code, _, _ = run(["simulate", "--scenario", "garch11_sec5", "--n", "100", "--seed", "1", "--out", str(out)],
                         capsys)
        assert code == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    rows = list(csv.reader(io.StringIO(a.read_text())))
    assert rows[0] == ["t", "x", "sigma"]
    assert len(rows) == 101


def test_simulate_from_flags_to_stdout(capsys):
    code, out, _ = run(["simulate", "--family", "tvar1", "--path", "0+0.5*u", "--n", "5"], capsys)
    assert code == EXIT_OK
    assert out.splitlines()[0] == "t,x"
    assert len(out.splitlines()) == 6


def test_usage_errors_exit_64(capsys):
    assert run(["simulate", "--family", "nonsense(1)", "--path", "1", "--n", "5"], capsys)[0] == EXIT_USAGE
    assert run(["simulate", "--scenario", "garch11_sec5", "--n", "5", "--bogus"], capsys)[0] == EXIT_USAGE
    assert run(["simulate", "--scenario", "garch11_sec5"], capsys)[0] == EXIT_USAGE
    assert run([], capsys)[0] == EXIT_USAGE


def test_unknown_config_key_exits_64(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": {"scenario": "garch11_sec5"}, "simulate": {"n": 10, "steps": 3}}))
    code, _, err = run(["simulate", "--config", str(cfg)], capsys)
    assert code == EXIT_USAGE
    assert "steps" in err


def test_config_drives_simulate(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": {"family": "ingarch(1,0)", "path": ["2", "0.3"]},
                               "simulate": {"n": 20, "seed": 7}}))
    code, out, _ = run(["simulate", "--config", str(cfg)], capsys)
    assert code == EXIT_OK
    assert out.splitlines()[0] == "t,x,lambda"
    assert len(out.splitlines()) == 21


def test_estimate_round_trip(tmp_path, capsys):
    traj = tmp_path / "t.csv"
    run(["simulate", "--family", "tvar1", "--path", "0.3+0.4*u", "--n", "800", "--out", str(traj)], capsys)
    out = tmp_path / "curve.json"
    code, _, _ = run(["estimate", "--input", str(traj), "--family", "tvar1", "--contrast", "ls",
                      "--out", str(out)], capsys)
    assert code == EXIT_OK
    obj = json.loads(out.read_text())
    assert obj["schema_version"] == 1 and obj["all_converged"]
    curve = EstimateCurve.from_dict(obj)
    assert curve.theta.shape == (49, 1)
    assert EstimateCurve.from_json(curve.to_json()).to_json() == curve.to_json()
    code, csv_text, _ = run(["estimate", "--input", str(traj), "--family", "tvar1", "--contrast", "ls"], capsys)
    rows = list(csv.reader(io.StringIO(csv_text)))
    np.testing.assert_array_equal([float(r[1]) for r in rows[1:]], curve.theta[:, 0])


def test_fit_outputs_and_plots(tmp_path, returns_file, capsys):
    out = tmp_path / "fit.json"
    plots = tmp_path / "plots"
    code, _, _ = run(["fit", "--input", str(returns_file), "--out", str(out), "--plot-dir", str(plots)], capsys)
    assert code == EXIT_OK
    obj = json.loads(out.read_text())
    assert len(obj["u"]) == 49
    assert obj["param_names"] == ["c0", "c1", "d1"]
    theta = np.array(obj["theta"])
    np.testing.assert_allclose(obj["derived"]["c1+d1"], theta[:, 1] + theta[:, 2])
    assert sorted(p.name for p in plots.iterdir()) == ["c0.svg", "c1.svg", "c1_plus_d1.svg", "d1.svg"]


def test_fit_results_do_not_depend_on_plotting(tmp_path, returns_file, capsys):
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    run(["fit", "--input", str(returns_file), "--out", str(a), "--plot-dir", str(tmp_path / "p")], capsys)
    run(["fit", "--input", str(returns_file), "--out", str(b), "--plot-dir", str(tmp_path / "q"), "--no-plot"],
        capsys)
    run(["fit", "--input", str(returns_file), "--out", str(c)], capsys)
    assert a.read_bytes() == b.read_bytes() == c.read_bytes()
    assert not (tmp_path / "q").exists()


def test_fit_refuses_short_series(tmp_path, capsys):
    path = tmp_path / "short.csv"
    path.write_text("x\n0.1\n-0.2\n")
    code, _, err = run(["fit", "--input", str(path)], capsys)
    assert code == EXIT_DATA
    assert "200" in err


def test_fit_non_numeric_cell_reports_row(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("Date,Close\n2020-01-01,10\n2020-01-02,n/a\n")
    code, _, err = run(["fit", "--input", str(path)], capsys)
    assert code == EXIT_DATA
    assert "row 3" in err


def test_fit_constant_prices_are_degenerate(tmp_path, capsys):
    path = tmp_path / "flat.csv"
    path.write_text("Close\n" + "\n".join(["50.0"] * 400) + "\n")
    out = tmp_path / "flat.json"
    code, _, _ = run(["fit", "--input", str(path), "--transform", "log_return", "--out", str(out)], capsys)
    assert code == EXIT_DEGRADED
    assert json.loads(out.read_text())["any_degenerate"]


def test_missing_input_file(tmp_path, capsys):
    code, _, _ = run(["fit", "--input", str(tmp_path / "nope.csv")], capsys)
    assert code == EXIT_DATA


def test_mc_truth_oracle(tmp_path, capsys):
    out = tmp_path / "mc.json"
    code, text, _ = run(["mc", "--scenario", "garch11_sec5", "--n", "300", "--reps", "1", "--estimator", "truth",
                         "--out", str(out)], capsys)
    assert code == EXIT_OK
    rep = RmiseReport.from_json(out.read_text())
    assert rep.to_json() + "\n" == out.read_text()
    for key, vals in rep.rsmise.items():
        np.testing.assert_array_equal(vals, 0.0)
    assert text.split()[:7] == ["n", "c0_U", "c0_E", "c1_U", "c1_E", "d1_U", "d1_E"]


def test_mc_csv_table(tmp_path, capsys):
    out = tmp_path / "mc.csv"
    code, _, _ = run(["mc", "--family", "tvar1", "--path", "0.4", "--n", "300", "--n", "600", "--reps", "2",
                      "--kernel", "epanechnikov", "--out", str(out)], capsys)
    assert code == EXIT_OK
    rows = list(csv.reader(io.StringIO(out.read_text())))
    assert rows[0] == ["n", "a1_E"]
    assert [r[0] for r in rows[1:]] == ["300", "600"]


def test_mc_threads_from_environment(tmp_path, capsys, monkeypatch):
    argv = ["mc", "--family", "tvar1", "--path", "0.4", "--n", "300", "--reps", "3", "--kernel", "uniform"]
    code, one, _ = run(["--threads", "1"] + argv, capsys)
    monkeypatch.setenv("LOCSTAT_THREADS", "2")
    code2, two, _ = run(argv, capsys)
    assert code == code2 == EXIT_OK
    assert one == two


def test_check_path_and_point(capsys):
    code, out, _ = run(["check", "--scenario", "garch11_sec5"], capsys)
    obj = json.loads(out)
    assert code == EXIT_DEGRADED
    assert obj["schema_version"] == 1 and obj["ok"] is False
    assert 0 <= obj["worst_u"] <= 1
    code, out, _ = run(["check", "--family", "garch(1,1)", "--theta", "1", "0.1", "0.1"], capsys)
    obj = json.loads(out)
    assert code == EXIT_OK
    assert obj["margin"] == pytest.approx(1 - (0.1 + 3**0.5 * 0.1), abs=1e-12)
    assert run(["check", "--theta", "1", "0.1"], capsys)[0] == EXIT_USAGE


def test_tau_zero_memory_csv(capsys):
    code, out, _ = run(["tau", "--family", "tvar1", "--path", "0", "--reps", "200", "--s-max", "5",
                        "--burn-in", "20"], capsys)
    assert code == EXIT_OK
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["s", "tau_hat", "lambda_bound"]
    assert [float(r[1]) for r in rows[1:]] == [0.0] * 5


def test_tau_json(tmp_path, capsys):
    out = tmp_path / "tau.json"
    code, _, _ = run(["tau", "--family", "tvar1", "--path", "0.5", "--reps", "500", "--s-max", "4",
                      "--out", str(out)], capsys)
    obj = json.loads(out.read_text())
    assert code == EXIT_OK and obj["schema_version"] == 1
    np.testing.assert_allclose(obj["lambda_bound"], 0.5 ** np.arange(1, 5))


CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.mark.parametrize("name", ["garch11_sec5", "archinf_sec5", "ingarch10_sec5"])
def test_shipped_configs_match_builtin_scenarios(name, capsys):
    _, from_cfg, _ = run(["simulate", "--config", str(CONFIGS / f"{name}.json")], capsys)
    _, builtin, _ = run(["simulate", "--scenario", name, "--n", "1000", "--seed", "1"], capsys)
    assert from_cfg == builtin


def test_fit_config_example(tmp_path, returns_file, capsys, monkeypatch):
    prices = 100 * np.exp(np.cumsum(np.loadtxt(returns_file, delimiter=",", skiprows=1, usecols=1)))
    (tmp_path / "close.csv").write_text("Date,Close\n" + "\n".join(f"d{i},{p!r}" for i, p in
                                                                   enumerate(prices.tolist())) + "\n")
    monkeypatch.chdir(tmp_path)
    code, out, _ = run(["fit", "--config", str(CONFIGS / "fit_index.json"), "--no-plot"], capsys)
    assert code == EXIT_OK
    assert len(out.splitlines()) == 50
