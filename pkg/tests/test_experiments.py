import json

import numpy as np
import pytest

from locstat.exceptions import InvalidArgumentError
from locstat.experiments import (UNRELIABLE_FRACTION, McScenario, RmiseReport, ad_normality_pvalue, clt_check,
                                 paper_scenario, read_table_csv, run_mc, table_report, truth_oracle)
from locstat.innovations import make_rng
from locstat.models import Family, ModelSpec, builtin_scenario
from locstat.paths import constant_path


def ar1_scenario(**kw):
    kw.setdefault("ns", (500,))
    kw.setdefault("R", 4)
    return McScenario(ModelSpec(Family("tvar1"), constant_path([0.5])), **kw)


def noisy_oracle(traj, cfg):
    # truth plus a replication-specific offset, so errors differ across replications
    return truth_oracle(traj, cfg) + 0.01 * traj.values[:1]


def test_truth_oracle_gives_zero():
    sc = McScenario(builtin_scenario("garch11_sec5"), ns=(300,), R=1)
    rep = run_mc(sc, estimator=truth_oracle)
    np.testing.assert_array_equal(rep.rsmise[(300, "epanechnikov")], 0.0)
    assert rep.n_used[(300, "epanechnikov")] == 1


@pytest.mark.parametrize("a", [0.5, 3.0])
def test_rsmise_scale_equivariance(a):
    sc = ar1_scenario(R=3)
    base = run_mc(sc, estimator=noisy_oracle)
    scaled = run_mc(sc, estimator=noisy_oracle, error_scale=a)
    key = (500, "epanechnikov")
    assert base.rsmise[key][0] > 0
    np.testing.assert_allclose(scaled.rsmise[key], a * base.rsmise[key], rtol=1e-14)


def test_rsmise_formula():
    sc = ar1_scenario(R=3, ns=(200,))
    rep = run_mc(sc, estimator=noisy_oracle, keep_errors=True)
    errs = rep.errors[(200, "epanechnikov")]
    manual = np.sqrt(np.mean([np.mean(e[:, 0] ** 2) for e in errs.values()]))
    assert rep.value(200, "epanechnikov", "a1") == pytest.approx(manual, rel=1e-14)


@pytest.mark.slow
def test_ar1_rsmise_drops_with_n():
    rep = run_mc(ar1_scenario(ns=(1000, 4000), R=100))
    assert rep.value(4000, "epanechnikov", "a1") < rep.value(1000, "epanechnikov", "a1")


def test_reports_are_reproducible():
    sc = ar1_scenario(ns=(300, 600), R=3, kernels=("uniform", "epanechnikov"))
    assert run_mc(sc).to_json() == run_mc(sc).to_json()


def test_json_round_trip(tmp_path):
    sc = ar1_scenario(R=2, kernels=("uniform", "epanechnikov"))
    rep = run_mc(sc, keep_errors=True)
    path = tmp_path / "rep.json"
    rep.to_json(path, include_errors=True)
    back = RmiseReport.from_json(path.read_text())
    assert back.to_json(include_errors=True) == rep.to_json(include_errors=True)
    payload = json.loads(rep.to_json())
    assert payload["schema_version"] == 1
    assert "wall_clock" not in payload
    assert payload["seeds"]["master_seed"] == 0


def test_table_shape_matches_garch_layout():
    sc = paper_scenario("garch11_sec5", ns=(300, 600), R=1)
    rep = run_mc(sc, estimator=truth_oracle)
    header, ns, vals = read_table_csv(table_report(rep, "csv"))
    assert header == ["n", "c0_U", "c0_E", "c1_U", "c1_E", "d1_U", "d1_E"]
    assert ns == [300, 600]
    assert vals.shape == (2, 6)
    text = table_report(rep)
    assert text.splitlines()[0].split() == header


def test_empty_components_give_header_only():
    rep = run_mc(ar1_scenario(R=1), estimator=truth_oracle)
    assert table_report(rep, "csv", components=[]) == "n\n"
    assert table_report(rep, components=[]).strip() == "n"


def test_csv_round_trip_is_lossless():
    rep = run_mc(ar1_scenario(R=2, ns=(300, 500), kernels=("uniform", "epanechnikov")))
    header, ns, vals = read_table_csv(table_report(rep, "csv"))
    for i, n in enumerate(ns):
        for j, col in enumerate(header[1:]):
            k = "uniform" if col.endswith("_U") else "epanechnikov"
            assert vals[i, j] == rep.value(n, k, "a1")


def test_unknown_table_format():
    rep = run_mc(ar1_scenario(R=1), estimator=truth_oracle)
    with pytest.raises(InvalidArgumentError):
        table_report(rep, "html")


def test_exclusions_mark_report_unreliable():
    sc = ar1_scenario(R=10)

    def flaky(traj, cfg):
        out = truth_oracle(traj, cfg)
        if traj.values[0] > 0:
            out = out * np.nan
        return out

    rep = run_mc(sc, estimator=flaky)
    key = (500, "epanechnikov")
    dropped = len(rep.excluded[key])
    assert dropped + rep.n_used[key] == 10
    assert dropped > UNRELIABLE_FRACTION * 10
    assert rep.unreliable
    assert all(reason == "every window degenerate" for _, reason in rep.excluded[key])


def test_scenario_validation():
    m = ModelSpec(Family("tvar1"), constant_path([0.5]))
    with pytest.raises(InvalidArgumentError):
        McScenario(m, R=0)
    with pytest.raises(InvalidArgumentError):
        McScenario(m, ns=())
    with pytest.raises(InvalidArgumentError):
        McScenario(m, kernels=())
    with pytest.raises(InvalidArgumentError):
        run_mc(McScenario(m, R=1), threads=0)


def test_paper_scenario_scales():
    desk = paper_scenario("ingarch10_sec5")
    full = paper_scenario("ingarch10_sec5", full=True)
    assert (desk.R, desk.ns) == (100, (1000, 3000))
    assert (full.R, full.ns) == (1000, (1000, 3000, 10000))
    assert [k.name for k in desk.kernels] == ["uniform", "epanechnikov"]


# CLT diagnostic

def test_clt_low_power_flag():
    res = clt_check(0.5, 500, 2)
    assert res.low_power
    assert np.isfinite(res.empirical_var)
    assert np.isnan(res.normality_pvalue)


def test_clt_theoretical_variance_kernel_ratio():
    u = clt_check(0.3, 300, 2, kernel="uniform")
    e = clt_check(0.3, 300, 2, kernel="epanechnikov")
    assert e.theoretical_var / u.theoretical_var == pytest.approx(1.2, rel=1e-12)
    assert u.theoretical_var == pytest.approx(0.91 * 0.5)


@pytest.mark.slow
def test_clt_variance_at_zero():
    res = clt_check(0.0, 8000, 400)
    assert 0.7 <= res.ratio <= 1.3
    assert not res.low_power


def test_clt_rejects_unit_root():
    with pytest.raises(InvalidArgumentError):
        clt_check(1.0, 100, 10)


def test_ad_pvalue_behaviour():
    rng = make_rng(5)
    _, p_norm = ad_normality_pvalue(rng.standard_normal(400))
    _, p_exp = ad_normality_pvalue(rng.exponential(size=400))
    assert p_norm > 0.01
    assert p_exp < 1e-6
    assert np.isnan(ad_normality_pvalue(np.zeros(50))[1])
