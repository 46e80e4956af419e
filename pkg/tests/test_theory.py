import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy import special

from locstat.estimator import ThetaBox
from locstat.exceptions import InadmissibleError, InvalidArgumentError
from locstat.innovations import uniform_sym
from locstat.kernels import bandwidth
from locstat.models import Family, ModelSpec, builtin_scenario
from locstat.paths import constant_path
from locstat.theory import (LipschitzProfile, ar1_asymptotic_sd, check_admissible, estimate_tau,
                            lambda_bound, lipschitz_profile)

SQRT3 = math.sqrt(3.0)


def ar1(theta):
    return ModelSpec(Family("tvar1"), constant_path([theta]))


# admissibility arithmetic

def test_garch_point_margin():
    res = check_admissible("garch(1,1)", [1.0, 0.1, 0.1])
    assert res.ok
    assert res.margin == pytest.approx(1 - (0.1 + SQRT3 * 0.1), abs=1e-9)


def test_garch_sec5_worst_point():
    res = check_admissible("garch(1,1)", [1.0, 0.5, 0.5])
    assert not res.ok
    assert res.value == pytest.approx(0.5 + 0.5 * SQRT3, abs=1e-9)


def test_garch_sec5_path_is_flagged_with_worst_u():
    res = check_admissible(builtin_scenario("garch11_sec5"))
    assert not res.ok
    assert 0.0 <= res.worst_u <= 1.0
    # the grid maximum of d1 + sqrt(3) c1 along the curve
    u = np.linspace(0, 1, 1000)
    v = 0.1 + 0.4 * u + SQRT3 * (0.1 + 0.4 * np.cos(4 * u) ** 2)
    assert res.value == pytest.approx(v.max(), abs=1e-9)
    assert res.worst_u == pytest.approx(u[v.argmax()])


def test_arma_unit_root_rejected():
    res = check_admissible(Family("tvarma", 1, 0), [-1.0, 1.0])
    assert not res.ok


def test_ingarch_margin():
    res = check_admissible("ingarch(1,1)", [1.0, 0.3, 0.5])
    assert res.ok
    assert res.margin == pytest.approx(0.2, abs=1e-9)


def test_uniform_innovations_change_the_garch_constant():
    xi = uniform_sym(SQRT3)
    res = check_admissible("garch(1,1)", [1.0, 0.1, 0.1], innovations=xi)
    assert res.value == pytest.approx(0.1 + math.sqrt(9 / 5) * 0.1, abs=1e-9)


def test_box_uses_its_corners():
    box = ThetaBox([0.5, 0.0, 0.0], [2.0, 0.2, 0.3])
    res = check_admissible("garch(1,1)", box)
    assert res.value == pytest.approx(0.3 + SQRT3 * 0.2, abs=1e-9)


def test_check_needs_a_parameter_set():
    with pytest.raises(InvalidArgumentError):
        check_admissible("garch(1,1)")
    with pytest.raises(InvalidArgumentError):
        check_admissible("garch(1,1)", [1.0, 0.1])


@given(st.floats(0.0, 0.6), st.floats(0.0, 0.6), st.floats(0.0, 0.3), st.floats(0.0, 0.3))
def test_garch_check_is_monotone(c, d, dc, dd):
    before = check_admissible("garch(1,1)", [1.0, c, d])
    after = check_admissible("garch(1,1)", [1.0, c + dc, d + dd])
    assert after.value >= before.value
    if not before.ok:
        assert not after.ok


@given(st.lists(st.floats(-1.5, 1.5).map(lambda v: round(v, 3)), min_size=1, max_size=3))
def test_arma_root_check_matches_unit_circle(phi):
    fam = Family("tvarma", len(phi), 0)
    res = check_admissible(fam, list(phi) + [1.0])
    z = np.exp(2j * np.pi * np.arange(2048) / 2048)
    poly = 1 + sum(p * z ** (i + 1) for i, p in enumerate(phi))
    if res.ok:
        assert np.min(np.abs(poly)) > 1e-7
    # a root inside the open disk forces rejection
    roots = np.roots(np.r_[phi[::-1], 1.0]) if any(phi) else np.array([])
    if roots.size and np.min(np.abs(roots)) < 1 - 1e-6:
        assert not res.ok


# Lipschitz profiles and lambda_s

def test_ar1_box_profile():
    prof = lipschitz_profile("tvar1", ThetaBox([-0.7], [0.7]))
    assert prof.b[0] == pytest.approx(0.7)
    assert np.all(prof.b[1:] == 0)
    assert prof.B0 == pytest.approx(0.7)


def test_power_law_profile_sum():
    J = 10_000
    prof = lipschitz_profile("tvarinf", [0.2, 2.5, 1.0], J=J)
    brute = 0.2 * np.sum(np.arange(1, J + 1, dtype=float) ** -2.5)
    assert abs(prof.B0 - brute) < 1e-6
    assert prof.B0 >= 0.2 * special.zeta(2.5) - 1e-12


def test_divergent_power_law_is_refused():
    with pytest.raises(InadmissibleError):
        lipschitz_profile("tvarinf", [0.2, 1.0, 1.0])


def test_garch_profile_is_geometric():
    prof = lipschitz_profile("garch(1,1)", [1.0, 0.1, 0.5], J=60)
    j = np.arange(1, 41)
    np.testing.assert_allclose(prof.b[:40], SQRT3 * 0.1 * 0.5 ** (j - 1), rtol=1e-12)
    # the expansion stops once terms drop below 1e-14
    assert np.all(prof.b[40:] < 1e-12)
    assert prof.B0 == pytest.approx(SQRT3 * 0.1 / 0.5, abs=1e-12)


def test_lambda_at_lag_one():
    prof = lipschitz_profile("garch(1,1)", [1.0, 0.1, 0.3], J=50)
    assert lambda_bound(prof, 1) == pytest.approx(prof.B0 + prof.tail(1))


def test_lambda_ar1_is_geometric():
    prof = lipschitz_profile("tvar1", [0.5])
    s = np.arange(1, 30)
    np.testing.assert_allclose(lambda_bound(prof, s), 0.5 ** s, rtol=1e-12)


@pytest.mark.parametrize("kappa", [1.5, 2.0])
def test_lambda_power_law_slope(kappa):
    prof = lipschitz_profile("tvarinf", [0.2, kappa, 1.0], J=1000)
    s = np.unique(np.geomspace(100, 10_000, 15).astype(int))
    lam = lambda_bound(prof, s)
    slope = np.polyfit(np.log(s), np.log(lam), 1)[0]
    assert abs(slope - (1 - kappa)) <= 0.15


def test_lambda_refuses_non_contraction():
    prof = lipschitz_profile("tvar1", [0.5])
    bad = LipschitzProfile(prof.b, 1.0, prof.C0, prof.J, 0.0)
    with pytest.raises(InadmissibleError):
        lambda_bound(bad, 3)
    with pytest.raises(InvalidArgumentError):
        lambda_bound(prof, 0)


def test_lambda_vanishes_without_contraction_mass():
    prof = LipschitzProfile(np.zeros(5), 0.0, 1.0, 5, 0.0)
    np.testing.assert_array_equal(lambda_bound(prof, np.arange(1, 10)), 0.0)


@given(st.floats(0.0, 0.4), st.floats(0.0, 0.5))
def test_lambda_nonincreasing(c, d):
    prof = lipschitz_profile("garch(1,1)", [1.0, c, d], J=200)
    assume(prof.B0 < 1)
    lam = lambda_bound(prof, np.arange(1, 60))
    assert np.all(lam >= 0)
    assert np.all(np.diff(lam) <= 1e-15)


# coupling diagnostic

def test_tau_zero_memory():
    est = estimate_tau(ar1(0.0), 0.5, s_max=10, R=200, burn_in=50)
    assert np.all(est.tau_hat < 1e-12)


def test_tau_ar1_ratio():
    est = estimate_tau(ar1(0.5), 0.5, s_max=11, p=2, R=10_000, burn_in=200, seed=3)
    ratio = est.tau_hat[:-1] / est.tau_hat[1:]
    assert np.all(np.abs(ratio - 2.0) <= 0.4)


def test_tau_ar1_matches_exact_law():
    theta, R = 0.6, 4000
    est = estimate_tau(ar1(theta), 0.5, s_max=8, p=2, R=R, burn_in=300, seed=11)
    # X_0 - X'_0 of two independent stationary copies has variance 2 / (1 - theta^2)
    d0 = math.sqrt(2.0 / (1 - theta**2))
    exact = theta ** est.s * d0
    # tau^2 is a mean of theta^{2s} D^2 with D^2 ~ d0^2 chi2_1, so sd(tau^2) = sqrt(2) exact^2 / sqrt(R)
    se_sq = math.sqrt(2.0) * exact**2 / math.sqrt(R)
    assert np.all(np.abs(est.tau_hat**2 - exact**2) <= 3 * se_sq)


def test_tau_is_reproducible_and_bounded():
    m = ModelSpec(Family("tvgarch", 1, 1), constant_path([1.0, 0.1, 0.3]))
    a = estimate_tau(m, 0.5, s_max=6, R=300, burn_in=100, seed=5)
    b = estimate_tau(m, 0.5, s_max=6, R=300, burn_in=100, seed=5)
    np.testing.assert_array_equal(a.tau_hat, b.tau_hat)
    assert np.all(a.tau_hat >= 0)
    assert np.all(np.diff(a.lambda_bound) <= 0)


def test_tau_for_counts():
    m = ModelSpec(Family("tvingarch", 1, 1), constant_path([1.0, 0.3, 0.3]))
    est = estimate_tau(m, 0.5, s_max=15, R=500, burn_in=100, seed=1)
    assert est.tau_hat[-1] < est.tau_hat[0]


def test_tau_argument_checks():
    with pytest.raises(InvalidArgumentError):
        estimate_tau(ar1(0.5), 0.5, p=3)
    with pytest.raises(InvalidArgumentError):
        estimate_tau(ar1(0.5), 0.5, R=10)


# tvAR(1) asymptotic standard deviation

def test_ar1_sd_examples():
    n = 2000
    h = bandwidth(n, 0.35)
    assert ar1_asymptotic_sd(0.0, "uniform", n) == pytest.approx(math.sqrt(0.5 / (n * h)))
    assert ar1_asymptotic_sd(0.5, "epanechnikov", n) == pytest.approx(math.sqrt(0.45 / (n * h)))


def test_ar1_sd_shrinks_toward_unit_root():
    vals = [ar1_asymptotic_sd(t, "uniform", 1000) for t in (0.0, 0.5, 0.9, 0.99, 0.9999)]
    assert np.all(np.diff(vals) < 0)
    with pytest.raises(InadmissibleError):
        ar1_asymptotic_sd(1.0, "uniform", 1000)
