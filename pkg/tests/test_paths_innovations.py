import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from locstat.exceptions import ConfigError, InvalidArgumentError
from locstat.innovations import (InnovationSpec, custom, gaussian, make_rng, open_uniform, poisson_sample,
                                 uniform_sym)
from locstat.models import builtin_scenario
from locstat.paths import ParameterPath, constant_path, parse_expr


@pytest.mark.parametrize("text, u, value", [
    ("0.5", 0.3, 0.5),
    ("0.1+0.4*u", 0.5, 0.3),
    ("1+0.5*sin(5*u)", 0.2, 1 + 0.5 * math.sin(1.0)),
    ("0.1+0.4*cos(4*u)^2", 0.0, 0.5),
    ("2.1+1*u", 1.0, 3.1),
    ("1-u", 0.25, 0.75),
])
def test_grammar(text, u, value):
    assert parse_expr(text)(u) == pytest.approx(value, abs=1e-15)


@pytest.mark.parametrize("bad", ["exp(u)", "u^2", "", "1+2*tan(u)"])
def test_grammar_rejects(bad):
    with pytest.raises(ConfigError):
        parse_expr(bad)


def test_path_eval_shapes():
    p = ParameterPath(["1", "0+0.5*u"])
    assert p.eval(0.5).shape == (2,)
    assert p.eval(np.linspace(0, 1, 7)).shape == (7, 2)
    assert p.on_grid(4).shape == (4, 2)
    np.testing.assert_allclose(p.on_grid(4)[:, 1], 0.5 * np.arange(1, 5) / 4)


def test_constant_path():
    p = constant_path([0.3, 2.0])
    assert p.is_constant()
    np.testing.assert_array_equal(p.eval(0.7), [0.3, 2.0])


@pytest.mark.parametrize("name", ["garch11_sec5", "archinf_sec5", "ingarch10_sec5"])
def test_scenario_paths_lipschitz(name):
    path = builtin_scenario(name).path
    rng = np.random.default_rng(0)
    u = rng.uniform(0, 1, 1000)
    v = rng.uniform(0, 1, 1000)
    diff = np.abs(path.eval(u) - path.eval(v))
    assert np.all(diff <= path.holder_K * np.abs(u - v)[:, None] + 1e-12)


def test_moment_norms():
    g = gaussian()
    assert g.norm(2) == pytest.approx(1.0, abs=1e-14)
    assert g.norm(4) == pytest.approx(3 ** 0.25, abs=1e-14)
    u = uniform_sym()
    assert u.norm(2) == pytest.approx(1.0, abs=1e-14)
    assert u.norm(4) ** 4 == pytest.approx(9 / 5, abs=1e-12)


def test_custom_norm_matches_table():
    # symmetric two-point law +-1 through a steep inverse-CDF table
    c = custom([0.0, 0.5 - 1e-9, 0.5 + 1e-9, 1.0], [-1.0, -1.0, 1.0, 1.0])
    assert c.norm(4) == pytest.approx(1.0, abs=1e-3)


def test_from_config_variants():
    assert InnovationSpec.from_config("uniform") == uniform_sym()
    assert InnovationSpec.from_config({"family": "normal", "sigma": 2.0}) == gaussian(2.0)
    with pytest.raises(InvalidArgumentError):
        InnovationSpec.from_config("cauchy")


def test_rng_streams_are_reproducible_and_distinct():
    a = open_uniform(make_rng(5, (1,)), 10)
    b = open_uniform(make_rng(5, (1,)), 10)
    c = open_uniform(make_rng(5, (2,)), 10)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert np.all((a > 0) & (a < 1))


@pytest.mark.parametrize("lam", [0.3, 4.0, 25.0, 200.0])
def test_poisson_mean_and_variance(lam):
    x = poisson_sample(np.full(40_000, lam), make_rng(3))
    se = math.sqrt(lam / x.size)
    assert abs(x.mean() - lam) < 4 * se
    assert abs(x.var() / lam - 1) < 0.05
    assert np.all(x >= 0) and np.all(x == np.floor(x))


@given(st.floats(1e-6, 1 - 1e-6))
def test_gaussian_ppf_monotone_symmetric(u):
    g = gaussian()
    assert g.ppf(u) == pytest.approx(-g.ppf(1 - u), abs=1e-9)
