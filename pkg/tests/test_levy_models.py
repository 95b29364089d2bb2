"""Process specs, exponents, moments and the samplers."""

import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from harnesslab import levy_models as lm
from harnesslab.errors import IntegrabilityError, PinNotOnGrid, SpecError
from harnesslab.mcstats import RngSeed, mean_and_se, variance_and_se

FAMILIES = {
    "brownian": lm.brownian(),
    "brownian_drift": lm.brownian(var=2.0, drift=0.3),
    "cp_normal_gauss": lm.ProcessSpec(gaussian_var=0.5, jumps=lm.CompoundPoisson(1.0, lm.NormalLaw(0.0, 1.0))),
    "cp_exp_centered": lm.center(lm.ProcessSpec(jumps=lm.CompoundPoisson(2.0, lm.ExponentialLaw(1.0)))),
    "cp_two_point": lm.ProcessSpec(drift=0.1, jumps=lm.CompoundPoisson(1.5, lm.TwoPointLaw(0.3, 1.0, -2.0))),
    "gamma": lm.ProcessSpec(jumps=lm.GammaSubordinator(1.0, 1.0)),
    "gamma_centered": lm.center(lm.ProcessSpec(jumps=lm.GammaSubordinator(2.0, 4.0))),
}

spec_strategy = st.sampled_from(sorted(FAMILIES)).map(FAMILIES.get)


# ----------------------------------------------------------------- exponent

def test_gaussian_exponent():
    assert lm.char_exponent(lm.brownian(), 2.0) == pytest.approx(2.0 + 0j, abs=1e-15)


@given(spec_strategy)
def test_exponent_vanishes_at_zero(spec):
    assert lm.char_exponent(spec, 0.0) == 0


def test_gamma_exponent_known_value():
    phi = lm.char_exponent(lm.ProcessSpec(jumps=lm.GammaSubordinator(1.0, 1.0)), 1.0)
    assert phi == pytest.approx(complex(0.5 * math.log(2), -math.pi / 4), abs=1e-15)
    assert phi == pytest.approx(cmath.log(1 - 1j), abs=1e-15)


@given(spec_strategy, st.floats(-5, 5))
def test_exponent_hermitian(spec, lam):
    assert lm.char_exponent(spec, -lam) == pytest.approx(np.conj(lm.char_exponent(spec, lam)), abs=1e-12)


@pytest.mark.parametrize("name", sorted(FAMILIES))
def test_empirical_characteristic_function(name):
    spec = FAMILIES[name]
    n = 100_000
    x = lm.sample_increments(spec, 1.0, n, seed=11)
    for lam in (-2, -1, -0.5, 0.5, 1, 2):
        emp = np.mean(np.exp(1j * lam * x))
        th = lm.char_function(spec, 1.0, lam)
        assert abs(emp.real - th.real) <= 4 / math.sqrt(n)
        assert abs(emp.imag - th.imag) <= 4 / math.sqrt(n)


# ----------------------------------------------------------------- moments

def test_mean_rate_examples():
    assert lm.mean_rate(lm.brownian(drift=0.3)) == 0.3
    assert lm.mean_rate(lm.ProcessSpec(jumps=lm.CompoundPoisson(2.0, lm.NormalLaw(0.0, 1.0)))) == 0.0
    assert lm.mean_rate(lm.ProcessSpec(jumps=lm.GammaSubordinator(2.0, 4.0))) == 0.5


def test_gamma_mean_by_sampling():
    x = lm.sample_increments(lm.ProcessSpec(jumps=lm.GammaSubordinator(2.0, 4.0)), 1.0, 1_000_000, seed=2)
    m, se = mean_and_se(x)
    assert abs(m - 0.5) <= 4 * se


def test_center_examples():
    assert lm.center(lm.brownian(drift=0.3)) == lm.brownian()
    assert lm.center(lm.ProcessSpec(jumps=lm.GammaSubordinator(1.0, 1.0))).drift == -1.0


@given(spec_strategy)
def test_center_idempotent_and_exact(spec):
    c = lm.center(spec)
    assert lm.center(c) == c
    assert lm.mean_rate(c) == 0.0
    assert c.gaussian_var == spec.gaussian_var and c.jumps == spec.jumps


# ------------------------------------------------------------ validation

def test_rejects_negative_variance():
    with pytest.raises(SpecError):
        lm.ProcessSpec(gaussian_var=-1.0)


@pytest.mark.parametrize("kind", ["cauchy", "stable"])
def test_rejects_non_integrable_jumps(kind):
    with pytest.raises(IntegrabilityError):
        lm.spec_from_dict({"jumps": {"kind": kind}})


def test_rejects_unknown_fields():
    with pytest.raises(SpecError, match="unknown"):
        lm.spec_from_dict({"drift": 0.0, "sigma": 1.0})


@given(spec_strategy)
def test_json_round_trip(spec):
    assert lm.spec_from_dict(lm.spec_to_dict(spec)) == spec


def test_grid_pins():
    g = lm.TimeGrid(1.0, 8, pinned=(0.25, 0.5))
    assert g.index(0.375) == 3
    with pytest.raises(PinNotOnGrid):
        g.index(0.3)
    with pytest.raises(PinNotOnGrid):
        lm.TimeGrid(1.0, 8, pinned=(0.3,))
    with pytest.raises(SpecError):
        lm.TimeGrid(1.0, 0)


@given(st.lists(st.sampled_from([0.1, 0.2, 0.25, 0.3, 0.5, 0.75, 0.9]), min_size=1, max_size=4))
def test_covering_grid_contains_all_times(times):
    g = lm.TimeGrid.covering(times, 1.0)
    for t in times:
        g.index(t)


# --------------------------------------------------------------- sampling

def test_zero_spec_gives_constant_paths():
    v = lm.sample_paths(lm.ProcessSpec(), lm.TimeGrid(1.0, 16), 1.5, 0, 10)
    assert np.all(v == 1.5)
    assert lm.sample_increment(lm.ProcessSpec(), 0.1, 0) == 0.0


@given(spec_strategy, st.integers(0, 2**64 - 1))
def test_start_point_and_determinism(spec, root):
    g = lm.TimeGrid(1.0, 8)
    a = lm.sample_path(spec, g, -0.7, root, path_index=3)
    b = lm.sample_path(spec, g, -0.7, RngSeed(root), path_index=3)
    assert a.values[0] == -0.7
    np.testing.assert_array_equal(a.values, b.values)


@pytest.mark.parametrize("name", ["cp_exp_centered", "gamma_centered"])
def test_block_size_and_workers_do_not_change_paths(name):
    spec, g = FAMILIES[name], lm.TimeGrid(1.0, 16)
    a = lm.sample_paths(spec, g, 0.0, 4, 1000, block_paths=1000)
    b = lm.sample_paths(spec, g, 0.0, 4, 1000, block_paths=37, workers=3)
    c = lm.sample_paths(spec, g, 0.0, 4, 500, path_offset=500, block_paths=64)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(a[500:], c)


def test_columns_select_nodes():
    spec, g = FAMILIES["cp_two_point"], lm.TimeGrid(1.0, 16)
    a = lm.sample_paths(spec, g, 0.0, 4, 300)
    b = lm.sample_paths(spec, g, 0.0, 4, 300, columns=[4, 16], block_paths=7)
    np.testing.assert_array_equal(a[:, [4, 16]], b)


@pytest.mark.parametrize("name", sorted(FAMILIES))
def test_increment_mean_and_variance(name):
    spec = FAMILIES[name]
    x = lm.sample_increments(spec, 0.01, 1_000_000, seed=5)
    m, se = mean_and_se(x)
    v, sv = variance_and_se(x)
    assert abs(m - 0.01 * lm.mean_rate(spec)) <= 4 * se
    assert abs(v - 0.01 * lm.variance_rate(spec)) <= 4 * sv


def test_unit_variance_brownian_increments():
    x = lm.sample_increments(lm.brownian(), 1.0, 1_000_000, seed=6)
    v, sv = variance_and_se(x)
    assert abs(v - 1.0) <= 4 * sv


@pytest.mark.parametrize("name", sorted(FAMILIES))
def test_terminal_variance_of_paths(name):
    spec = FAMILIES[name]
    v = lm.sample_paths(spec, lm.TimeGrid(2.0, 32), 0.0, 8, 100_000)[:, -1]
    var, se = variance_and_se(v)
    assert abs(var - 2.0 * lm.variance_rate(spec)) <= 4 * se


@pytest.mark.parametrize("name", ["cp_two_point", "gamma", "cp_normal_gauss"])
def test_increment_additivity(name):
    spec = FAMILIES[name]
    n = 100_000
    one = lm.sample_increments(spec, 1.0, n, seed=9)
    ten = lm.sample_paths(spec, lm.TimeGrid(1.0, 10), 0.0, 10, n)[:, -1]
    for k in (1, 2, 3):
        a, b = one**k, ten**k
        se = math.sqrt(a.var() / n + b.var() / n)
        assert abs(a.mean() - b.mean()) <= 4 * se
