import numpy as np
import pytest
from hypothesis import given, strategies as st

from harnesslab import bridges as br
from harnesslab import harnesses as hn
from harnesslab import levy_models as lm
from harnesslab.errors import InsufficientData, PinNotOnGrid, SpecError

UNIT = lm.TimeGrid(3.0, 3)
GRID = lm.TimeGrid(2.0, 64)
finite = st.floats(-1e3, 1e3)


def test_residual_arithmetic_examples():
    H = np.array([0.0, 3.0, 4.0, 6.0])
    assert hn.harness_residual(H, 0.0, 1.0, 2.0, UNIT).value == 1.0
    assert hn.slope_residual(H, 0.0, 1.0, 2.0, 3.0, UNIT).value == -1.0


@given(finite, finite)
def test_affine_paths_have_zero_residuals(a, b):
    H = a + b * GRID.times
    tol = 1e-12 * (1 + abs(a) + abs(b))
    assert abs(hn.harness_residual(H, 0.25, 0.5, 1.5, GRID).value) <= tol
    assert abs(hn.slope_residual(H, 0.25, 0.5, 1.0, 1.5, GRID).value) <= tol


@given(st.lists(finite, min_size=65, max_size=65),
       st.sampled_from([(0.25, 0.5, 0.75), (0.125, 1.0, 2.0), (0.0, 0.03125, 1.96875)]))
def test_residual_equals_scaled_quotient_gap(vals, tr):
    H = np.array(vals)
    s, t, u = tr
    lhs = hn.harness_residual(H, s, t, u, GRID).value
    Hs, Ht, Hu = H[GRID.index(s)], H[GRID.index(t)], H[GRID.index(u)]
    rhs = (t - s) * (u - t) / (u - s) * ((Ht - Hs) / (t - s) - (Hu - Ht) / (u - t))
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, np.max(np.abs(H)))


def test_degenerate_times_are_rejected():
    H = np.zeros(65)
    with pytest.raises(SpecError):
        hn.harness_residual(H, 0.5, 0.5, 1.0, GRID)
    with pytest.raises(SpecError):
        hn.slope_residual(H, 0.1, 0.5, 0.5, 1.0, GRID)
    with pytest.raises(PinNotOnGrid):
        hn.harness_residual(H, 0.1, 0.3, 1.0, GRID)
    with pytest.raises(SpecError):
        hn.harness_residual(H, 0.25, 0.5, 1.0)


def test_difference_quotient():
    H = 0.5 * GRID.times
    assert hn.difference_quotient(H, 0.25, 1.0, GRID) == 0.5


# ---------------------------------------------------- forward / reverse

def test_forward_martingale_is_shared_with_bridges():
    v = lm.sample_paths(lm.brownian(), GRID, 0.0, 3, 10)
    assert np.array_equal(hn.martingale_from_harness(v, 1.0, GRID), br.decompose(v, 1.0, GRID).martingale)


@given(finite, finite, st.sampled_from([(0.0, 1.0), (0.5, 2.0), (0.25, 0.5)]))
def test_affine_forward_and_reverse_are_constant(a, b, pins):
    tau, T = pins
    H = a + b * GRID.times
    tol = 1e-10 * (1 + abs(a) + abs(b))
    M = hn.martingale_from_harness(H, T, GRID)
    N = hn.reverse_martingale_from_harness(H, tau, T, GRID)
    assert np.ptp(M) <= tol and np.ptp(N) <= tol
    assert abs(N[-1] - H[GRID.index(T)]) <= tol


@given(st.lists(finite, min_size=65, max_size=65))
def test_reverse_martingale_ends_at_H_T(vals):
    H = np.array(vals)
    N = hn.reverse_martingale_from_harness(H, 0.5, 1.5, GRID)
    assert N[-1] == H[GRID.index(1.5)]
    assert N.shape == (GRID.index(1.5) - GRID.index(0.5),)


def test_reverse_martingale_rejects():
    with pytest.raises(SpecError):
        hn.reverse_martingale_from_harness(np.zeros(65), 1.0, 1.0, GRID)
    with pytest.raises(PinNotOnGrid):
        hn.reverse_martingale_from_harness(np.zeros(65), 0.1, 1.0, GRID)


# --------------------------------------------------------------- suites

def test_zero_noise_suite_has_zero_z():
    rs = hn.harness_test(lm.ProcessSpec(), n_paths=2000, seed=1)
    assert rs.passed and all(r.z == 0 for r in rs.reports)


@pytest.mark.parametrize("idx,name", list(enumerate(["brownian", "gamma", "compound_poisson"])))
def test_harness_suite_small(specs, idx, name):
    rs = hn.harness_test(specs[name], n_paths=30_000, seed=idx)
    assert rs.passed and len(rs.reports) == 33


def test_uncentered_spec_is_still_a_harness():
    spec = lm.ProcessSpec(drift=1.5, gaussian_var=0.3, jumps=lm.GammaSubordinator(2.0, 1.0))
    assert hn.harness_test(spec, n_paths=30_000, seed=9).passed


def test_planted_bias_is_detected():
    rs = hn.harness_test(lm.brownian(), n_paths=30_000, seed=2, planted_bias=0.1)
    assert not rs.passed


def test_slope_quads_and_identity():
    rs = hn.harness_test(lm.brownian(), triples=[(0.25, 0.5, 0.75)], quads=[(0.25, 0.5, 0.625, 0.75)],
                         n_paths=30_000, seed=4)
    assert rs.passed and len(rs.reports) == 22
    spec = lm.center(lm.ProcessSpec(jumps=lm.CompoundPoisson(2.0, lm.ExponentialLaw(1.0))))
    assert hn.slope_identity_test(spec, [(0.25, 0.5, 1.0), (0.5, 0.75, 1.0)], n_paths=30_000, seed=5).passed


def test_reverse_suite_brownian_small():
    rs = hn.reverse_martingale_test(lm.brownian(), [(0.25, 0.5, 0.75), (0.5, 0.75, 1.0)],
                                    n_paths=30_000, seed=6)
    assert rs.passed and len(rs.reports) == 14


def test_suite_is_deterministic():
    a = hn.harness_test(lm.brownian(), n_paths=2000, seed=7).to_json()
    b = hn.harness_test(lm.brownian(), n_paths=2000, seed=7).to_json()
    assert a == b


def test_suite_rejects_bad_triples():
    with pytest.raises(SpecError):
        hn.harness_test(lm.brownian(), triples=[(0.5, 0.25, 0.75)], n_paths=2000)
    with pytest.raises(SpecError):
        hn.harness_test(lm.brownian(), triples=[(0.0, 0.25, 0.75)], n_paths=2000)


# ------------------------------------------------------------- binned

def test_binned_estimate_on_affine_paths():
    rng = np.random.default_rng(0)
    a, b = rng.standard_normal((2, 5000, 1))
    H = a + b * GRID.times
    est = hn.conditional_mean_estimate(H, 0.25, 0.5, 0.75, bins=4, grid=GRID)
    assert np.nanmax(np.abs(est.deviation)) <= 1e-12


@pytest.mark.parametrize("idx,name", list(enumerate(["brownian", "gamma"])))
def test_binned_estimate(specs, idx, name):
    grid = lm.TimeGrid(1.0, 4)
    v = lm.sample_paths(specs[name], grid, 0.0, 10 + idx, 400_000)
    est = hn.conditional_mean_estimate(v, 0.25, 0.5, 0.75, bins=8, grid=grid)
    assert est.passed(4.0)
    assert est.counts.sum() == 400_000


def test_binned_estimate_insufficient():
    with pytest.raises(InsufficientData):
        hn.conditional_mean_estimate(np.zeros((30, 65)) + GRID.times, 0.25, 0.5, 0.75, grid=GRID)
    with pytest.raises(InsufficientData):
        hn.conditional_mean_estimate(np.zeros(65), 0.25, 0.5, 0.75, grid=GRID)
