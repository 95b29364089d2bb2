import json
import math
from statistics import NormalDist

import numpy as np
import pytest
from hypothesis import given, strategies as st

from harnesslab import mcstats as mc
from harnesslab.errors import InsufficientSamples
from harnesslab.kernels import RNG_VERSION

from oracles import standard_normal_tanh_moment


def _normals(seed, n, d=1):
    return np.random.default_rng(seed).standard_normal((n, d))


# ------------------------------------------------------------------ seeds

def test_child_seeds_are_pure_and_distinct():
    s = mc.RngSeed(42)
    assert s.child("main") == mc.RngSeed(42).child("main")
    kids = {s.child(lbl).root for lbl in ("main", "pilot", "a", "b", 0, 1, 2)}
    assert len(kids) == 7
    assert s.version == RNG_VERSION


@pytest.mark.parametrize("bad", [-1, 2**64])
def test_seed_range(bad):
    with pytest.raises(ValueError):
        mc.RngSeed(bad)


def test_seed_version_is_checked():
    with pytest.raises(ValueError):
        mc.RngSeed(1, version="mt19937")


def test_path_streams_are_uncorrelated():
    # adjacent path indices must not share structure
    from harnesslab import levy_models as lm
    grid = lm.TimeGrid(1.0, 1)
    inc = lm.sample_paths(lm.brownian(), grid, 0.0, 7, 20_000)[:, 1]
    r = np.corrcoef(inc[:-1], inc[1:])[0, 1]
    assert abs(r) * math.sqrt(inc.size) <= 4.0


# --------------------------------------------------------------- family

@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_family_values_are_bounded(seed, d):
    rng = np.random.default_rng(seed)
    Z = rng.standard_cauchy((200, d)) * 1e3
    fam = mc.TestFunctionFamily.from_pilot(rng.standard_normal((50, d)))
    G = fam.evaluate(Z)
    assert G.shape == (200, 1 + d + d * (d - 1) // 2) == (200, len(fam))
    assert np.all(np.abs(G) <= 1.0)
    assert np.all(G[:, 0] == 1.0)


def test_family_depends_only_on_declared_coordinates():
    fam = mc.TestFunctionFamily([0.0, 0.0], [1.0, 1.0], names=["a", "b"])
    assert fam.labels == ["1", "tanh(a)", "tanh(b)", "tanh(a)*tanh(b)"]
    with pytest.raises(ValueError):
        fam.evaluate(np.zeros((5, 3)))


def test_family_zero_scale_is_guarded():
    fam = mc.TestFunctionFamily.from_pilot(np.ones((10, 1)))
    assert np.all(np.isfinite(fam.evaluate(np.zeros((3, 1)))))


# ------------------------------------------------------- orthogonality

def test_zero_samples_give_zero_z():
    Z = _normals(1, 2000, 2)
    fam = mc.TestFunctionFamily.from_pilot(Z)
    reps = mc.orthogonality_test(np.zeros(2000), Z, fam)
    assert all(r.estimate == 0 and r.z == 0 and r.passed for r in reps)


def test_independent_null_passes():
    X = _normals(2, 10_000)[:, 0]
    Z = _normals(3, 10_000, 2)
    reps = mc.orthogonality_test(X, Z, mc.TestFunctionFamily.from_pilot(Z), threshold=4.0)
    assert all(abs(r.z) <= 4 for r in reps)


def test_planted_dependence_is_detected():
    Z = _normals(4, 10_000)
    fam = mc.TestFunctionFamily([0.0], [1.0])
    reps = mc.orthogonality_test(Z[:, 0], Z, fam, threshold=4.0)
    tanh_rep = reps[1]
    assert not tanh_rep.passed and tanh_rep.z > 4
    assert tanh_rep.estimate == pytest.approx(standard_normal_tanh_moment(), abs=0.03)
    assert standard_normal_tanh_moment() == pytest.approx(0.6057, abs=1e-3)


def test_too_few_samples():
    with pytest.raises(InsufficientSamples):
        mc.orthogonality_test(np.zeros(999), np.zeros((999, 1)), mc.TestFunctionFamily([0.0], [1.0]))


def test_length_mismatch():
    with pytest.raises(ValueError):
        mc.orthogonality_test(np.zeros(1000), np.zeros((1001, 1)), mc.TestFunctionFamily([0.0], [1.0]))


@given(st.floats(-1e3, 1e3, allow_nan=False), st.floats(0.0, 1e3, allow_nan=False))
def test_report_invariants(est, se):
    z = mc.z_score(est, se)
    if se > 0:
        assert z == est / se
    elif est == 0:
        assert z == 0
    else:
        assert math.isinf(z)


def test_report_json_layout():
    X = _normals(5, 1000)[:, 0]
    Z = _normals(6, 1000)
    rs = mc.ReportSet(threshold=4.0)
    rs.extend(mc.orthogonality_test(X, Z, mc.TestFunctionFamily([0.0], [1.0]), label="demo"))
    d = json.loads(rs.to_json())
    assert set(d["summary"]) == {"n_tests", "threshold", "n_fail", "pass"}
    assert d["summary"]["n_tests"] == 2
    keys = {"label", "estimate", "stderr", "z", "n", "threshold", "pass", "discarded"}
    assert all(set(r) == keys for r in d["reports"])
    assert d["reports"][0]["label"] == "demo:1"
    assert rs.to_json() == rs.to_json()


# -------------------------------------------------------- thresholds & CIs

def test_familywise_threshold_examples():
    assert mc.familywise_threshold(1, 0.05) == pytest.approx(1.959964, abs=1e-5)
    # Bonferroni per-test level 1e-4, two-sided: upper tail 5e-5
    assert mc.familywise_threshold(100, 0.01) == pytest.approx(NormalDist().inv_cdf(1 - 5e-5), abs=1e-9)
    assert mc.familywise_threshold(100, 0.01) == pytest.approx(3.8906, abs=1e-3)
    assert mc.familywise_threshold(1, 1 - 1e-12) < 1e-10


@pytest.mark.parametrize("n,a", [(0, 0.1), (1, 0.0), (1, 1.0)])
def test_familywise_threshold_rejects(n, a):
    with pytest.raises(ValueError):
        mc.familywise_threshold(n, a)


@given(st.integers(1, 10_000), st.integers(1, 10_000), st.floats(1e-6, 0.5))
def test_bonferroni_monotone(n1, n2, alpha):
    lo, hi = sorted((n1, n2))
    assert mc.familywise_threshold(lo, alpha) <= mc.familywise_threshold(hi, alpha)


def test_mean_ci_examples():
    assert mc.mean_ci(np.full(10, 3.0)) == (3.0, 0.0)
    _, hw = mc.mean_ci(_normals(7, 10_000)[:, 0])
    assert hw == pytest.approx(0.0196, rel=0.1)
    with pytest.raises(InsufficientSamples):
        mc.mean_ci([1.0])


def test_variance_and_se_covers_truth():
    v, se = mc.variance_and_se(_normals(8, 50_000)[:, 0] * 2.0)
    assert abs(v - 4.0) <= 4 * se
    assert se == pytest.approx(4.0 * math.sqrt(2 / 50_000), rel=0.05)
