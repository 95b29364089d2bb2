"""Monte Carlo statistics: seeds, test-function families, orthogonality tests.

A conditional-expectation identity ``E[X | G] = 0`` is checked through the
family of moment conditions ``E[X g(Z)] = 0`` where ``Z`` collects the
G-measurable coordinates and ``g`` ranges over bounded functions.  Each
condition becomes a z-test; a suite passes when every ``|z|`` is below a
Bonferroni threshold.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .errors import InsufficientSamples
from .kernels import RNG_VERSION, _philox

MIN_SAMPLES = 1000
DEFAULT_THRESHOLD = 4.0
PILOT_PATHS = 10_000


@dataclass(frozen=True)
class RngSeed:
    """Root of a counter-based random stream family.

    Path ``i`` of a simulation keyed by ``root`` draws from Philox4x32-10 with
    key ``root`` and counters carrying ``i``; nothing is shared between paths,
    so a path is identical whatever the block size or worker count.
    """

    root: int
    version: str = RNG_VERSION

    def __post_init__(self):
        if not 0 <= int(self.root) < 2**64:
            raise ValueError(f"seed root must be a 64-bit unsigned integer, got {self.root}")
        if self.version != RNG_VERSION:
            raise ValueError(f"unsupported RNG version {self.version!r}")
        object.__setattr__(self, "root", int(self.root))

    def child(self, label) -> RngSeed:
        """Derive an independent root for a named sub-experiment."""
        if isinstance(label, str):
            tag = int.from_bytes(hashlib.blake2b(label.encode(), digest_size=4).digest(), "little")
        else:
            tag = int(label) & 0xFFFFFFFF
        k0, k1 = _philox.split_key(self.root)
        x0, x1, _, _ = _philox.philox4x32(
            np.uint64(tag), np.uint64(0), _philox.TAG_CHILD, _philox.TAG_CHILD, k0, k1)
        return RngSeed(int(x0) | (int(x1) << 32))


def as_seed(seed) -> RngSeed:
    return seed if isinstance(seed, RngSeed) else RngSeed(int(seed))


@dataclass
class OrthogonalityReport:
    label: str
    estimate: float
    stderr: float
    z: float
    n: int
    threshold: float
    passed: bool
    discarded: int = 0

    def to_dict(self):
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


def z_score(estimate, stderr):
    if stderr > 0:
        return estimate / stderr
    if estimate == 0:
        return 0.0
    return math.copysign(math.inf, estimate)


@dataclass
class ReportSet:
    reports: list = field(default_factory=list)
    threshold: float = DEFAULT_THRESHOLD

    @property
    def n_fail(self):
        return sum(not r.passed for r in self.reports)

    @property
    def passed(self):
        return self.n_fail == 0

    def extend(self, reports):
        self.reports.extend(reports)

    def max_abs_z(self):
        return max((abs(r.z) for r in self.reports), default=0.0)

    def summary(self):
        return {"n_tests": len(self.reports), "threshold": self.threshold,
                "n_fail": self.n_fail, "pass": self.passed}

    def to_dict(self):
        return {"reports": [r.to_dict() for r in self.reports], "summary": self.summary()}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


class TestFunctionFamily:
    """Bounded test functions of standardized conditioning coordinates.

    The family is ``{1} ∪ {tanh(z_i)} ∪ {tanh(z_i) tanh(z_j), i < j}`` where
    ``z_i = (Z_i - m_i) / s_i`` with location and scale frozen from a pilot
    sample.  Every member maps into [-1, 1].
    """

    __test__ = False  # not a pytest class

    def __init__(self, loc, scale, names=None, products=True):
        self.loc = np.asarray(loc, dtype=float)
        scale = np.asarray(scale, dtype=float)
        self.scale = np.where(scale > 0, scale, 1.0)
        d = self.loc.size
        self.names = list(names) if names is not None else [f"z{i}" for i in range(d)]
        if len(self.names) != d:
            raise ValueError("one name per conditioning coordinate")
        self.pairs = list(itertools.combinations(range(d), 2)) if products else []

    @classmethod
    def from_pilot(cls, Z, names=None, products=True):
        Z = np.asarray(Z, dtype=float)
        if Z.ndim == 1:
            Z = Z[:, None]
        return cls(Z.mean(axis=0), Z.std(axis=0), names=names, products=products)

    @property
    def labels(self):
        out = ["1"] + [f"tanh({n})" for n in self.names]
        out += [f"tanh({self.names[i]})*tanh({self.names[j]})" for i, j in self.pairs]
        return out

    def __len__(self):
        return 1 + self.loc.size + len(self.pairs)

    def evaluate(self, Z):
        """Matrix of test-function values, shape (n_samples, len(self))."""
        Z = np.asarray(Z, dtype=float)
        if Z.ndim == 1:
            Z = Z[:, None]
        if Z.shape[1] != self.loc.size:
            raise ValueError(f"expected {self.loc.size} conditioning coordinates, got {Z.shape[1]}")
        T = np.tanh((Z - self.loc) / self.scale)
        cols = [np.ones(Z.shape[0])] + [T[:, i] for i in range(T.shape[1])]
        cols += [T[:, i] * T[:, j] for i, j in self.pairs]
        return np.column_stack(cols)

    def to_dict(self):
        return {"names": self.names, "loc": self.loc.tolist(), "scale": self.scale.tolist()}


def orthogonality_test(X, Z, family, threshold=DEFAULT_THRESHOLD, label="", discarded=0):
    """Estimate ``E[X g(Z)]`` for every ``g`` in ``family``.

    Returns one :class:`OrthogonalityReport` per test function with the
    sample mean, its CLT standard error, the z-score and ``|z| <= threshold``.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if n < MIN_SAMPLES:
        raise InsufficientSamples(f"orthogonality test needs at least {MIN_SAMPLES} samples, got {n}")
    G = family.evaluate(Z)
    if G.shape[0] != n:
        raise ValueError("X and Z must have the same number of samples")
    prods = X[:, None] * G
    est = prods.mean(axis=0)
    se = prods.std(axis=0, ddof=1) / math.sqrt(n)
    prefix = f"{label}:" if label else ""
    out = []
    for name, e, s in zip(family.labels, est, se):
        z = z_score(float(e), float(s))
        out.append(OrthogonalityReport(prefix + name, float(e), float(s), z, n,
                                       float(threshold), abs(z) <= threshold, discarded))
    return out


def familywise_threshold(n_tests, target_alpha):
    """Two-sided normal quantile at the Bonferroni level ``alpha / n_tests``."""
    if n_tests < 1:
        raise ValueError("n_tests must be >= 1")
    if not 0.0 < target_alpha < 1.0:
        raise ValueError("target_alpha must lie in (0, 1)")
    return float(stats.norm.isf(target_alpha / (2.0 * n_tests)))


def mean_ci(samples, confidence=0.95):
    """CLT confidence interval ``(mean, halfwidth)``."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise InsufficientSamples("a confidence interval needs at least two samples")
    q = stats.norm.isf((1.0 - confidence) / 2.0)
    return float(x.mean()), float(q * x.std(ddof=1) / math.sqrt(x.size))


def mean_and_se(samples):
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise InsufficientSamples("need at least two samples")
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def variance_and_se(samples):
    """Sample variance with the large-sample standard error ``sqrt((m4 - s^4)/n)``."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 4:
        raise InsufficientSamples("need at least four samples")
    c = x - x.mean()
    var = float(c.var(ddof=1))
    m4 = float(np.mean(c**4))
    return var, math.sqrt(max(m4 - var * var, 0.0) / x.size)
