"""Harness residuals, the decomposition in both time directions, and their tests.

A process ``H`` is a harness when, for ``s < t < u``, ``E[H_t | F_{s,u}]`` is
the affine interpolation of ``H_s`` and ``H_u``; here ``F_{s,u}`` is generated
by the path on ``[0, s]`` and on ``[u, inf)``.  Integrable Lévy processes are
harnesses, centered or not.

Path functionals accept either a :class:`SamplePath` or a values array (one
path, or ``(n_paths, n_nodes)``) together with its grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bridges import decompose
from .errors import InsufficientData, SpecError
from .levy_models import SamplePath, TimeGrid, sample_paths
from .mcstats import (PILOT_PATHS, ReportSet, TestFunctionFamily, as_seed, familywise_threshold,
                      orthogonality_test)

DEFAULT_TRIPLES = ((0.25, 0.5, 0.75), (0.1, 0.5, 0.9), (0.25, 0.3, 0.9))


def _unpack(path, grid):
    if isinstance(path, SamplePath):
        return path.values, path.grid
    if grid is None:
        raise SpecError("a grid is required with raw values")
    return np.asarray(path, dtype=float), grid


def _col(values, grid, t):
    return values[..., grid.index(t)]


def _increasing(times, what):
    if any(not a < b for a, b in zip(times, times[1:])):
        raise SpecError(f"{what} must be strictly increasing, got {tuple(times)}")


@dataclass
class HarnessResidual:
    s: float
    t: float
    u: float
    value: np.ndarray


@dataclass
class SlopeResidual:
    a: float
    b: float
    c: float
    d: float
    value: np.ndarray


def harness_residual(path, s, t, u, grid=None):
    """``H_t - (t-s)/(u-s) H_u - (u-t)/(u-s) H_s``."""
    _increasing((s, t, u), "(s, t, u)")
    values, grid = _unpack(path, grid)
    Hs, Ht, Hu = (_col(values, grid, x) for x in (s, t, u))
    value = Ht - ((t - s) / (u - s)) * Hu - ((u - t) / (u - s)) * Hs
    return HarnessResidual(s, t, u, value)


def slope_residual(path, a, b, c, d, grid=None):
    """``(H_c - H_b)/(c - b) - (H_d - H_a)/(d - a)``."""
    _increasing((a, b, c, d), "(a, b, c, d)")
    values, grid = _unpack(path, grid)
    Ha, Hb, Hc, Hd = (_col(values, grid, x) for x in (a, b, c, d))
    return SlopeResidual(a, b, c, d, (Hc - Hb) / (c - b) - (Hd - Ha) / (d - a))


def difference_quotient(path, s, t, grid=None):
    """``(H_t - H_s)/(t - s)`` with ``t - s`` taken as a whole number of grid steps."""
    values, grid = _unpack(path, grid)
    i, j = grid.index(s), grid.index(t)
    if not i < j:
        raise SpecError(f"need s < t, got ({s}, {t})")
    return (values[..., j] - values[..., i]) / ((j - i) * grid.step)


def martingale_from_harness(path, T, grid=None):
    """``H_t - int_0^t (H_T - H_r)/(T - r) dr`` on nodes ``0..T`` (shared with bridges)."""
    values, grid = _unpack(path, grid)
    return decompose(values, T, grid).martingale


def reverse_martingale_from_harness(path, tau, T, grid=None):
    """``N_t = H_t + int_t^T (H_tau - H_r)/(tau - r) dr`` for nodes ``t`` in ``(tau, T]``.

    The integral is a right-endpoint sum, so ``r = tau`` is never evaluated
    and ``N_T = H_T`` exactly.  Entry ``j`` of the result is node
    ``grid.index(tau) + 1 + j``.
    """
    if not tau < T:
        raise SpecError(f"need tau < T, got tau={tau}, T={T}")
    values, grid = _unpack(path, grid)
    i_tau, iT = grid.index(tau), grid.index(T)
    h = grid.step
    r = grid.times[i_tau + 1 : iT + 1]
    Htau = values[..., i_tau : i_tau + 1]
    terms = h * (Htau - values[..., i_tau + 1 : iT + 1]) / (tau - r)
    # tail[j] = sum of terms over nodes strictly after node i_tau + 1 + j
    tail = np.zeros_like(terms)
    tail[..., :-1] = np.cumsum(terms[..., :0:-1], axis=-1)[..., ::-1]
    return values[..., i_tau + 1 : iT + 1] + tail


# ---------------------------------------------------------------- test suites

def _suite(spec, groups, grid, start, seed, n_paths, threshold, alpha):
    """Run orthogonality groups ``(label, X(values), Z(values), names)``."""
    seed = as_seed(seed)
    pilot = sample_paths(spec, grid, start, seed.child("pilot"), PILOT_PATHS)
    fams = [TestFunctionFamily.from_pilot(Z(pilot), names) for _, _, Z, names in groups]
    if threshold is None:
        threshold = familywise_threshold(sum(len(f) for f in fams), alpha)
    values = sample_paths(spec, grid, start, seed.child("main"), n_paths)
    out = ReportSet(threshold=threshold)
    for (label, X, Z, _), fam in zip(groups, fams):
        out.extend(orthogonality_test(X(values), Z(values), fam, threshold, label=label))
    return out


def _coords(grid, *times):
    idx = [grid.index(t) for t in times]
    return lambda v: v[:, idx]


def harness_test(spec, triples=DEFAULT_TRIPLES, n_paths=200_000, seed=0, start=0.0, quads=(),
                 horizon_factor=2.0, threshold=None, alpha=0.01, planted_bias=0.0, min_steps=16,
                 label=""):
    """Orthogonality of harness residuals to ``g(H_{s/2}, H_s, H_u, H_{k u})``.

    ``k`` is ``horizon_factor``.  Quads ``(a, b, c, d)`` test the slope
    residual against ``g(H_{a/2}, H_a, H_d, H_{k d})``.  ``planted_bias`` adds
    ``planted_bias * (u - s)`` to ``H_t`` as a power control.
    """
    triples = [tuple(float(x) for x in tr) for tr in triples]
    quads = [tuple(float(x) for x in q) for q in quads]
    for tr in triples:
        _increasing(tr, "triple")
        if tr[0] <= 0:
            raise SpecError("triples need s > 0 so that s/2 is strictly in the past")
    for q in quads:
        _increasing(q, "quad")
        if q[0] <= 0:
            raise SpecError("quads need a > 0")
    if horizon_factor <= 1:
        raise SpecError("horizon_factor must exceed 1")
    lasts = [tr[2] for tr in triples] + [q[3] for q in quads]
    horizon = horizon_factor * max(lasts)
    times = {x for tr in triples for x in (tr[0] / 2, *tr, horizon_factor * tr[2])}
    times |= {x for q in quads for x in (q[0] / 2, *q, horizon_factor * q[3])}
    grid = TimeGrid.covering(sorted(times), horizon, min_steps=min_steps)

    groups = []
    for s, t, u in triples:
        def X(v, s=s, t=t, u=u):
            r = harness_residual(v, s, t, u, grid).value
            return r + planted_bias * (u - s) if planted_bias else r
        groups.append((f"{label}harness{(s, t, u)}", X,
                       _coords(grid, s / 2, s, u, horizon_factor * u),
                       ["H_s/2", "H_s", "H_u", "H_ku"]))
    for a, b, c, d in quads:
        groups.append((f"{label}slope{(a, b, c, d)}",
                       lambda v, q=(a, b, c, d): slope_residual(v, *q, grid=grid).value,
                       _coords(grid, a / 2, a, d, horizon_factor * d),
                       ["H_a/2", "H_a", "H_d", "H_kd"]))
    return _suite(spec, groups, grid, start, seed, n_paths, threshold, alpha)


def reverse_martingale_test(spec, triples, T=1.0, n_paths=200_000, seed=0, start=0.0,
                            threshold=None, alpha=0.01, min_steps=64, label=""):
    """Reverse-time martingale property of ``N^{(tau)}``.

    Each triple ``(tau, t, t2)`` with ``tau < t < t2 <= T`` tests
    ``E[(N_t - N_{t2}) g(H_tau, H_{t2}, H_{2T})] = 0``.
    """
    triples = [tuple(float(x) for x in tr) for tr in triples]
    for tr in triples:
        _increasing(tr, "triple")
        if tr[2] > T:
            raise SpecError("reverse triples need t2 <= T")
    times = sorted({x for tr in triples for x in tr} | {T, 2 * T})
    grid = TimeGrid.covering(times, 2 * T, min_steps=min_steps)
    groups = []
    for tau, t, t2 in triples:
        def X(v, tau=tau, t=t, t2=t2):
            N = reverse_martingale_from_harness(v, tau, T, grid)
            base = grid.index(tau) + 1
            return N[:, grid.index(t) - base] - N[:, grid.index(t2) - base]
        groups.append((f"{label}reverse{(tau, t, t2)}", X, _coords(grid, tau, t2, 2 * T),
                       ["H_tau", "H_t2", "H_2T"]))
    return _suite(spec, groups, grid, start, seed, n_paths, threshold, alpha)


def slope_identity_test(spec, triples, n_paths=200_000, seed=0, start=0.0, threshold=None,
                        alpha=0.01, min_steps=16, label=""):
    """Orthogonality of ``(H_t - H_s)/(t - s) - (H_T - H_s)/(T - s)`` to the past-future field.

    Triples are ``(s, t, T)``; conditioning is ``g(H_{s/2}, H_s, H_T, H_{2T})``.
    """
    triples = [tuple(float(x) for x in tr) for tr in triples]
    for tr in triples:
        _increasing(tr, "triple")
        if tr[0] <= 0:
            raise SpecError("triples need s > 0")
    horizon = 2 * max(tr[2] for tr in triples)
    times = sorted({x for tr in triples for x in (tr[0] / 2, *tr, 2 * tr[2])})
    grid = TimeGrid.covering(times, horizon, min_steps=min_steps)
    groups = []
    for s, t, T in triples:
        def X(v, s=s, t=t, T=T):
            Hs, Ht, HT = (_col(v, grid, x) for x in (s, t, T))
            return (Ht - Hs) / (t - s) - (HT - Hs) / (T - s)
        groups.append((f"{label}slope_identity{(s, t, T)}", X,
                       _coords(grid, s / 2, s, T, 2 * T), ["H_s/2", "H_s", "H_T", "H_2T"]))
    return _suite(spec, groups, grid, start, seed, n_paths, threshold, alpha)


# ------------------------------------------------------- binned cross-check

@dataclass
class BinnedEstimate:
    s: float
    t: float
    u: float
    counts: np.ndarray
    deviation: np.ndarray
    stderr: np.ndarray
    dropped: int
    max_abs_z: float

    def passed(self, threshold=4.0):
        return self.max_abs_z <= threshold


def conditional_mean_estimate(path, s, t, u, bins=8, grid=None, min_count=50):
    """Binned estimate of ``E[H_t | H_s, H_u]`` against the affine prediction.

    Samples are binned on equal-frequency marginal quantiles of ``H_s`` and
    ``H_u``; bins holding fewer than ``min_count`` samples are dropped and
    counted.  Deviations are per-bin means of the harness residual.
    """
    values, grid = _unpack(path, grid)
    if values.ndim != 2:
        raise InsufficientData("need a (n_paths, n_nodes) array")
    res = harness_residual(values, s, t, u, grid).value
    Hs, Hu = _col(values, grid, s), _col(values, grid, u)
    q = np.linspace(0, 1, bins + 1)[1:-1]
    bs = np.searchsorted(np.quantile(Hs, q), Hs, side="right")
    bu = np.searchsorted(np.quantile(Hu, q), Hu, side="right")
    flat = bs * bins + bu
    counts = np.bincount(flat, minlength=bins * bins)
    sums = np.bincount(flat, weights=res, minlength=bins * bins)
    sq = np.bincount(flat, weights=res * res, minlength=bins * bins)
    keep = counts >= min_count
    if not keep.any():
        raise InsufficientData(f"no bin holds at least {min_count} samples")
    n = np.where(keep, counts, 1)
    mean = sums / n
    var = np.maximum(sq / n - mean**2, 0.0) * n / np.maximum(n - 1, 1)
    se = np.sqrt(var / n)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, mean / se, np.where(mean == 0, 0.0, np.inf))
    dev = np.where(keep, mean, np.nan).reshape(bins, bins)
    return BinnedEstimate(s, t, u, counts.reshape(bins, bins), dev,
                          np.where(keep, se, np.nan).reshape(bins, bins),
                          int((~keep).sum()), float(np.max(np.abs(z[keep]))))
