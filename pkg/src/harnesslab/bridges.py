"""Bridges and the enlarged-filtration decomposition.

For an integrable Lévy process ``xi`` and a terminal time ``T``::

    xi_t = M_t + int_0^t (xi_T - xi_s) / (T - s) ds

where ``M`` is a martingale for the filtration enlarged with ``xi_T``.  On a
grid the integral is a left-endpoint sum.  Given ``xi_T`` and the past, the
increments of a Lévy process over equal steps are exchangeable, so the
left-endpoint compensator makes ``M`` an exact discrete-time martingale; the
statistical tests therefore carry no discretization bias.

Bridges are built three ways: the exact Brownian construction, an explicit
Euler scheme for the bridge SDE, and self-normalized importance weighting of
free paths by the density ratio ``phi_{T-s}(y - xi_s) / phi_T(y - x)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .density import closed_form_density_fn, density_fourier, default_halfwidth, _require_density
from .errors import DegenerateWeights, NumericalUnderflow, SpecError, UnsupportedFamily
from .levy_models import (SamplePath, TimeGrid, brownian, block_ranges, default_block_paths,
                          map_blocks, sample_paths)
from .mcstats import (PILOT_PATHS, ReportSet, TestFunctionFamily, as_seed, familywise_threshold,
                      mean_and_se, orthogonality_test, variance_and_se)

UNDERFLOW = 1e-300
MIN_ESS = 100.0


# ------------------------------------------------------------ decomposition

def compensator_integral(values, grid, T):
    """Left-endpoint sums of ``(xi_T - xi_s)/(T - s)`` on nodes ``0..T``.

    ``values`` may be one path or a (n_paths, n_nodes) array.  The integrand is
    never evaluated at ``s = T``; the last summand uses ``s = T - step``.
    """
    values = np.asarray(values, dtype=float)
    iT = grid.index(T)
    h = grid.step
    times = grid.times
    xT = values[..., iT : iT + 1]
    terms = h * (xT - values[..., :iT]) / (times[iT] - times[:iT])
    out = np.zeros(values.shape[:-1] + (iT + 1,))
    out[..., 1:] = np.cumsum(terms, axis=-1)
    return out


def snap_to_common_lattice(*arrays):
    """Round arrays onto one dyadic lattice fine enough for exact sums.

    The spacing is the unit in the last place of ``2 * max |a|`` over all
    inputs, so the change is at most one ulp of the largest entry and any
    sum or difference of two snapped numbers is exactly representable.
    """
    big = max((float(np.max(np.abs(a))) if np.size(a) else 0.0) for a in arrays)
    if big == 0.0 or not math.isfinite(big):
        return (1.0,) + tuple(np.asarray(a, dtype=float) for a in arrays)
    # every double is a multiple of the smallest subnormal, so clamp there
    q = max(math.ldexp(1.0, math.frexp(2.0 * big)[1] - 52), math.ldexp(1.0, -1074))
    return (q,) + tuple(np.round(np.asarray(a, dtype=float) / q) * q for a in arrays)


@dataclass
class DecomposedPath:
    """``values == martingale + compensator`` holds exactly on nodes ``0..T``."""

    grid: TimeGrid
    T: float
    values: np.ndarray
    compensator: np.ndarray
    martingale: np.ndarray
    snap: float = 0.0

    def write_csv(self, path, index=0):
        vals = self.values if self.values.ndim == 1 else self.values[index]
        comp = self.compensator if self.compensator.ndim == 1 else self.compensator[index]
        mart = self.martingale if self.martingale.ndim == 1 else self.martingale[index]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "xi", "compensator", "martingale"])
            for row in zip(self.grid.times[: len(vals)], vals, comp, mart):
                w.writerow([repr(float(v)) for v in row])


def decompose(path, T, grid=None):
    """Split ``xi`` on ``[0, T]`` into martingale plus compensator.

    Accepts a :class:`SamplePath` or raw values with ``grid``.  The path and
    compensator are snapped to a common dyadic lattice (see
    :func:`snap_to_common_lattice`) so that the reconstruction is bit-exact.
    """
    if isinstance(path, SamplePath):
        grid, values = path.grid, path.values
    else:
        values = np.asarray(path, dtype=float)
    iT = grid.index(T)
    comp = compensator_integral(values, grid, T)
    q, vq, cq = snap_to_common_lattice(values[..., : iT + 1], comp)
    return DecomposedPath(grid=grid, T=float(T), values=vq, compensator=cq,
                          martingale=vq - cq, snap=q)


def martingale_test(spec, pairs, T=1.0, n_paths=200_000, seed=0, start=0.0,
                    threshold=None, alpha=0.01, min_steps=64, label=""):
    """Orthogonality of ``M_t - M_s`` to ``g(xi_{s/2}, xi_s, xi_T)``.

    One report per (pair, test function).  The test functions are frozen from
    a pilot run on a dedicated sub-seed.
    """
    seed = as_seed(seed)
    pairs = [(float(s), float(t)) for s, t in pairs]
    for s, t in pairs:
        if not 0 < s < t < T:
            raise SpecError(f"martingale test needs 0 < s < t < T, got ({s}, {t})")
    times = sorted({x for s, t in pairs for x in (s / 2, s, t)} | {T})
    grid = TimeGrid.covering(times, T, min_steps=min_steps)

    def coords(values, s):
        return np.column_stack([values[:, grid.index(s / 2)], values[:, grid.index(s)],
                                values[:, grid.index(T)]])

    pilot = sample_paths(spec, grid, start, seed.child("pilot"), PILOT_PATHS)
    names = ["xi_s/2", "xi_s", "xi_T"]
    families = {p: TestFunctionFamily.from_pilot(coords(pilot, p[0]), names) for p in pairs}
    if threshold is None:
        threshold = familywise_threshold(sum(len(f) for f in families.values()), alpha)

    values = sample_paths(spec, grid, start, seed.child("main"), n_paths)
    dec = decompose(values, T, grid)
    out = ReportSet(threshold=threshold)
    for s, t in pairs:
        X = dec.martingale[:, grid.index(t)] - dec.martingale[:, grid.index(s)]
        out.extend(orthogonality_test(X, coords(values, s), families[(s, t)], threshold,
                                      label=f"{label}M[{s},{t}]"))
    return out


# ------------------------------------------------------------ constructions

def _bridge_grid_check(grid, T):
    if abs(grid.horizon - T) > 1e-12 or grid.t0 != 0.0:
        raise SpecError("bridge grids must run from 0 to T")


def brownian_bridge_values(x, y, T, grid, seed, n_paths, path_offset=0):
    """``x + (B_t - (t/T) B_T) + (t/T)(y - x)`` with both ends pinned exactly."""
    _bridge_grid_check(grid, T)
    B = sample_paths(brownian(), grid, 0.0, seed, n_paths, path_offset)
    r = grid.times / T
    out = x + (B - r * B[:, -1:]) + r * (y - x)
    out[:, 0] = x
    out[:, -1] = y
    return out


def brownian_bridge_path(x, y, T, grid, seed, path_index=0):
    seed = as_seed(seed)
    return SamplePath(grid, brownian_bridge_values(x, y, T, grid, seed, 1, path_index)[0],
                      seed, path_index)


def bridge_sde_values(x, y, T, grid, seed, n_paths, path_offset=0, noise=1.0, block_paths=None,
                      columns=None):
    """Explicit Euler paths of ``dX = dbeta + (y - X)/(T - t) dt``; ``X_T := y``.

    ``columns`` keeps only the listed node indices.
    """
    _bridge_grid_check(grid, T)
    seed = as_seed(seed)
    block_paths = block_paths or default_block_paths(grid.steps)
    cols = slice(None) if columns is None else np.asarray(columns, dtype=np.intp)
    parts = map_blocks(
        lambda o, n: kernels.bridge_sde_values(seed.root, o, n, grid.steps, float(T), float(x),
                                               float(y), float(noise))[:, cols],
        block_ranges(n_paths, block_paths, path_offset))
    return np.concatenate(parts, axis=0)


def bridge_sde_path(x, y, T, grid, seed, path_index=0, noise=1.0):
    seed = as_seed(seed)
    return SamplePath(grid, bridge_sde_values(x, y, T, grid, seed, 1, path_index, noise)[0],
                      seed, path_index)


# -------------------------------------------------------- importance weights

def density_source(spec, kind="auto", **fourier_kw):
    """Callable ``phi(u, x)`` from closed forms or cached Fourier grids."""
    _require_density(spec, "bridge_weight")
    if callable(kind):
        return kind
    if kind in ("auto", "closed_form"):
        try:
            return closed_form_density_fn(spec)
        except UnsupportedFamily:
            if kind == "closed_form":
                raise
    cache = {}

    def phi(u, x):
        if u not in cache:
            L = fourier_kw.get("x_halfwidth") or default_halfwidth(spec, u)
            cache[u] = density_fourier(spec, u, L, **{k: v for k, v in fourier_kw.items()
                                                      if k != "x_halfwidth"})
        return cache[u](x)

    return phi


@dataclass
class WeightedSample:
    value: np.ndarray
    weight: np.ndarray
    discarded: int = 0


def bridge_weight(xi_s, s, T, x, y, density):
    """Radon-Nikodym weight ``phi_{T-s}(y - xi_s) / phi_T(y - x)``.

    Returns ``(weights, keep)``; samples where both densities underflow are
    dropped (``keep`` False).  At ``s = 0`` the weight is exactly 1.
    """
    xi_s = np.asarray(xi_s, dtype=float)
    den = float(density(T, y - x))
    if den < UNDERFLOW:
        raise NumericalUnderflow(f"phi_T(y - x) = {den} underflows", "bridge_weight")
    if s == 0:
        num = np.where(xi_s == x, den, 0.0)
    else:
        num = np.asarray(density(T - s, y - xi_s), dtype=float)
    keep = ~((num < UNDERFLOW) & (den < UNDERFLOW)) & np.isfinite(num)
    w = np.where(keep, num, 0.0) / den
    return w, keep


@dataclass
class BridgeEstimate:
    t: float
    estimate: float
    stderr: float
    ess: float
    n: int
    discarded: int = 0


def weighted_mean(values, weights):
    """Self-normalized mean with delta-method standard error and ESS."""
    sw = float(np.sum(weights))
    if sw <= 0:
        raise DegenerateWeights("all weights are zero", "bridge_expectation")
    est = float(np.sum(weights * values)) / sw
    se = math.sqrt(float(np.sum(weights**2 * (values - est) ** 2))) / sw
    ess = sw**2 / float(np.sum(weights**2))
    return est, se, ess


def bridge_expectation(spec, T, x, y, t, g=None, n_paths=100_000, seed=0, density="auto",
                       step=None, min_ess=MIN_ESS):
    """Estimate ``E^T_{x->y}[g(xi_t)]`` by weighting free paths.

    ``step`` is the grid step whose last node before ``T`` bounds ``t``
    (default ``T / 64``).
    """
    seed = as_seed(seed)
    step = step or T / 64
    if not 0 <= t <= T - step + 1e-12:
        raise SpecError(f"t = {t} must lie in [0, T - step] = [0, {T - step}]")
    g = g or (lambda v: v)
    dens = density_source(spec, density)
    if t == 0:
        xi = np.full(n_paths, float(x))
    else:
        xi = sample_paths(spec, TimeGrid(horizon=t, steps=1), x, seed, n_paths)[:, 1]
    w, keep = bridge_weight(xi, t, T, x, y, dens)
    gv = np.asarray(g(xi), dtype=float)
    est, se, ess = weighted_mean(gv[keep], w[keep])
    if ess < min_ess:
        raise DegenerateWeights(f"effective sample size {ess:.1f} < {min_ess}", "bridge_expectation")
    return BridgeEstimate(float(t), est, se, ess, int(keep.sum()), int((~keep).sum()))


def weighted_moments(spec, T, x, y, t, n_paths, seed, density="auto"):
    """Self-normalized bridge mean and variance at ``t`` with standard errors."""
    m1 = bridge_expectation(spec, T, x, y, t, None, n_paths, seed, density)
    c = m1.estimate
    m2 = bridge_expectation(spec, T, x, y, t, lambda v: (v - c) ** 2, n_paths, seed, density)
    return m1, m2


def marginal_moments(samples):
    """``(mean, se_mean, var, se_var)`` of a sample."""
    m, sm = mean_and_se(samples)
    v, sv = variance_and_se(samples)
    return m, sm, v, sv
