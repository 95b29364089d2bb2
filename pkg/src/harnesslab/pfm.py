"""Past-future martingales indexed by intervals.

``M_{s,t}`` is a past-future martingale when it is measurable with respect to
``F_{s,t}`` (the path on ``[0, s]`` and ``[t, inf)``) and
``E[M_{s,t} | F_{r,u}] = M_{r,u}`` whenever ``(s, t)`` is nested in ``(r, u)``.

Every construction here is linear in the path values: it is a coefficient
vector over grid nodes, nonzero only on ``[0, s]`` and ``[t, U]``.  All
integrals are left-endpoint sums with the predictable value ``f(t_i^-)``,
for the deterministic ``ds`` integrals as well as the stochastic ones.  With
that choice the discrete tower property holds exactly, because increments of
a Lévy process over equal steps are exchangeable given their sum.

Exponential example
-------------------
Given ``F_{r,u}`` the Brownian increments over ``[r, u)`` form a discrete
Brownian bridge, so ``M_{s,t} = sum_i c_i dB_i + (known)`` is conditionally
Gaussian with mean ``M_{r,u}`` and variance::

    h sum_[r,s) f_-^2 + h sum_[t,u) f_+^2 + K_{s,t}^2/(t-s) - K_{r,u}^2/(u-r)

Hence ``N_{s,t} = exp(M_{s,t} - c_{s,t})`` is a past-future martingale for::

    c_{s,t} = 1/2 h sum_[0,s) f_-^2 + 1/2 h sum_[t,U) f_+^2 + K_{s,t}^2 / (2 (t-s))

This is the ``"derived"`` variant.  The ``"as_printed"`` variant adds
``1/2 h sum f_-^2 + 1/2 h sum f_+^2 + (t-s)/2 K^2`` to ``M`` instead; with
``f = 0``, ``C = 1`` its tower identity would need
``1/(t-s) - 1/(u-r) + (t-s) = u - r``, which fails in general.  It is kept so
that the outcome can be recorded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotCentered, NotNested, SpecError
from .harnesses import difference_quotient
from .levy_models import SamplePath, TimeGrid, brownian, is_centered, is_standard_brownian, sample_paths
from .mcstats import (PILOT_PATHS, ReportSet, TestFunctionFamily, as_seed, familywise_threshold,
                      orthogonality_test)

VARIANTS = ("as_printed", "derived")


# ------------------------------------------------------- deterministic functions

@dataclass(frozen=True)
class DeterministicFn:
    """Right-continuous piecewise polynomial, zero outside ``[b_0, b_m)``.

    ``coeffs[i]`` holds the coefficients, lowest power first, of the
    polynomial in ``(t - b_i)`` used on ``[b_i, b_{i+1})``.  Jumps happen only
    at breakpoints.  At ``t = 0`` the left limit is taken to be ``f(0)``.
    """

    breakpoints: tuple
    coeffs: tuple = field(default=())

    def __post_init__(self):
        b = tuple(float(x) for x in self.breakpoints)
        c = tuple(tuple(float(a) for a in p) for p in self.coeffs)
        if len(b) < 2 or len(c) != len(b) - 1:
            raise SpecError("need m+1 breakpoints and m polynomial pieces")
        if any(not x < y for x, y in zip(b, b[1:])):
            raise SpecError("breakpoints must be strictly increasing")
        if b[0] < 0:
            raise SpecError("support must lie in [0, U]")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "coeffs", c)

    @property
    def support_end(self):
        return self.breakpoints[-1]

    def _piece(self, i, t):
        return np.polynomial.polynomial.polyval(t - self.breakpoints[i], self.coeffs[i]) \
            if self.coeffs[i] else np.zeros_like(t)

    def __call__(self, t):
        """``f(t)``."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        b = self.breakpoints
        for i in range(len(b) - 1):
            m = (t >= b[i]) & (t < b[i + 1])
            out = np.where(m, self._piece(i, t), out)
        return out

    def left(self, t):
        """``f(t^-)``, with ``f(0^-) := f(0)``."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        b = self.breakpoints
        for i in range(len(b) - 1):
            m = (t > b[i]) & (t <= b[i + 1])
            out = np.where(m, self._piece(i, t), out)
        return np.where(t == 0.0, self(t), out)

    def jumps(self):
        """``[(v, f(v) - f(v^-))]`` over breakpoints with a nonzero jump."""
        out = []
        for v in self.breakpoints:
            if v == 0.0:
                continue
            d = float(self(v) - self.left(v))
            if d != 0.0:
                out.append((v, d))
        return out

    def check_grid(self, grid):
        for v in self.breakpoints:
            if v <= grid.horizon:
                grid.index(v)

    def to_dict(self):
        return {"breakpoints": list(self.breakpoints), "coeffs": [list(p) for p in self.coeffs]}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["breakpoints"]), tuple(tuple(p) for p in d["coeffs"]))

    @classmethod
    def constant(cls, value, start, end):
        return cls((start, end), ((value,),))

    @classmethod
    def zero(cls, end=1.0):
        return cls((0.0, end), ((),))

    @classmethod
    def hat(cls, start, peak, end, height=1.0):
        """Piecewise-linear bump from 0 at ``start`` to ``height`` at ``peak`` and back."""
        return cls((start, peak, end), ((0.0, height / (peak - start)),
                                        (height, -height / (end - peak))))

    @classmethod
    def ramp_down(cls, end=1.0):
        """``max(0, 1 - u/end)`` on ``[0, end)``."""
        return cls((0.0, end), ((1.0, -1.0 / end),))


def _values(path, grid):
    if isinstance(path, SamplePath):
        return path.values, path.grid
    if grid is None:
        raise SpecError("a grid is required with raw values")
    return np.asarray(path, dtype=float), grid


def _left_on_grid(f, grid, i0, i1):
    return f.left(grid.times[i0:i1])


# --------------------------------------------------------------- integrals

def integral_coefficients(f, grid, start, end):
    """Coefficients ``c`` with ``values @ c = sum_i f(t_i^-) (xi_{i+1} - xi_i)`` over ``[start, end)``."""
    f.check_grid(grid)
    i0, i1 = grid.index(start), grid.index(end)
    c = np.zeros(grid.steps + 1)
    fl = _left_on_grid(f, grid, i0, i1)
    c[i0:i1] -= fl
    c[i0 + 1 : i1 + 1] += fl
    return c


def _apply(values, coef):
    support = np.flatnonzero(coef)
    if support.size == 0:
        return np.zeros(values.shape[:-1])
    return values[..., support] @ coef[support]


def stochastic_integral(path, f, start, end, grid=None):
    """``int_[start, end) f(u^-) dxi_u`` as a left-endpoint sum."""
    values, grid = _values(path, grid)
    return _apply(values, integral_coefficients(f, grid, start, end))


def riemann_integral(f, grid, start, end, power=1):
    """``h sum_i f(t_i^-)^power`` over nodes in ``[start, end)``."""
    i0, i1 = grid.index(start), grid.index(end)
    return grid.step * float(np.sum(_left_on_grid(f, grid, i0, i1) ** power))


def quadratic_covariation(path, f, start, end):
    """``sum over f-jumps v in (start, end] of df(v) * dxi_v``.

    Only jumps of the path recorded exactly at ``v`` contribute; Lévy samplers
    never place a jump at a fixed time, so this is zero for simulated paths.
    """
    atoms = path.atoms if isinstance(path, SamplePath) else {}
    return float(sum(d * atoms.get(v, 0.0) for v, d in f.jumps() if start < v <= end))


def mask_interior(values, grid, s, t):
    """Copy of ``values`` with nodes strictly inside ``(s, t)`` set to zero."""
    out = np.array(values, dtype=float, copy=True)
    out[..., grid.index(s) + 1 : grid.index(t)] = 0.0
    return out


# ------------------------------------------------------------ constructions

def _check_index(grid, s, t, U):
    if not 0 <= s < t < U:
        raise SpecError(f"need 0 <= s < t < U, got s={s}, t={t}, U={U}")
    return grid.index(s), grid.index(t), grid.index(U)


def _linear_parts(grid, f_minus, f_plus, C, s, t, U):
    """Stochastic coefficients and the deterministic factor ``K``."""
    _check_index(grid, s, t, U)
    coef = integral_coefficients(f_minus, grid, 0.0, s) + integral_coefficients(f_plus, grid, t, U)
    K = C - riemann_integral(f_minus, grid, 0.0, s) - riemann_integral(f_plus, grid, t, U)
    return coef, K


def brownian_pfm_linear(path, f_minus, f_plus, C, s, t, U, grid=None):
    """``int_0^s f_- dB + int_t^U f_+ dB + (B_t - B_s)/(t - s) K_{s,t}``."""
    values, grid = _values(path, grid)
    coef, K = _linear_parts(grid, f_minus, f_plus, C, s, t, U)
    return _apply(values, coef) + difference_quotient(values, s, t, grid) * K


def brownian_pfm_exponential(path, f_minus, f_plus, C, s, t, U, variant="derived", grid=None):
    """``N_{s,t}``; see the module docstring for the two compensator variants."""
    if variant not in VARIANTS:
        raise SpecError(f"variant must be one of {VARIANTS}, got {variant!r}")
    values, grid = _values(path, grid)
    coef, K = _linear_parts(grid, f_minus, f_plus, C, s, t, U)
    M = _apply(values, coef) + difference_quotient(values, s, t, grid) * K
    q = 0.5 * riemann_integral(f_minus, grid, 0.0, s, 2) + 0.5 * riemann_integral(f_plus, grid, t, U, 2)
    length = (grid.index(t) - grid.index(s)) * grid.step
    if variant == "derived":
        return np.exp(M - q - K * K / (2.0 * length))
    return np.exp(M + q + 0.5 * length * K * K)


def levy_pfm_coefficients(f, grid, s, t, U):
    """Coefficients of ``int_0^s f(u^-) dxi + int_t^U f(u^-) dxi + (xi_t - xi_s)/(t-s) int_s^t f``."""
    i_s, i_t, _ = _check_index(grid, s, t, U)
    coef = integral_coefficients(f, grid, 0.0, s) + integral_coefficients(f, grid, t, U)
    r = riemann_integral(f, grid, s, t) / ((i_t - i_s) * grid.step)
    coef[i_t] += r
    coef[i_s] -= r
    return coef


def levy_pfm(path, f, s, t, U, grid=None):
    """``M_{s,t}`` of a Lévy path for a deterministic integrand ``f``."""
    values, grid = _values(path, grid)
    out = _apply(values, levy_pfm_coefficients(f, grid, s, t, U))
    if isinstance(path, SamplePath):
        out = out - quadratic_covariation(path, f, s, t)
    return out


# -------------------------------------------------------- construction objects

@dataclass
class LinearConstruction:
    f_minus: DeterministicFn
    f_plus: DeterministicFn
    C: float
    U: float
    spec: object = field(default_factory=brownian)
    name: str = "linear"

    def breakpoints(self):
        return self.f_minus.breakpoints + self.f_plus.breakpoints

    def evaluate(self, values, grid, s, t):
        return brownian_pfm_linear(values, self.f_minus, self.f_plus, self.C, s, t, self.U, grid)


@dataclass
class ExponentialConstruction(LinearConstruction):
    variant: str = "derived"
    name: str = "exponential"

    def evaluate(self, values, grid, s, t):
        return brownian_pfm_exponential(values, self.f_minus, self.f_plus, self.C, s, t, self.U,
                                        self.variant, grid)


@dataclass
class LevyConstruction:
    f: DeterministicFn
    U: float
    spec: object = field(default_factory=brownian)
    name: str = "levy"

    def breakpoints(self):
        return self.f.breakpoints

    def evaluate(self, values, grid, s, t):
        return levy_pfm(values, self.f, s, t, self.U, grid)


def check_nested(pairs):
    out = []
    for (s, t), (r, u) in pairs:
        s, t, r, u = map(float, (s, t, r, u))
        if not (s < t and r <= s and t <= u and (r, u) != (s, t)):
            raise NotNested(f"({s}, {t}) is not strictly nested in ({r}, {u})")
        out.append(((s, t), (r, u)))
    return out


def pfm_tower_test(construction, pairs, n_paths=200_000, seed=0, start=0.0, threshold=None,
                   alpha=0.01, min_steps=64, label=""):
    """Orthogonality of ``M_{s,t} - M_{r,u}`` to ``g(xi_{r/2}, xi_r, xi_u, xi_{(u+U)/2})``."""
    pairs = check_nested(pairs)
    U = float(construction.U)
    if isinstance(construction, LevyConstruction) and not is_centered(construction.spec, 1e-12):
        raise NotCentered("the Lévy construction is tested on centered specs")
    if not isinstance(construction, LevyConstruction) and not is_standard_brownian(construction.spec):
        raise SpecError("the linear and exponential constructions need standard Brownian motion")
    if max(u for _, (_, u) in pairs) >= U:
        raise SpecError("every u must be < U")
    times = {x for (s, t), (r, u) in pairs for x in (s, t, r, u, r / 2, (u + U) / 2)}
    times |= {b for b in construction.breakpoints() if b <= U} | {U}
    grid = TimeGrid.covering(sorted(times), U, min_steps=min_steps)

    def coords(v, r, u):
        return v[:, [grid.index(r / 2), grid.index(r), grid.index(u), grid.index((u + U) / 2)]]

    seed = as_seed(seed)
    pilot = sample_paths(construction.spec, grid, start, seed.child("pilot"), PILOT_PATHS)
    names = ["xi_r/2", "xi_r", "xi_u", "xi_(u+U)/2"]
    fams = [TestFunctionFamily.from_pilot(coords(pilot, r, u), names) for _, (r, u) in pairs]
    if threshold is None:
        threshold = familywise_threshold(sum(len(f) for f in fams), alpha)
    values = sample_paths(construction.spec, grid, start, seed.child("main"), n_paths)
    out = ReportSet(threshold=threshold)
    for ((s, t), (r, u)), fam in zip(pairs, fams):
        X = construction.evaluate(values, grid, s, t) - construction.evaluate(values, grid, r, u)
        out.extend(orthogonality_test(X, coords(values, r, u), fam, threshold,
                                      label=f"{label}{construction.name}[{s},{t}]-[{r},{u}]"))
    return out
