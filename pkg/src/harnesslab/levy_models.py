"""Integrable Lévy process specifications and path sampling.

A :class:`ProcessSpec` is a triplet (drift, Gaussian variance, jump part) with
characteristic exponent ``Phi`` defined by ``E[exp(i lam xi_u)] = exp(-u Phi(lam))``::

    Phi(lam) = -i drift lam + gaussian_var lam**2 / 2 + int (1 - e^{i lam z}) nu(dz)

The jump part is either absent, compound Poisson with a normal, exponential
or two-point jump law, or a gamma subordinator ``nu(dz) = a e^{-bz}/z dz``.
All three admit exact increment sampling, so paths are built as cumulative
sums of exact increments on an equispaced grid.
"""

from __future__ import annotations

import contextlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from . import kernels
from .errors import IntegrabilityError, PinNotOnGrid, SpecError
from .mcstats import RngSeed, as_seed

GRID_TOL = 1e-9
BLOCK_ELEMENTS = 2**20
MAX_POISSON_MEAN = 500.0


def _finite(name, value):
    value = float(value)
    if not math.isfinite(value):
        raise SpecError(f"{name} must be finite, got {value}")
    return value


# ---------------------------------------------------------------- jump laws

@dataclass(frozen=True)
class NormalLaw:
    mean: float = 0.0
    var: float = 1.0

    def __post_init__(self):
        _finite("mean", self.mean)
        if _finite("var", self.var) < 0:
            raise SpecError("normal jump variance must be >= 0")

    def moment1(self):
        return self.mean

    def moment2(self):
        return self.var + self.mean**2

    def cf(self, lam):
        return np.exp(1j * self.mean * lam - 0.5 * self.var * lam**2)


@dataclass(frozen=True)
class ExponentialLaw:
    rate: float = 1.0

    def __post_init__(self):
        if not _finite("rate", self.rate) > 0:
            raise SpecError("exponential jump rate must be > 0")

    def moment1(self):
        return 1.0 / self.rate

    def moment2(self):
        return 2.0 / self.rate**2

    def cf(self, lam):
        return self.rate / (self.rate - 1j * lam)


@dataclass(frozen=True)
class TwoPointLaw:
    p: float
    x_plus: float
    x_minus: float

    def __post_init__(self):
        if not 0.0 <= _finite("p", self.p) <= 1.0:
            raise SpecError("two-point probability must lie in [0, 1]")
        _finite("x_plus", self.x_plus)
        _finite("x_minus", self.x_minus)

    def moment1(self):
        return self.p * self.x_plus + (1 - self.p) * self.x_minus

    def moment2(self):
        return self.p * self.x_plus**2 + (1 - self.p) * self.x_minus**2

    def cf(self, lam):
        return self.p * np.exp(1j * lam * self.x_plus) + (1 - self.p) * np.exp(1j * lam * self.x_minus)


JumpLaw = Union[NormalLaw, ExponentialLaw, TwoPointLaw]


@dataclass(frozen=True)
class CompoundPoisson:
    rate: float
    jump_law: JumpLaw

    def __post_init__(self):
        if not _finite("rate", self.rate) > 0:
            raise SpecError("compound Poisson rate must be > 0")
        if not isinstance(self.jump_law, (NormalLaw, ExponentialLaw, TwoPointLaw)):
            raise IntegrabilityError(f"unsupported jump law {self.jump_law!r}")


@dataclass(frozen=True)
class GammaSubordinator:
    """Lévy measure ``a exp(-b z) / z dz`` on ``z > 0``; ``xi_u ~ Gamma(a u, rate b)``."""

    a: float
    b: float

    def __post_init__(self):
        if not _finite("a", self.a) > 0 or not _finite("b", self.b) > 0:
            raise SpecError("gamma subordinator needs a > 0 and b > 0")


JumpSpec = Optional[Union[CompoundPoisson, GammaSubordinator]]


@dataclass(frozen=True)
class ProcessSpec:
    drift: float = 0.0
    gaussian_var: float = 0.0
    jumps: JumpSpec = None

    def __post_init__(self):
        object.__setattr__(self, "drift", _finite("drift", self.drift))
        object.__setattr__(self, "gaussian_var", _finite("gaussian_var", self.gaussian_var))
        if self.gaussian_var < 0:
            raise SpecError("gaussian_var must be >= 0")
        if self.jumps is not None and not isinstance(self.jumps, (CompoundPoisson, GammaSubordinator)):
            raise IntegrabilityError(f"unsupported jump component {self.jumps!r}")

    def to_dict(self):
        return spec_to_dict(self)

    @classmethod
    def from_dict(cls, d):
        return spec_from_dict(d)


def brownian(var=1.0, drift=0.0):
    return ProcessSpec(drift=drift, gaussian_var=var)


def is_standard_brownian(spec):
    return spec.jumps is None and spec.gaussian_var == 1.0 and spec.drift == 0.0


# ------------------------------------------------------------ serialization

_LAW_FIELDS = {"normal": ("mean", "var"), "exponential": ("rate",),
               "two_point": ("p", "x_plus", "x_minus")}
_NON_INTEGRABLE = {"cauchy", "stable", "levy_stable"}


def _law_to_dict(law):
    if isinstance(law, NormalLaw):
        return {"kind": "normal", "mean": law.mean, "var": law.var}
    if isinstance(law, ExponentialLaw):
        return {"kind": "exponential", "rate": law.rate}
    return {"kind": "two_point", "p": law.p, "x_plus": law.x_plus, "x_minus": law.x_minus}


def spec_to_dict(spec):
    if spec.jumps is None:
        jumps = {"kind": "none"}
    elif isinstance(spec.jumps, CompoundPoisson):
        jumps = {"kind": "compound_poisson", "rate": spec.jumps.rate,
                 "jump_law": _law_to_dict(spec.jumps.jump_law)}
    else:
        jumps = {"kind": "gamma", "a": spec.jumps.a, "b": spec.jumps.b}
    return {"drift": spec.drift, "gaussian_var": spec.gaussian_var, "jumps": jumps}


def _check_keys(d, allowed, where):
    extra = set(d) - set(allowed)
    if extra:
        raise SpecError(f"unknown field(s) in {where}: {sorted(extra)}")


def _law_from_dict(d):
    kind = d.get("kind")
    if kind in _NON_INTEGRABLE:
        raise IntegrabilityError(f"jump law {kind!r} has no finite first moment")
    if kind not in _LAW_FIELDS:
        raise SpecError(f"unknown jump law kind {kind!r}")
    _check_keys(d, ("kind",) + _LAW_FIELDS[kind], "jump_law")
    try:
        args = {k: float(d[k]) for k in _LAW_FIELDS[kind]}
    except KeyError as e:
        raise SpecError(f"jump_law {kind!r} is missing field {e.args[0]!r}") from None
    return {"normal": NormalLaw, "exponential": ExponentialLaw, "two_point": TwoPointLaw}[kind](**args)


def spec_from_dict(d):
    """Parse ``{"drift", "gaussian_var", "jumps": {"kind": ...}}``."""
    if not isinstance(d, dict):
        raise SpecError("process spec must be a JSON object")
    _check_keys(d, ("drift", "gaussian_var", "jumps"), "spec")
    jd = d.get("jumps", {"kind": "none"}) or {"kind": "none"}
    kind = jd.get("kind")
    if kind == "none":
        _check_keys(jd, ("kind",), "jumps")
        jumps = None
    elif kind == "compound_poisson":
        _check_keys(jd, ("kind", "rate", "jump_law"), "jumps")
        if "rate" not in jd or "jump_law" not in jd:
            raise SpecError("compound_poisson needs 'rate' and 'jump_law'")
        jumps = CompoundPoisson(float(jd["rate"]), _law_from_dict(jd["jump_law"]))
    elif kind == "gamma":
        _check_keys(jd, ("kind", "a", "b"), "jumps")
        if "a" not in jd or "b" not in jd:
            raise SpecError("gamma needs 'a' and 'b'")
        jumps = GammaSubordinator(float(jd["a"]), float(jd["b"]))
    elif kind in _NON_INTEGRABLE:
        raise IntegrabilityError(f"jump component {kind!r} is not integrable")
    else:
        raise SpecError(f"unknown jumps kind {kind!r}")
    return ProcessSpec(drift=float(d.get("drift", 0.0)),
                       gaussian_var=float(d.get("gaussian_var", 0.0)), jumps=jumps)


# ----------------------------------------------------------------- moments

def jump_mean_rate(spec):
    """``int z nu(dz)``."""
    j = spec.jumps
    if j is None:
        return 0.0
    if isinstance(j, CompoundPoisson):
        return j.rate * j.jump_law.moment1()
    return j.a / j.b


def mean_rate(spec):
    """``E[xi_1] = drift + int z nu(dz)``."""
    return spec.drift + jump_mean_rate(spec)


def variance_rate(spec):
    """``Var(xi_1) = gaussian_var + int z^2 nu(dz)``."""
    j = spec.jumps
    if j is None:
        jv = 0.0
    elif isinstance(j, CompoundPoisson):
        jv = j.rate * j.jump_law.moment2()
    else:
        jv = j.a / j.b**2
    return spec.gaussian_var + jv


def center(spec):
    """Replace the drift so that ``mean_rate`` is exactly zero."""
    return replace(spec, drift=-jump_mean_rate(spec))


def is_centered(spec, tol=0.0):
    return abs(mean_rate(spec)) <= tol


def char_exponent(spec, lam):
    """Lévy exponent ``Phi(lam)``; vectorized over ``lam``."""
    lam = np.asarray(lam, dtype=float)
    phi = -1j * spec.drift * lam + 0.5 * spec.gaussian_var * lam**2
    j = spec.jumps
    if isinstance(j, CompoundPoisson):
        phi = phi + j.rate * (1.0 - j.jump_law.cf(lam))
    elif isinstance(j, GammaSubordinator):
        phi = phi + j.a * np.log(1.0 - 1j * lam / j.b)
    phi = np.asarray(phi, dtype=complex)
    return phi[()] if phi.ndim == 0 else phi


def char_function(spec, u, lam):
    """``E[exp(i lam xi_u)] = exp(-u Phi(lam))``."""
    return np.exp(-u * char_exponent(spec, lam))


# -------------------------------------------------------------------- grids

@dataclass(frozen=True)
class TimeGrid:
    horizon: float
    steps: int
    t0: float = 0.0
    pinned: tuple = ()

    def __post_init__(self):
        if int(self.steps) != self.steps or self.steps < 1:
            raise SpecError("steps must be a positive integer")
        object.__setattr__(self, "steps", int(self.steps))
        if not float(self.t0) < float(self.horizon):
            raise SpecError("grid needs t0 < horizon")
        object.__setattr__(self, "pinned", tuple(float(t) for t in self.pinned))
        for t in self.pinned:
            self.index(t)

    @property
    def step(self):
        return (self.horizon - self.t0) / self.steps

    @property
    def times(self):
        return self.t0 + (self.horizon - self.t0) * np.arange(self.steps + 1) / self.steps

    def index(self, t):
        """Node index of ``t``; raises :class:`PinNotOnGrid` if ``t`` is not a node."""
        k = round((t - self.t0) / self.step)
        if not 0 <= k <= self.steps or abs(self.t0 + k * self.step - t) > GRID_TOL * max(1.0, abs(self.horizon)):
            raise PinNotOnGrid(f"time {t} is not a node of {self}")
        return int(k)

    def time(self, k):
        return self.t0 + (self.horizon - self.t0) * k / self.steps

    @classmethod
    def covering(cls, times, horizon, t0=0.0, min_steps=1, max_steps=2**16):
        """Coarsest grid with at least ``min_steps`` steps having every time as a node."""
        times = [float(t) for t in times]
        span = horizon - t0
        for n in range(max(1, int(min_steps)), int(max_steps) + 1):
            h = span / n
            if all(abs(round((t - t0) / h) * h + t0 - t) <= GRID_TOL * max(1.0, abs(horizon))
                   and -GRID_TOL <= (t - t0) <= span + GRID_TOL for t in times):
                return cls(horizon=horizon, steps=n, t0=t0, pinned=tuple(times))
        raise PinNotOnGrid(f"no grid with at most {max_steps} steps has all of {times} as nodes")


@dataclass
class SamplePath:
    grid: TimeGrid
    values: np.ndarray
    seed: RngSeed
    path_index: int = 0
    atoms: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.steps + 1,):
            raise SpecError("values length must equal grid.steps + 1")

    def at(self, t):
        return self.values[self.grid.index(t)]

    def jump_at(self, t):
        """Jump of the path exactly at time ``t`` (recorded atoms only)."""
        return self.atoms.get(float(t), 0.0)


# ----------------------------------------------------------------- sampling

def _poisson_cdf(mu):
    if mu > MAX_POISSON_MEAN:
        raise SpecError(f"Poisson mean per step {mu} exceeds {MAX_POISSON_MEAN}; refine the grid")
    p = math.exp(-mu)
    F = p
    table = [F]
    k = 0
    while F < 1.0 and k < 100_000:
        k += 1
        p = p * mu / k
        if p == 0.0:
            break
        F = F + p
        table.append(F)
    return np.array(table)


def kernel_args(spec, dt):
    """Pack a spec into the flat arguments understood by the kernels."""
    params = np.zeros(8)
    params[0] = spec.drift
    params[1] = spec.gaussian_var
    j = spec.jumps
    jump_kind, law_kind = 0, 0
    cdf = np.ones(1)
    if isinstance(j, CompoundPoisson):
        jump_kind = 1
        params[2] = j.rate
        law = j.jump_law
        if isinstance(law, NormalLaw):
            law_kind, params[3], params[4] = 0, law.mean, law.var
        elif isinstance(law, ExponentialLaw):
            law_kind, params[3] = 1, law.rate
        else:
            law_kind, params[3], params[4], params[5] = 2, law.p, law.x_plus, law.x_minus
        cdf = _poisson_cdf(j.rate * dt)
    elif isinstance(j, GammaSubordinator):
        jump_kind = 2
        params[6], params[7] = j.a, j.b
    return jump_kind, law_kind, params, cdf


def _check_paths(path_offset, n_paths):
    if n_paths < 0 or path_offset < 0 or path_offset + n_paths > 2**32:
        raise SpecError("path indices must lie in [0, 2**32)")


def default_block_paths(steps):
    return max(1, BLOCK_ELEMENTS // (steps + 1))


def sample_block(spec, grid, start, seed, path_offset, n_paths, backend=None):
    """Values of paths ``path_offset .. path_offset+n_paths-1``, shape (n, steps+1)."""
    _check_paths(path_offset, n_paths)
    impl = kernels if backend is None else kernels.get_backend(backend)
    jk, lk, params, cdf = kernel_args(spec, grid.step)
    return impl.levy_values(as_seed(seed).root, int(path_offset), int(n_paths), grid.steps,
                            float(grid.step), float(start), jk, lk, params, cdf)


def block_ranges(n_paths, block_paths, path_offset=0):
    return [(path_offset + o, min(block_paths, n_paths - o)) for o in range(0, n_paths, block_paths)]


def iter_path_blocks(spec, grid, start, seed, n_paths, block_paths=None, path_offset=0):
    """Yield ``(offset, values)`` blocks; the concatenation is independent of block size."""
    block_paths = block_paths or default_block_paths(grid.steps)
    for off, n in block_ranges(n_paths, block_paths, path_offset):
        yield off, sample_block(spec, grid, start, seed, off, n)


_default_workers = 1


@contextlib.contextmanager
def parallel_workers(n):
    """Temporarily set the worker count used when ``workers`` is not given.

    Blocks are keyed by path index, so results do not depend on ``n``.
    """
    global _default_workers
    old, _default_workers = _default_workers, max(1, int(n))
    try:
        yield
    finally:
        _default_workers = old


def map_blocks(fn, ranges, workers=None):
    """Apply ``fn(offset, n)`` to every block, results in block order."""
    workers = _default_workers if workers is None else workers
    if workers <= 1 or len(ranges) <= 1:
        return [fn(o, n) for o, n in ranges]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(lambda r: fn(*r), ranges))


def sample_paths(spec, grid, start, seed, n_paths, path_offset=0, block_paths=None, workers=None,
                 columns=None):
    """Path values, shape (n_paths, grid.steps + 1).

    ``columns`` (node indices) keeps only those nodes of each block, which
    bounds memory for fine grids.
    """
    block_paths = block_paths or default_block_paths(grid.steps)
    cols = slice(None) if columns is None else np.asarray(columns, dtype=np.intp)

    def run(o, n):
        return sample_block(spec, grid, start, seed, o, n)[:, cols]

    parts = map_blocks(run, block_ranges(n_paths, block_paths, path_offset), workers)
    if not parts:
        width = grid.steps + 1 if columns is None else len(cols)
        return np.empty((0, width))
    return np.concatenate(parts, axis=0)


def sample_path(spec, grid, start, seed, path_index=0):
    seed = as_seed(seed)
    values = sample_block(spec, grid, start, seed, path_index, 1)[0]
    return SamplePath(grid, values, seed, path_index)


def sample_increments(spec, dt, n, seed, path_offset=0):
    """``n`` independent increments over a step of length ``dt``."""
    if not dt > 0:
        raise SpecError("dt must be > 0")
    grid = TimeGrid(horizon=float(dt), steps=1)
    return sample_paths(spec, grid, 0.0, seed, n, path_offset)[:, 1]


def sample_increment(spec, dt, seed, index=0):
    return float(sample_increments(spec, dt, 1, seed, index)[0])
