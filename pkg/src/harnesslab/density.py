"""Transition densities and a density identity for Lévy processes.

For a Lévy process with triplet ``(d, sigma2, nu)`` and transition density
``phi_u`` the identity checked here is::

    -sigma2 * phi_u'(x) + d * phi_u(x) + int nu(dz) z phi_u(x - z) = (x / u) * phi_u(x)

It follows by differentiating ``E[exp(i lam xi_u)] = exp(-u Phi(lam))`` in
``lam``.  With ``d = 0`` it is the drift-free form usually quoted.

Densities come from Fourier inversion of ``exp(-u Phi)`` on an FFT grid or,
for the Gaussian and gamma families, from closed forms.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.laguerre import laggauss
from numpy.polynomial.legendre import leggauss
from scipy import stats
from scipy.interpolate import CubicSpline
from scipy.special import gammaln

from .errors import (MassCheckFailed, NoDensity, QuadratureBudgetExceeded,
                     TruncationBudgetExceeded, UnsupportedFamily)
from .levy_models import (CompoundPoisson, ExponentialLaw, GammaSubordinator, NormalLaw,
                          ProcessSpec, char_function, jump_mean_rate, mean_rate, variance_rate)

MIN_POINTS = 2**10
MAX_POINTS = 2**22
TAIL_TOL = 1e-12
MASS_TOL = 5e-3
GL_NODES = 256
JUMP_LAW_NODES = 128
REL_FLOOR = 1e-8


@dataclass
class DensityGrid:
    u: float
    xs: np.ndarray
    phis: np.ndarray
    method: str
    dphis: Optional[np.ndarray] = None
    raw: Optional[np.ndarray] = None
    n_clamped: int = 0
    min_raw: float = 0.0
    cutoff: Optional[float] = None
    mass: Optional[float] = None
    spec: Optional[ProcessSpec] = None

    @property
    def dx(self):
        return float(self.xs[1] - self.xs[0])

    def __call__(self, x):
        """Density at arbitrary points (cubic interpolation, zero off-grid)."""
        x = np.asarray(x, dtype=float)
        if not hasattr(self, "_spline"):
            self._spline = CubicSpline(self.xs, self.phis)
        out = np.where((x >= self.xs[0]) & (x <= self.xs[-1]), self._spline(x), 0.0)
        return np.maximum(out, 0.0)


def has_density(spec):
    return spec.gaussian_var > 0 or isinstance(spec.jumps, GammaSubordinator)


def _require_density(spec, operation):
    if not has_density(spec):
        raise NoDensity("the law of xi_u has an atom (no Gaussian part and finite jump activity);"
                        " add a Gaussian component", operation)


def _is_pow2(n):
    return n >= 1 and n & (n - 1) == 0


def lambda_cutoff(spec, u, tail_tol=TAIL_TOL):
    """Smallest dyadic ``L`` with ``|exp(-u Phi(+-L))| < tail_tol``."""
    for m in range(-10, 61):
        lam = 2.0**m
        if max(abs(char_function(spec, u, lam)), abs(char_function(spec, u, -lam))) < tail_tol:
            return lam
    raise TruncationBudgetExceeded(
        f"|exp(-u Phi)| stays above {tail_tol} up to lambda = 2**60", "density_fourier")


def _fourier_invert(spec, u, x0, dx, n, multiplier=None):
    dlam = 2.0 * math.pi / (n * dx)
    lam = (np.arange(n) - n // 2) * dlam
    cf = char_function(spec, u, lam)
    if multiplier is not None:
        cf = cf * multiplier(lam)
    sign = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    vals = np.fft.fft(cf * np.exp(-1j * lam * x0))
    return (dlam / (2.0 * math.pi)) * sign * vals.real


def density_fourier(spec, u, x_halfwidth, n_points=MIN_POINTS, tail_tol=TAIL_TOL,
                    max_points=MAX_POINTS, center=None, mass_tol=MASS_TOL):
    """Invert ``exp(-u Phi)`` on ``center +- x_halfwidth``.

    ``n_points`` is a lower bound: it is doubled until the grid's Nyquist
    frequency reaches the dyadic cutoff where ``|exp(-u Phi)| < tail_tol``.
    The derivative is obtained spectrally (integrand times ``-i lam``).
    """
    _require_density(spec, "density_fourier")
    if not u > 0 or not x_halfwidth > 0:
        raise ValueError("u and x_halfwidth must be positive")
    if not _is_pow2(n_points) or n_points < MIN_POINTS:
        raise ValueError(f"n_points must be a power of two >= {MIN_POINTS}")
    lam_needed = lambda_cutoff(spec, u, tail_tol)
    n = int(n_points)
    while n * math.pi / (2.0 * x_halfwidth) < lam_needed:
        n *= 2
        if n > max_points:
            raise TruncationBudgetExceeded(
                f"cutoff {lam_needed} needs more than {max_points} points on halfwidth {x_halfwidth}",
                "density_fourier")
    c = mean_rate(spec) * u if center is None else float(center)
    dx = 2.0 * x_halfwidth / n
    x0 = c - x_halfwidth
    xs = x0 + dx * np.arange(n)
    raw = _fourier_invert(spec, u, x0, dx, n)
    dphis = _fourier_invert(spec, u, x0, dx, n, multiplier=lambda lam: -1j * lam)
    mass = float(np.trapezoid(raw, xs))
    if abs(mass - 1.0) > mass_tol:
        raise MassCheckFailed(f"density mass {mass:.6f} outside 1 +- {mass_tol}; widen x_halfwidth",
                              "density_fourier")
    neg = raw < 0
    return DensityGrid(u=float(u), xs=xs, phis=np.where(neg, 0.0, raw), method="fourier",
                       dphis=dphis, raw=raw, n_clamped=int(neg.sum()),
                       min_raw=float(raw.min()), cutoff=n * math.pi / (2.0 * x_halfwidth),
                       mass=mass, spec=spec)


# ------------------------------------------------------------- closed forms

def closed_form_family(spec):
    """``(family, params)`` for specs with a closed-form density."""
    if spec.jumps is None and spec.gaussian_var > 0:
        return "gaussian", {"var": spec.gaussian_var, "drift": spec.drift}
    if isinstance(spec.jumps, GammaSubordinator) and spec.gaussian_var == 0:
        return "gamma", {"a": spec.jumps.a, "b": spec.jumps.b, "drift": spec.drift}
    raise UnsupportedFamily(f"no closed-form density for {spec}")


def density_closed_form(family, params, u, x):
    """Exact density of ``xi_u`` for the Gaussian or gamma family."""
    x = np.asarray(x, dtype=float)
    drift = params.get("drift", 0.0)
    if family == "gaussian":
        out = stats.norm.pdf(x, loc=drift * u, scale=math.sqrt(params["var"] * u))
    elif family == "gamma":
        out = stats.gamma.pdf(x - drift * u, params["a"] * u, scale=1.0 / params["b"])
    else:
        raise UnsupportedFamily(f"unsupported family {family!r}")
    return out[()] if out.ndim == 0 else out


def density_closed_form_derivative(family, params, u, x):
    x = np.asarray(x, dtype=float)
    phi = np.asarray(density_closed_form(family, params, u, x))
    drift = params.get("drift", 0.0)
    if family == "gaussian":
        out = -(x - drift * u) / (params["var"] * u) * phi
    elif family == "gamma":
        z = x - drift * u
        k, b = params["a"] * u, params["b"]
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(z > 0, phi * ((k - 1.0) / z - b), 0.0)
    else:
        raise UnsupportedFamily(f"unsupported family {family!r}")
    return out[()] if out.ndim == 0 else out


def density_grid_closed_form(spec, u, xs):
    family, params = closed_form_family(spec)
    xs = np.asarray(xs, dtype=float)
    phis = np.asarray(density_closed_form(family, params, u, xs))
    return DensityGrid(u=float(u), xs=xs, phis=phis, method="closed_form",
                       dphis=np.asarray(density_closed_form_derivative(family, params, u, xs)),
                       raw=phis, spec=spec)


def density_spatial_derivative(grid):
    """``phi_u'`` on the grid nodes (spectral or analytic)."""
    if grid.dphis is None:
        raise ValueError("grid carries no derivative")
    return grid.dphis


def closed_form_density_fn(spec):
    """``phi(u, x)`` callable for specs with a closed form."""
    family, params = closed_form_family(spec)
    return lambda u, x: density_closed_form(family, params, u, x)


# -------------------------------------------------------- jump quadratures

def jump_moment_quadrature(spec, n_nodes=JUMP_LAW_NODES):
    """Nodes ``z_k`` and weights ``c_k`` with ``int f(z) z nu(dz) ~ sum c_k f(z_k)``."""
    j = spec.jumps
    if j is None:
        return np.zeros(0), np.zeros(0)
    if isinstance(j, CompoundPoisson):
        law = j.jump_law
        if isinstance(law, NormalLaw):
            t, w = hermegauss(n_nodes)
            z = law.mean + math.sqrt(law.var) * t
            q = w / math.sqrt(2.0 * math.pi)
        elif isinstance(law, ExponentialLaw):
            t, w = laggauss(n_nodes)
            z, q = t / law.rate, w
        else:
            z = np.array([law.x_plus, law.x_minus])
            q = np.array([law.p, 1.0 - law.p])
        nodes, weights = z, j.rate * q * z
        exact = (jump_mean_rate(spec), j.rate * law.moment2())
    else:
        zmax = 40.0 / j.b
        t, w = leggauss(GL_NODES)
        nodes = 0.5 * zmax * (t + 1.0)
        weights = 0.5 * zmax * w * j.a * np.exp(-j.b * nodes)
        exact = (j.a / j.b, j.a / j.b**2)
    got = (float(weights.sum()), float((weights * nodes).sum()))
    for g, e in zip(got, exact):
        if abs(g - e) > 1e-10 * max(1.0, abs(e)):
            raise QuadratureBudgetExceeded(
                f"jump quadrature moments {got} miss {exact}", "lemma_lhs")
    return nodes, weights


def jump_moment_transform(spec, lam):
    """``int e^{i lam z} z nu(dz)`` in closed form (equals ``i`` times the jump part of ``Phi'``).

    On the Fourier route this multiplier replaces node quadrature, whose
    aliasing at the high frequencies needed by the gamma family would leave
    an O(1e-2) error.
    """
    lam = np.asarray(lam, dtype=float)
    j = spec.jumps
    if j is None:
        return np.zeros(lam.shape, dtype=complex)
    if isinstance(j, GammaSubordinator):
        return j.a / (j.b - 1j * lam)
    law = j.jump_law
    if isinstance(law, NormalLaw):
        g = (law.mean + 1j * law.var * lam) * law.cf(lam)
    elif isinstance(law, ExponentialLaw):
        g = law.rate / (law.rate - 1j * lam) ** 2
    else:
        g = (law.p * law.x_plus * np.exp(1j * lam * law.x_plus)
             + (1 - law.p) * law.x_minus * np.exp(1j * lam * law.x_minus))
    return j.rate * g


def _gamma_jump_term_closed(a, b, k, w):
    """``int_0^w a e^{-bz} g(w - z) dz`` with ``g`` the Gamma(k, b) density.

    The substitution ``w - z = w v^{1/k}`` absorbs the ``s^{k-1}`` endpoint
    singularity, leaving a smooth integrand on ``[0, 1]``.
    """
    t, wt = leggauss(GL_NODES)
    v = 0.5 * (t + 1.0)
    wt = 0.5 * wt
    out = np.zeros_like(w)
    pos = w > 0
    wp = w[pos][:, None]
    s = wp * v[None, :] ** (1.0 / k)
    log_reg = k * math.log(b) - b * s - gammaln(k)
    integrand = a * np.exp(-b * (wp - s) + log_reg)
    out[pos] = np.exp(k * np.log(w[pos]) - math.log(k)) * (integrand @ wt)
    return out


# ---------------------------------------------------------------- identity

@dataclass
class IdentityReport:
    u: float
    xs: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    max_abs_err: float
    max_rel_err_on_bulk: float
    method: str = ""

    def to_dict(self):
        return {"u": self.u, "xs": self.xs.tolist(), "lhs": self.lhs.tolist(),
                "rhs": self.rhs.tolist(), "max_abs_err": self.max_abs_err,
                "max_rel_err_on_bulk": self.max_rel_err_on_bulk}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "lhs", "rhs", "abs_err"])
            for row in zip(self.xs, self.lhs, self.rhs, np.abs(self.lhs - self.rhs)):
                w.writerow([repr(float(v)) for v in row])


def _method_for(spec, method):
    if method != "auto":
        return method
    try:
        closed_form_family(spec)
        return "closed_form"
    except UnsupportedFamily:
        return "fourier"


def default_halfwidth(spec, u):
    return 16.0 * math.sqrt(variance_rate(spec) * u) + 4.0


def lemma_terms(spec, u, xs=None, method="auto", x_halfwidth=None, n_points=MIN_POINTS,
                tail_tol=TAIL_TOL):
    """``(xs, lhs, rhs)`` of the identity.

    ``closed_form`` evaluates at the given ``xs`` with Gauss-Legendre
    quadrature for the jump convolution; ``fourier`` evaluates on the FFT grid
    and computes the convolution as
    ``F^{-1}[exp(-u Phi) * int e^{i lam z} z nu(dz)]``.
    """
    _require_density(spec, "lemma_lhs")
    method = _method_for(spec, method)
    if method == "closed_form":
        family, params = closed_form_family(spec)
        xs = np.asarray(xs, dtype=float)
        phi = np.asarray(density_closed_form(family, params, u, xs))
        dphi = np.asarray(density_closed_form_derivative(family, params, u, xs))
        lhs = -spec.gaussian_var * dphi + spec.drift * phi
        if family == "gamma":
            k = params["a"] * u
            lhs = lhs + _gamma_jump_term_closed(params["a"], params["b"], k, xs - spec.drift * u)
    elif method == "fourier":
        L = x_halfwidth or default_halfwidth(spec, u)
        grid = density_fourier(spec, u, L, n_points=n_points, tail_tol=tail_tol)
        xs, phi, dphi = grid.xs, grid.raw, grid.dphis
        lhs = -spec.gaussian_var * dphi + spec.drift * phi
        if spec.jumps is not None:
            lhs = lhs + _fourier_invert(spec, u, xs[0], grid.dx, xs.size,
                                        multiplier=lambda lam: jump_moment_transform(spec, lam))
    else:
        raise ValueError(f"unknown method {method!r}")
    rhs = (xs / u) * phi
    return xs, lhs, rhs


def lemma_lhs(spec, u, xs=None, method="auto", **kw):
    return lemma_terms(spec, u, xs, method, **kw)[1]


def lemma_rhs(spec, u, xs=None, method="auto", **kw):
    return lemma_terms(spec, u, xs, method, **kw)[2]


def check_identity(spec, u, xs=None, method="auto", x_halfwidth=None, n_points=MIN_POINTS,
                   tail_tol=TAIL_TOL, rel_floor=REL_FLOOR, window=None):
    """Compare both sides; relative error is taken where ``|rhs| > rel_floor``.

    ``window=(lo, hi)`` restricts the reported points (Fourier grids only).
    """
    xs, lhs, rhs = lemma_terms(spec, u, xs, method, x_halfwidth=x_halfwidth,
                               n_points=n_points, tail_tol=tail_tol)
    if window is not None:
        keep = (xs >= window[0]) & (xs <= window[1])
        xs, lhs, rhs = xs[keep], lhs[keep], rhs[keep]
    err = np.abs(lhs - rhs)
    bulk = np.abs(rhs) > rel_floor
    rel = float(np.max(err[bulk] / np.abs(rhs[bulk]))) if bulk.any() else 0.0
    return IdentityReport(u=float(u), xs=xs, lhs=lhs, rhs=rhs,
                          max_abs_err=float(err.max()) if err.size else 0.0,
                          max_rel_err_on_bulk=rel, method=_method_for(spec, method))
