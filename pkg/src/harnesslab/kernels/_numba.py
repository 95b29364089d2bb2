"""Scalar-loop kernels compiled with numba."""

import math

import numpy as np
from numba import njit

from . import _philox as P

_jit = njit(cache=True, nogil=True)

_philox = _jit(P.philox4x32)
_open_uniform = _jit(P.words_to_open_uniform)

TAG_GAUSS = P.TAG_GAUSS
TAG_POISSON = P.TAG_POISSON
TAG_JUMP = P.TAG_JUMP
TAG_GAMMA_NORMAL = P.TAG_GAMMA_NORMAL
TAG_GAMMA_ACCEPT = P.TAG_GAMMA_ACCEPT
TAG_GAMMA_BOOST = P.TAG_GAMMA_BOOST
MASK32 = P.MASK32
SHIFT32 = P.SHIFT32
TWO_PI = P.TWO_PI


@_jit
def _pair(c0, c1, c2, c3, k0, k1):
    x0, x1, x2, x3 = _philox(c0, c1, c2, c3, k0, k1)
    return _open_uniform(x0, x1), _open_uniform(x2, x3)


@_jit
def _gamma_unit(shape, step, path, k0, k1):
    """Marsaglia-Tsang draw of Gamma(shape, 1) for shape >= 1."""
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    m = 0
    while True:
        ua, ub = _pair(step, np.uint64(m), path, TAG_GAMMA_NORMAL, k0, k1)
        z = math.sqrt(-2.0 * math.log(ua)) * math.cos(TWO_PI * ub)
        v = 1.0 + c * z
        if v > 0.0:
            v = v * v * v
            u, _ = _pair(step, np.uint64(m), path, TAG_GAMMA_ACCEPT, k0, k1)
            if math.log(u) < 0.5 * z * z + d - d * v + d * math.log(v):
                return d * v
        m += 1


@_jit
def _levy_values(root, path_offset, n_paths, n_steps, dt, start,
                jump_kind, law_kind, params, poisson_cdf):
    root = np.uint64(root)
    k0 = root & MASK32
    k1 = root >> SHIFT32
    drift = params[0]
    gvar = params[1]
    dd = drift * dt
    sd = math.sqrt(gvar * dt)
    l0 = params[3]
    l1 = params[4]
    l2 = params[5]
    alpha = params[6] * dt
    rate_b = params[7]
    boosted = alpha < 1.0
    shape = alpha + 1.0 if boosted else alpha
    law_sd = math.sqrt(l1) if law_kind == 0 else 0.0
    n_cdf = poisson_cdf.shape[0]
    out = np.empty((n_paths, n_steps + 1))
    for p in range(n_paths):
        path = np.uint64(path_offset + p)
        x = start
        out[p, 0] = x
        z_next = 0.0
        for k in range(n_steps):
            step = np.uint64(k)
            inc = dd
            if gvar > 0.0:
                if k % 2 == 0:
                    ua, ub = _pair(np.uint64(k >> 1), np.uint64(0), path, TAG_GAUSS, k0, k1)
                    r = math.sqrt(-2.0 * math.log(ua))
                    z = r * math.cos(TWO_PI * ub)
                    z_next = r * math.sin(TWO_PI * ub)
                else:
                    z = z_next
                inc = dd + sd * z
            if jump_kind == 1:
                u, _ = _pair(step, np.uint64(0), path, TAG_POISSON, k0, k1)
                count = 0
                while count < n_cdf - 1 and u > poisson_cdf[count]:
                    count += 1
                jsum = 0.0
                for j in range(count):
                    ua, ub = _pair(step, np.uint64(j), path, TAG_JUMP, k0, k1)
                    if law_kind == 0:
                        jump = l0 + law_sd * (math.sqrt(-2.0 * math.log(ua)) * math.cos(TWO_PI * ub))
                    elif law_kind == 1:
                        jump = -math.log(ua) / l0
                    else:
                        jump = l1 if ua < l0 else l2
                    jsum = jsum + jump
                inc = inc + jsum
            elif jump_kind == 2:
                g = _gamma_unit(shape, step, path, k0, k1)
                if boosted:
                    ub, _ = _pair(step, np.uint64(0), path, TAG_GAMMA_BOOST, k0, k1)
                    g = g * math.exp(math.log(ub) / alpha)
                inc = inc + g / rate_b
            x = x + inc
            out[p, k + 1] = x
    return out


@_jit
def _bridge_sde_values(root, path_offset, n_paths, n_steps, T, x, y, noise):
    root = np.uint64(root)
    k0 = root & MASK32
    k1 = root >> SHIFT32
    h = T / n_steps
    ns = noise * math.sqrt(h)
    out = np.empty((n_paths, n_steps + 1))
    for p in range(n_paths):
        path = np.uint64(path_offset + p)
        X = x
        out[p, 0] = X
        z_next = 0.0
        for k in range(n_steps - 1):
            if k % 2 == 0:
                ua, ub = _pair(np.uint64(k >> 1), np.uint64(0), path, TAG_GAUSS, k0, k1)
                r = math.sqrt(-2.0 * math.log(ua))
                z = r * math.cos(TWO_PI * ub)
                z_next = r * math.sin(TWO_PI * ub)
            else:
                z = z_next
            t = k * h
            dr = h * (y - X) / (T - t)
            X = (X + ns * z) + dr
            out[p, k + 1] = X
        out[p, n_steps] = y
    return out


def levy_values(root, *args):
    # Python ints above 2**63 do not unbox to int64; pass the key as uint64.
    return _levy_values(np.uint64(root), *args)


def bridge_sde_values(root, *args):
    return _bridge_sde_values(np.uint64(root), *args)
