"""Vectorized numpy mirror of the numba kernels.

Draw-for-draw identical to ``_numba``: same counters, same transforms, same
order of floating-point additions.  Differences are limited to last-ulp
discrepancies between numpy and LLVM transcendental functions.
"""

import numpy as np

from . import _philox as P


def _pair(c0, c1, c2, c3, k0, k1):
    return P.uniform_pair(c0, c1, c2, c3, k0, k1)


def _u64(a):
    return np.asarray(a, dtype=np.uint64)


def gaussian_block(k0, k1, paths, n_steps):
    """Standard normals for steps 0..n_steps-1, shape (len(paths), n_steps)."""
    n_pairs = (n_steps + 1) // 2
    c0 = _u64(np.arange(n_pairs))[None, :]
    c2 = _u64(paths)[:, None]
    c0, c2 = np.broadcast_arrays(c0, c2)
    zero = np.zeros_like(c0)
    ua, ub = _pair(c0, zero, c2, np.full_like(c0, P.TAG_GAUSS), k0, k1)
    r = np.sqrt(-2.0 * np.log(ua))
    z = np.empty((len(paths), n_steps))
    z[:, 0::2] = (r * np.cos(P.TWO_PI * ub))[:, : (n_steps + 1) // 2]
    z[:, 1::2] = (r * np.sin(P.TWO_PI * ub))[:, : n_steps // 2]
    return z


def _gamma_unit(shape, steps, paths, k0, k1):
    d = shape - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    out = np.empty(steps.shape)
    pending = np.arange(steps.size)
    m = 0
    while pending.size:
        s = steps[pending]
        pa = paths[pending]
        mm = np.full_like(s, np.uint64(m))
        ua, ub = _pair(s, mm, pa, np.full_like(s, P.TAG_GAMMA_NORMAL), k0, k1)
        z = np.sqrt(-2.0 * np.log(ua)) * np.cos(P.TWO_PI * ub)
        v = 1.0 + c * z
        ok = v > 0.0
        accept = np.zeros(pending.size, dtype=bool)
        if ok.any():
            zi = z[ok]
            vi = v[ok]
            vi = vi * vi * vi
            u, _ = _pair(s[ok], mm[ok], pa[ok], np.full_like(s[ok], P.TAG_GAMMA_ACCEPT), k0, k1)
            acc = np.log(u) < 0.5 * zi * zi + d - d * vi + d * np.log(vi)
            idx = np.flatnonzero(ok)[acc]
            out[pending[idx]] = d * vi[acc]
            accept[idx] = True
        pending = pending[~accept]
        m += 1
    return out


def levy_values(root, path_offset, n_paths, n_steps, dt, start,
                jump_kind, law_kind, params, poisson_cdf):
    k0, k1 = P.split_key(root)
    drift, gvar = params[0], params[1]
    dd = drift * dt
    sd = np.sqrt(gvar * dt)
    l0, l1, l2 = params[3], params[4], params[5]
    alpha = params[6] * dt
    rate_b = params[7]
    paths = np.arange(path_offset, path_offset + n_paths, dtype=np.uint64)

    if gvar > 0.0:
        inc = dd + sd * gaussian_block(k0, k1, paths, n_steps)
    else:
        inc = np.full((n_paths, n_steps), dd)

    if n_steps > 0 and jump_kind in (1, 2):
        steps2d, paths2d = np.broadcast_arrays(
            _u64(np.arange(n_steps))[None, :], paths[:, None])
        zero = np.zeros_like(steps2d)

    if n_steps > 0 and jump_kind == 1:
        u, _ = _pair(steps2d, zero, paths2d, np.full_like(steps2d, P.TAG_POISSON), k0, k1)
        counts = np.minimum(np.searchsorted(poisson_cdf, u, side="left"), len(poisson_cdf) - 1)
        jsum = np.zeros((n_paths, n_steps))
        for j in range(int(counts.max(initial=0))):
            mask = counts > j
            s = steps2d[mask]
            ua, ub = _pair(s, np.full_like(s, np.uint64(j)), paths2d[mask],
                           np.full_like(s, P.TAG_JUMP), k0, k1)
            if law_kind == 0:
                jump = l0 + np.sqrt(l1) * (np.sqrt(-2.0 * np.log(ua)) * np.cos(P.TWO_PI * ub))
            elif law_kind == 1:
                jump = -np.log(ua) / l0
            else:
                jump = np.where(ua < l0, l1, l2)
            jsum[mask] = jsum[mask] + jump
        inc = inc + jsum
    elif n_steps > 0 and jump_kind == 2:
        boosted = alpha < 1.0
        shape = alpha + 1.0 if boosted else alpha
        g = _gamma_unit(shape, steps2d.ravel(), paths2d.ravel(), k0, k1).reshape(n_paths, n_steps)
        if boosted:
            ub, _ = _pair(steps2d, zero, paths2d, np.full_like(steps2d, P.TAG_GAMMA_BOOST), k0, k1)
            g = g * np.exp(np.log(ub) / alpha)
        inc = inc + g / rate_b

    out = np.empty((n_paths, n_steps + 1))
    out[:, 0] = start
    out[:, 1:] = inc
    return np.cumsum(out, axis=1)


def bridge_sde_values(root, path_offset, n_paths, n_steps, T, x, y, noise):
    k0, k1 = P.split_key(root)
    h = T / n_steps
    ns = noise * np.sqrt(h)
    paths = np.arange(path_offset, path_offset + n_paths, dtype=np.uint64)
    z = gaussian_block(k0, k1, paths, max(n_steps - 1, 0))
    out = np.empty((n_paths, n_steps + 1))
    X = np.full(n_paths, float(x))
    out[:, 0] = X
    for k in range(n_steps - 1):
        t = k * h
        dr = h * (y - X) / (T - t)
        X = (X + ns * z[:, k]) + dr
        out[:, k + 1] = X
    out[:, n_steps] = y
    return out
