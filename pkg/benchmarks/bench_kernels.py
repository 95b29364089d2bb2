"""Time the numba kernels against the numpy fallback.

Usage: ``python benchmarks/bench_kernels.py [--paths N] [--steps K] [--repeat R]``

Both backends are loaded explicitly, so the ``HARNESSLAB_BACKEND`` variable
is irrelevant here.  The first numba call (compilation) is excluded.
"""

import argparse
import time

import numpy as np

from harnesslab import levy_models as lm
from harnesslab.kernels import get_backend

SPECS = {
    "brownian": lm.brownian(),
    "compound_poisson": lm.center(lm.ProcessSpec(gaussian_var=0.5,
                                                 jumps=lm.CompoundPoisson(2.0, lm.ExponentialLaw(1.0)))),
    "gamma": lm.center(lm.ProcessSpec(jumps=lm.GammaSubordinator(1.0, 1.0))),
}


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    p.add_argument("--paths", type=int, default=20_000)
    p.add_argument("--steps", type=int, default=64)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)

    grid = lm.TimeGrid(horizon=1.0, steps=args.steps)
    backends = {"numba": get_backend("numba"), "numpy": get_backend("numpy")}
    print(f"{'kernel':<18}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}{'max |diff|':>14}")
    for name, spec in SPECS.items():
        jk, lk, params, cdf = lm.kernel_args(spec, grid.step)
        out, t = {}, {}
        for b, mod in backends.items():
            def call(mod=mod):
                return mod.levy_values(12345, 0, args.paths, grid.steps, grid.step, 0.0,
                                       jk, lk, params, cdf)
            out[b] = call()  # warm-up and compilation
            t[b] = best_of(call, args.repeat)
        diff = float(np.max(np.abs(out["numba"] - out["numpy"])))
        print(f"{name:<18}{t['numba']:>12.4f}{t['numpy']:>12.4f}{t['numpy'] / t['numba']:>10.1f}{diff:>14.2e}")

    out, t = {}, {}
    for b, mod in backends.items():
        def call(mod=mod):
            return mod.bridge_sde_values(12345, 0, args.paths, grid.steps, 1.0, 0.0, 1.0, 1.0)
        out[b] = call()
        t[b] = best_of(call, args.repeat)
    diff = float(np.max(np.abs(out["numba"] - out["numpy"])))
    print(f"{'bridge_sde':<18}{t['numba']:>12.4f}{t['numpy']:>12.4f}{t['numpy'] / t['numba']:>10.1f}{diff:>14.2e}")


if __name__ == "__main__":
    main()
