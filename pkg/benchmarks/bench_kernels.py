"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--size 256] [--repeat 20]

Also times one full SGP iteration budget on the imaging problem with each
backend, which is what ``SCALEDGP_DISABLE_NUMBA=1`` switches between.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from scaledgp import _kernels as K


def _best(fn, repeat):
    fn()  # warm-up, includes JIT compilation
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def kernel_table(size, repeat):
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 100, (size, size))
    g = rng.poisson(x + 10).astype(float)
    model = x + 10
    diag = rng.uniform(0.1, 10, (size, size))
    lo = np.zeros((size, size))
    hi = np.full((size, size), np.inf)
    cases = {
        "clamp_step": (lambda: K.clamp_step_numpy(x, g, 0.5, diag, lo, hi),
                       lambda: K.clamp_step_numba(x, g, 0.5, diag, lo, hi)),
        "kl_terms": (lambda: K.kl_terms_numpy(g, model), lambda: K.kl_terms_numba(g, model)),
        "hs_value": (lambda: K.hs_value_numpy(x, 1.0), lambda: K.hs_value_numba(x, 1.0)),
        "hs_split": (lambda: K.hs_split_numpy(x, 1.0), lambda: K.hs_split_numba(x, 1.0)),
        "hs_gradient": (lambda: K.hs_gradient_numpy(x, 1.0), lambda: K.hs_gradient_numba(x, 1.0)),
    }
    print(f"kernels on {size}x{size} images, best of {repeat}")
    print(f"{'kernel':12s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for name, (f_np, f_nb) in cases.items():
        t_np = _best(f_np, repeat) * 1e3
        t_nb = _best(f_nb, repeat) * 1e3
        print(f"{name:12s} {t_np:10.3f} {t_nb:10.3f} {t_np / t_nb:8.2f}")


_SOLVE = """
import time
import numpy as np
from scaledgp import BBSteplength, BoundSchedule, FeasibleRegion, ScaledMetric, StoppingRule, sgp_solve
from scaledgp._kernels import backend
from scaledgp.imaging import CompositeObjective, HSRegularizer, SplitGradientScaling, ellipse_phantom, simulate_problem
model, _ = simulate_problem(ellipse_phantom({size}), seed=0)
reg = HSRegularizer(1.0)
obj = CompositeObjective(model, reg, 0.0415)
metric = ScaledMetric(BoundSchedule.summable(1e10), SplitGradientScaling(reg, 0.0415))
x0 = np.full(model.shape, model.data.mean() - model.background)
region = FeasibleRegion.nonnegative(model.shape)
run = lambda n: sgp_solve(obj, region, metric, BBSteplength(), stop=StoppingRule(max_iter=n), x0=x0)
run(2)
t0 = time.perf_counter()
_, rec = run({iters})
print(backend(), rec.iterations, time.perf_counter() - t0)
"""


def solver_table(size, iters):
    print(f"\nSGP on the {size}x{size} phantom, {iters} iterations")
    for flag in ("0", "1"):
        env = dict(os.environ, SCALEDGP_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", _SOLVE.format(size=size, iters=iters)], env=env,
                             capture_output=True, text=True, check=True).stdout.split()
        name, done, seconds = out[0], int(out[1]), float(out[2])
        print(f"{name:6s} {seconds:7.3f} s  ({1e3 * seconds / max(done, 1):.2f} ms/iteration)")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=256)
    parser.add_argument("--repeat", type=int, default=20)
    parser.add_argument("--iters", type=int, default=200)
    args = parser.parse_args()
    kernel_table(args.size, args.repeat)
    solver_table(min(args.size, 128), args.iters)


if __name__ == "__main__":
    main()
