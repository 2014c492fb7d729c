"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Each kernel runs the same inputs on both backends; the table reports the
best wall-clock time of ``--repeat`` runs and the largest state difference
between the two backends.
"""

import argparse
import math
import time

import numpy as np

from percept_ctl import _backend
from percept_ctl.steering import ReceptorArray, receptor_draws
from percept_ctl.standard_parts import EXAMPLE_GAINS, StandardPartsController, example_three_channel_system


def corridor_case(n_steps):
    args = (1.0, 0.0, math.radians(100.0), 1.0, 2.0, 1.0, 0.2, 1e-3, n_steps, 0)
    return lambda k: k.corridor_run(*args)[0]


def noisy_case(n_steps, n_per_side):
    d = receptor_draws(ReceptorArray(n_per_side, 0.3, 0.2), np.random.default_rng(0), n_steps)
    args = (1.0, 0.0, math.radians(100.0), 1.0, 2.0, 1.0, 0.2, 1e-2, n_steps,
            d["d_left"], d["d_right"], d["alive_left"], d["alive_right"], 0.2, d["z_left"], d["z_right"])
    return lambda k: k.corridor_noisy_run(*args)[0]


def affine_case(n_steps):
    sys = example_three_channel_system()
    loops = [StandardPartsController.build(sys, EXAMPLE_GAINS, g).closed_loop(sys) for g in ((1, 0), (0, 1))]
    Ms = np.array([M for M, _ in loops])
    cs = np.array([c for _, c in loops])
    modes = np.repeat(np.random.default_rng(0).integers(0, 2, n_steps // 50 + 1), 50)[:n_steps]
    return lambda k: k.affine_run(Ms, cs, modes, np.zeros(2), 1e-3)[0]


def best_time(fn, kernels, repeat):
    best, out = math.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(kernels)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    if _backend.compiled_kernels is None:
        raise SystemExit("compiled kernels are not built; run `python3 setup.py build_ext --inplace`")
    cases = [
        ("corridor_run, 60k steps", corridor_case(60_000)),
        ("corridor_noisy_run, 6k steps x 200/side", noisy_case(6_000, 200)),
        ("affine_run, 30k steps", affine_case(30_000)),
    ]
    print(f"{'kernel':42s} {'python s':>10s} {'cython s':>10s} {'speedup':>8s} {'max diff':>10s}")
    for name, fn in cases:
        tp, xp = best_time(fn, _backend.python_kernels, args.repeat)
        tc, xc = best_time(fn, _backend.compiled_kernels, args.repeat)
        diff = float(np.abs(xp - xc).max())
        print(f"{name:42s} {tp:10.4f} {tc:10.4f} {tp / tc:8.1f} {diff:10.2e}")


if __name__ == "__main__":
    main()
