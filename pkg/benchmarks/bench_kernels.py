"""Time the numba kernels against their numpy twins.

    python benchmarks/bench_kernels.py [--repeat 20] [--paths 4000]

Reports the best wall time per call for each backend, the speed-up, and
the largest disagreement between the two results.
"""
import argparse
import time

import numpy as np

from degradex import kernels
from degradex._backend import HAVE_NUMBA
from degradex.likelihood import PanelLikelihood, _THETA_IDX
from degradex.model import DEFAULT_NORMALIZATION, PARAM_NAMES, REFERENCE_PARAMS, ModelVariant, log_rate
from degradex.synth import ExperimentDesign, generate_dataset


def best_time(fn, repeat):
    fn()  # warm-up, includes JIT compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def loglik_case(population):
    norm = DEFAULT_NORMALIZATION
    ds = generate_dataset(REFERENCE_PARAMS, "m0", ExperimentDesign(), norm, seed=0)
    lik = PanelLikelihood(ds, ModelVariant.M0, norm)
    rng = np.random.default_rng(1)
    base = REFERENCE_PARAMS.to_array()
    full = base * (1 + 0.05 * rng.standard_normal((population, len(PARAM_NAMES))))
    full = np.abs(full)
    full[:, PARAM_NAMES.index("t_threshold")] = base[PARAM_NAMES.index("t_threshold")]
    full[:, PARAM_NAMES.index("alpha3")] = base[PARAM_NAMES.index("alpha3")]
    i = {n: k for k, n in enumerate(PARAM_NAMES)}
    loge = log_rate(
        full[:, i["alpha1"], None], full[:, i["alpha2"], None], full[:, i["alpha3"], None],
        full[:, i["t_threshold"], None], lik.temps[None, :], lik.hums[None, :], norm,
    )
    theta = full[:, _THETA_IDX]
    return lambda nb: kernels.loglik_batch(theta, loge, lik.layout, use_numba=nb)


def passage_case(paths, steps):
    rng = np.random.default_rng(2)
    times = np.arange(steps, dtype=float)
    y0 = rng.normal(8.8, 0.1, paths)
    a = rng.normal(0.004, 0.001, paths)
    drift = times**0.55
    z = rng.standard_normal((paths, steps - 1))
    noise = np.empty((paths, 0))
    return lambda nb: kernels.first_passage(y0, a, drift, times, z, 0.01, noise, 9.0, use_numba=nb)[0]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--population", type=int, default=20)
    ap.add_argument("--paths", type=int, default=4000)
    ap.add_argument("--steps", type=int, default=2000)
    args = ap.parse_args()
    if not HAVE_NUMBA:
        print("numba unavailable (or disabled); only the numpy path can run")
        return
    cases = {
        f"loglik_batch ({args.population} candidates, 96 units x 40)": loglik_case(args.population),
        f"first_passage ({args.paths} paths x {args.steps} steps)": passage_case(args.paths, args.steps),
    }
    print(f"{'kernel':<48} {'numba ms':>10} {'numpy ms':>10} {'speed-up':>9} {'max |diff|':>11}")
    for name, run in cases.items():
        t_nb = best_time(lambda: run(True), args.repeat)
        t_np = best_time(lambda: run(False), max(3, args.repeat // 4))
        diff = float(np.max(np.abs(run(True) - run(False))))
        print(f"{name:<48} {t_nb * 1e3:>10.3f} {t_np * 1e3:>10.3f} {t_np / t_nb:>8.1f}x {diff:>11.2e}")


if __name__ == "__main__":
    main()
