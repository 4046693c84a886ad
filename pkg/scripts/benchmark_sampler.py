"""Numba acceleration benchmark for the latent MH sampler.

Times sample_latent with and without the jit kernels on one synthetic
panel, same seed and start state for both paths so the work is
identical. The jit path gets one unmeasured warm-up call for
compilation. If numba is not installed the script still times the pure
NumPy path and says so.

Run:

    python scripts/benchmark_sampler.py
"""

import statistics
import time

import numpy as np

from countgraph import (
    ChainConfig,
    generate,
    make_truth,
    numba_available,
    sample_latent,
    stationary_covariance,
)

HAVE_NUMBA = numba_available()


def make_problem(n=10, p=2, N=200, seed=5):
    spec = make_truth(n=n, p=p, N=N, sparsity=0.2, magnitude=0.3,
                      sigma=0.4, seed=seed, beta_col=(2.0, 0.005, 0.4, 0.4))
    panel, _, _ = generate(spec)
    stat = stationary_covariance(spec.params)
    return panel, spec.params, stat


def time_run(panel, params, stat, use_numba, repeats, m=2000, burn_in=500):
    durations = []
    values = None
    for r in range(repeats):
        config = ChainConfig(m=m, burn_in=burn_in, thin=1, seed=99)
        t0 = time.perf_counter()
        res = sample_latent(panel, params, config, stat=stat,
                            use_numba=use_numba)
        durations.append(time.perf_counter() - t0)
        if values is None:
            values = res.values
    return {
        "mean": statistics.mean(durations),
        "std": statistics.pstdev(durations) if len(durations) > 1 else 0.0,
        "durations": durations,
        "values": values,
        "acceptance": float(np.mean(res.acceptance)),
    }


def main():
    panel, params, stat = make_problem()

    if HAVE_NUMBA:
        print("[warmup] one unmeasured jit run for compilation")
        sample_latent(panel, params, ChainConfig(m=20, burn_in=10, seed=1),
                      stat=stat, use_numba=True)
    else:
        print("[info] numba not installed; timing the pure NumPy path only")

    repeats = 5 if HAVE_NUMBA else 3
    res_np = time_run(panel, params, stat, use_numba=False, repeats=repeats)
    res_nb = (time_run(panel, params, stat, use_numba=True, repeats=repeats)
              if HAVE_NUMBA else None)

    print(f"\n=== latent sampler benchmark "
          f"(n={panel.n}, N={panel.N}, p={params.p}, m=2000) ===")
    header = f"{'variant':12s} {'mean(s)':>9s} {'std(s)':>8s} {'accept':>8s}  durations"
    print(header)
    print("-" * len(header))
    print(f"{'pure numpy':12s} {res_np['mean']:9.4f} {res_np['std']:8.4f} "
          f"{res_np['acceptance']:8.3f}  {[round(d, 4) for d in res_np['durations']]}")
    if res_nb:
        print(f"{'numba jit':12s} {res_nb['mean']:9.4f} {res_nb['std']:8.4f} "
              f"{res_nb['acceptance']:8.3f}  {[round(d, 4) for d in res_nb['durations']]}")

        if np.array_equal(res_np["values"], res_nb["values"]):
            print("\nsampled values: bit-identical across paths")
        else:
            worst = float(np.max(np.abs(res_np["values"] - res_nb["values"])))
            print(f"\n[warn] paths disagree, max abs diff {worst:.3e}")

        if res_nb["mean"] > 0:
            print(f"speedup (numpy / numba): "
                  f"{res_np['mean'] / res_nb['mean']:.2f}x")

    print("\ndone.")


if __name__ == "__main__":
    main()
