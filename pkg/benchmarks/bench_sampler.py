"""Benchmark the numba sweep kernels against the pure numpy fallback.

Runs identical blocked and plain chains through both backends on a
synthetic 3-cluster problem and reports per-sweep times plus the speedup.

Usage: python3 benchmarks/bench_sampler.py [--n 900] [--d 8] [--sweeps 40]
"""

import argparse
import time

import numpy as np

import repdensity as rd
from repdensity import sampler as sm
from repdensity.kernels import get_backend


def make_problem(n, d, seed=0):
    rng = np.random.default_rng(seed)
    centers = np.zeros((3, d))
    centers[0, 0] = -6.0
    centers[1, 0] = 6.0
    centers[2, 1] = 9.0
    comp = rng.integers(0, 3, size=n)
    X = centers[comp] + rng.standard_normal((n, d))
    nu0 = float(d + 2)
    var = X.var(axis=0)
    prior = rd.NIWParams(mu0=X.mean(axis=0), kappa0=1.0, nu0=nu0,
                         psi0=np.diag(var * (nu0 - d - 1.0)))
    return X, prior


def run_backend(backend_name, X, prior, sweeps, block_size, seed=1):
    backend = get_backend(backend_name)
    gen = np.random.default_rng(seed)
    state = sm._init_chain(X, prior, gen)
    sweep = backend.block_sweep if block_size else backend.plain_sweep
    n = X.shape[0]
    start = time.perf_counter()
    for _ in range(sweeps):
        state._ensure_capacity()
        prev = state._n_slots
        args = (state.data, state._assign, state._counts, state._sums,
                state._chols, state._logdets, state._n_slots, state.alpha,
                prior.mu0, prior.kappa0, prior.nu0, prior.psi0,
                prior.chol_psi0, prior.log_det_psi0)
        if block_size:
            perm = gen.permutation(n)
            uniforms = gen.random(n)
            state._n_slots = sweep(*args, uniforms, perm, block_size)
        else:
            uniforms = gen.random(n)
            state._n_slots = sweep(*args, uniforms)
        state._compact(prev)
        sm.resample_alpha(state, gen)
    elapsed = time.perf_counter() - start
    return elapsed, state.n_components


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=900)
    parser.add_argument("--d", type=int, default=8)
    parser.add_argument("--sweeps", type=int, default=40)
    parser.add_argument("--block-size", type=int, default=4)
    args = parser.parse_args()

    X, prior = make_problem(args.n, args.d)
    print(f"problem: n={args.n} d={args.d} sweeps={args.sweeps} "
          f"block_size={args.block_size}")

    rows = []
    for mode, block in (("block", args.block_size), ("plain", 0)):
        # warm up the JIT outside the timed region
        run_backend("numba", X[:32], prior, 2, block)
        t_nb, k_nb = run_backend("numba", X, prior, args.sweeps, block)
        t_np, k_np = run_backend("numpy", X, prior, args.sweeps, block)
        rows.append((mode, t_nb, t_np, k_nb, k_np))

    print(f"{'kernel':<8} {'numba ms/sweep':>15} {'numpy ms/sweep':>15} "
          f"{'speedup':>8}  components")
    for mode, t_nb, t_np, k_nb, k_np in rows:
        per_nb = 1e3 * t_nb / args.sweeps
        per_np = 1e3 * t_np / args.sweeps
        print(f"{mode:<8} {per_nb:>15.2f} {per_np:>15.2f} "
              f"{t_np / t_nb:>7.1f}x  {k_nb}/{k_np}")


if __name__ == "__main__":
    main()
