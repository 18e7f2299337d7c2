"""Time the hot training kernels on both backends.

Runs the batch loss/gradient kernel and the Adagrad update through the pure
numpy implementations and, when numba imports, through the jitted loops, and
prints the per-call times plus the speedup. JIT compilation happens during
warmup and is excluded from the timing.

Usage: python benchmarks/bench_kernels.py [--batch 256] [--dim 64] [--iters 300]
"""

import argparse
import time

import numpy as np

from dstrain import kernels


def make_problem(rng, batch, dim, classes=8):
    return (
        rng.normal(size=(classes, dim)),
        rng.normal(size=classes),
        rng.normal(size=(4, dim)),
        rng.normal(size=4),
        rng.normal(size=(batch, dim)),
        rng.integers(0, classes, size=batch),
        rng.uniform(0, 1, size=(batch, 4)),
    )


def time_call(fn, args, iters):
    fn(*args)  # warmup (and JIT compile)
    start = time.perf_counter()
    for _ in range(iters):
        fn(*args)
    return (time.perf_counter() - start) / iters


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--batch", type=int, default=256)
    parser.add_argument("--dim", type=int, default=64)
    parser.add_argument("--iters", type=int, default=300)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    problem = make_problem(rng, args.batch, args.dim)

    try:
        numba_kernels = kernels._build_numba_kernels()
    except ImportError:
        numba_kernels = None
        print("numba not importable; timing the numpy path only")

    rows = []

    numpy_loss = time_call(kernels._np_batch_loss_grads, problem, args.iters)
    numba_loss = (
        time_call(numba_kernels["batch_loss_grads"], problem, args.iters)
        if numba_kernels
        else None
    )
    rows.append(("batch_loss_grads", numpy_loss, numba_loss))

    param = rng.normal(size=(8, args.dim))
    grad = rng.normal(size=(8, args.dim))
    acc = np.abs(rng.normal(size=(8, args.dim)))
    ada_args = (param, grad, acc, 0.001, 1e-10)
    numpy_ada = time_call(kernels._np_adagrad_update, ada_args, args.iters)
    numba_ada = (
        time_call(numba_kernels["adagrad_update"], ada_args, args.iters)
        if numba_kernels
        else None
    )
    rows.append(("adagrad_update", numpy_ada, numba_ada))

    feats = problem[4]
    aff_args = (problem[0], problem[1], feats)
    numpy_aff = time_call(kernels._np_affine_batch, aff_args, args.iters)
    numba_aff = (
        time_call(numba_kernels["affine_batch"], aff_args, args.iters)
        if numba_kernels
        else None
    )
    rows.append(("affine_batch", numpy_aff, numba_aff))

    print(f"batch={args.batch} dim={args.dim} iters={args.iters}")
    print(f"{'kernel':<18}{'numpy (us)':>12}{'numba (us)':>12}{'speedup':>10}")
    for name, np_time, nb_time in rows:
        if nb_time is None:
            print(f"{name:<18}{np_time * 1e6:>12.1f}{'-':>12}{'-':>10}")
        else:
            print(
                f"{name:<18}{np_time * 1e6:>12.1f}{nb_time * 1e6:>12.1f}"
                f"{np_time / nb_time:>10.2f}x"
            )


if __name__ == "__main__":
    main()
