"""Compare the compiled label kernels with the pure-Python fallback.

    python3 benchmarks/bench_kernels.py --n 20 --T 3 --sweeps 20
"""
import argparse
import time

import numpy as np

from dim3 import _backend
from dim3.generator import fixed_truth, generate_fixed
from dim3.gibbs import init_state, sample_labels
from dim3.slice import slice_step


def time_sweeps(model, kernels, data, sweeps, seed, use_slice=False):
    rng = np.random.default_rng(seed)
    state = init_state(data, model, rng, K_init=3)
    t0 = time.perf_counter()
    for _ in range(sweeps):
        if use_slice:
            for t in range(state.T):
                slice_step(state, t, rng, kernels)
            state.compact()
        else:
            sample_labels(state, rng, kernels=kernels)
    return (time.perf_counter() - t0) / sweeps


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--T", type=int, default=3)
    ap.add_argument("--sweeps", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    data = generate_fixed(fixed_truth(1, args.n), args.n, args.T, args.seed).data
    backends = {"python": _backend.python_kernels}
    if _backend.compiled_kernels is not None:
        backends["cython"] = _backend.compiled_kernels
    else:
        print("compiled kernels unavailable; timing the fallback only")
    print(f"n={args.n} T={args.T} sweeps={args.sweeps} (label updates only, seconds per sweep)")
    print(f"{'kernel':<14}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for label, model, use_slice in (("mtv-gibbs", "mtv", False), ("mti-gibbs", "mti", False),
                                    ("mtv-slice", "mtv", True)):
        times = {b: time_sweeps(model, k, data, args.sweeps, args.seed, use_slice)
                 for b, k in backends.items()}
        ratio = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{label:<14}" + "".join(f"{v:>12.4f}" for v in times.values()) + f"{ratio:>9.1f}x")


if __name__ == "__main__":
    main()
