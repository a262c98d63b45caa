"""Event throughput of the compiled and pure-Python kernels.

    python benchmarks/bench_kernel.py [--events N] [--repeat R]

Both backends consume the same random stream, so the final configurations
are compared as a sanity check.
"""

import argparse
import time

import numpy as np

from slowbond import _backend
from slowbond.simulator import replica_rng

CASES = [(8, 2), (64, 4), (256, 8)]


def run(kernel, n, k, events, seed, with_observable):
    rng = np.random.default_rng(seed)
    occ = (rng.random(n * k) < 0.5).astype(np.uint8)
    extra = ()
    if with_observable:
        a = rng.standard_normal(n * k)
        extra = (a, np.zeros(k), float(occ @ a))
    bit_gen = replica_rng(seed, 0).bit_generator
    start = time.perf_counter()
    kernel.advance(occ, n, k, 0.5 * n**-1.5, 0.0, float("inf"), bit_gen, events, *extra)
    return time.perf_counter() - start, occ


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--events", type=int, default=200_000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    names = sorted(_backend.BACKENDS)
    print(f"backends: {names} (active: {_backend.NAME}); {args.events} events per run")
    print(f"{'n':>5} {'k':>3} {'observable':>10} " + " ".join(f"{b + ' ev/s':>16}" for b in names) + "  speedup")
    for n, k in CASES:
        for obs in (False, True):
            rates, finals = {}, {}
            for name in names:
                best = min(run(_backend.BACKENDS[name], n, k, args.events, 7, obs)[0] for _ in range(args.repeat))
                rates[name] = args.events / best
                finals[name] = run(_backend.BACKENDS[name], n, k, 1000, 7, obs)[1]
            if len(names) == 2:
                assert np.array_equal(finals["compiled"], finals["python"]), "backends diverged"
            speed = f"{rates['compiled'] / rates['python']:7.1f}x" if "compiled" in rates else "      -"
            print(f"{n:>5} {k:>3} {str(obs):>10} " + " ".join(f"{rates[b]:16.3g}" for b in names) + f"  {speed}")


if __name__ == "__main__":
    main()
