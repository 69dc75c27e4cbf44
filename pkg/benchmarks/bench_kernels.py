"""Throughput of the compiled and pure-Python bank kernels.

    python benchmarks/bench_kernels.py [--updates N] [--repeat R]

Feeds the same random prompt stream through ``insert_stream`` with each
available backend and checks that the resulting banks are bit-identical.
"""
import argparse
import time

import numpy as np

from visbank import kernels

SHAPES = [(40, 5, 32), (40, 5, 256), (10, 20, 64)]  # (categories, n, d)


def run(backend, C, n, d, cats, feats, fifo):
    slots = np.zeros((C, n, d), dtype=np.float32)
    occ = np.zeros(C, dtype=np.int64)
    cur = np.zeros(C, dtype=np.int64)
    start = time.perf_counter()
    backend.insert_stream(slots, occ, cur, cats, feats, fifo)
    return time.perf_counter() - start, slots


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--updates", type=int, default=20_000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    names = kernels.available_backends()
    if "compiled" not in names:
        print("compiled backend not built; reporting the python backend only")
    rng = np.random.default_rng(0)
    print(f"{'shape (C,n,d)':>16} {'policy':>9} " + " ".join(f"{n + ' upd/s':>16}" for n in names)
          + ("   speedup" if len(names) > 1 else ""))
    for C, n, d in SHAPES:
        cats = rng.integers(0, C, size=args.updates).astype(np.int64)
        feats = rng.standard_normal((args.updates, d)).astype(np.float32)
        for fifo in (False, True):
            rates, banks = {}, {}
            for name in names:
                backend = kernels.get(name)
                best = min(run(backend, C, n, d, cats, feats, fifo)[0] for _ in range(args.repeat))
                rates[name] = args.updates / best
                banks[name] = run(backend, C, n, d, cats, feats, fifo)[1]
            same = len({b.tobytes() for b in banks.values()}) == 1
            line = f"{str((C, n, d)):>16} {'fifo' if fifo else 'average':>9} "
            line += " ".join(f"{rates[k]:>16,.0f}" for k in names)
            if len(names) > 1:
                line += f"   {rates['compiled'] / rates['python']:6.1f}x"
            print(line + ("" if same else "   MISMATCH"))


if __name__ == "__main__":
    main()
