"""Compare the numba and numpy backends of the packed ternary kernels.

Usage::

    python3 benchmarks/bench_backends.py --n 2048 --repeats 5

Both backends are timed on the same Gram matrix and their outputs are checked
for exact agreement before any timing is reported.
"""
from __future__ import annotations

import argparse
import json
import time

import numpy as np

from kernel_rmt._accel import HAVE_NUMBA
from kernel_rmt._kernels import pack_codes, partial_sums


def _median_time(fn, repeats: int) -> float:
    fn()  # warm-up, includes numba compilation
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def run(n: int, p: int, repeats: int, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((p, n))
    G = X.T @ X / np.sqrt(p)
    lo, hi = 0.0, np.sqrt(2.0)
    v = rng.standard_normal(n)
    backends = ["numpy"] + (["numba"] if HAVE_NUMBA else [])
    codes = {b: pack_codes(G, lo, hi, backend=b) for b in backends}
    sums = {b: partial_sums(codes[b], n, v, backend=b) for b in backends}
    if HAVE_NUMBA:
        assert np.array_equal(codes["numpy"], codes["numba"]), "packed codes differ between backends"
        for a, b in zip(sums["numpy"], sums["numba"]):
            assert np.allclose(a, b, rtol=1e-12, atol=1e-12), "partial sums differ between backends"
    out: dict = {"n": n, "p": p, "repeats": repeats, "backends": {}}
    for b in backends:
        out["backends"][b] = {
            "pack": _median_time(lambda: pack_codes(G, lo, hi, backend=b), repeats),
            "matvec": _median_time(lambda: partial_sums(codes[b], n, v, backend=b), repeats),
        }
    dense = G.copy()
    out["dense_matvec"] = _median_time(lambda: dense @ v, repeats)
    return out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2048)
    ap.add_argument("--p", type=int, default=2048)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print(json.dumps(run(args.n, args.p, args.repeats, args.seed), indent=2))


if __name__ == "__main__":
    main()
