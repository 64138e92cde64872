"""Times the numba kernels against their pure-numpy twins.

Usage: python benchmarks/bench_kernels.py [--tokens N] [--docs N] [--repeat N]

The first numba call includes JIT compilation; it is timed separately so the
steady-state numbers are comparable.  Run with HALLUSCORE_NO_NUMBA=1 to
confirm the fallback path is selected (the numba column then disappears).
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from halluscore import _kernels


def make_inputs(rng: np.random.Generator, n_tokens: int):
    h = rng.exponential(1.0, size=n_tokens)
    keyword = rng.random(n_tokens) < 0.6
    att = rng.uniform(0.0, 1.0, size=n_tokens * (n_tokens - 1) // 2)
    n_entities = max(1, n_tokens // 6)
    starts = np.sort(rng.integers(0, n_tokens, size=n_entities))
    ends = np.minimum(starts + rng.integers(0, 5, size=n_entities), n_tokens - 1)
    return h, keyword, att, starts, ends


def time_path(fn_focus, fn_means, inputs, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        for h, keyword, att, starts, ends in inputs:
            y = fn_focus(h, keyword, att, 0.9)
            fn_means(y, starts, ends)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--tokens", type=int, default=600, help="tokens per document")
    parser.add_argument("--docs", type=int, default=50, help="documents per pass")
    parser.add_argument("--repeat", type=int, default=5, help="passes; best is kept")
    args = parser.parse_args()

    rng = np.random.default_rng(12)
    inputs = [make_inputs(rng, args.tokens) for _ in range(args.docs)]
    print(
        f"{args.docs} documents x {args.tokens} tokens, "
        f"attention entries per doc: {args.tokens * (args.tokens - 1) // 2}"
    )

    numpy_s = time_path(
        _kernels.focus_propagate_numpy, _kernels.segment_means_numpy, inputs, args.repeat
    )
    print(f"numpy : {numpy_s * 1e3:9.2f} ms/pass")

    if _kernels.NUMBA_AVAILABLE and not _kernels.numba_disabled_by_env():
        t0 = time.perf_counter()
        h, keyword, att, starts, ends = inputs[0]
        _kernels.focus_propagate_numba(h, keyword, att, 0.9)
        _kernels.segment_means_numba(h, starts, ends)
        warmup = time.perf_counter() - t0
        numba_s = time_path(
            _kernels.focus_propagate_numba,
            _kernels.segment_means_numba,
            inputs,
            args.repeat,
        )
        print(f"numba : {numba_s * 1e3:9.2f} ms/pass (first-call compile {warmup:.2f}s)")
        print(f"speedup: {numpy_s / numba_s:.1f}x")
    else:
        print("numba : unavailable or disabled (HALLUSCORE_NO_NUMBA)")


if __name__ == "__main__":
    main()
