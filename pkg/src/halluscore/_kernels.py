"""Hot numeric kernels, JIT-compiled with numba when available.

Each kernel has a pure-numpy twin; ``HALLUSCORE_NO_NUMBA=1`` (or a missing
numba install) selects the numpy path.  The two paths may differ in the last
few ulps because summation order differs; within one path results are
bit-stable.  ``benchmarks/bench_kernels.py`` times both.

Attention is passed flattened: row i of the lower-triangular matrix occupies
``att_flat[i*(i-1)//2 : i*(i+1)//2]`` and holds i entries.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised via env flag instead
    njit = None
    NUMBA_AVAILABLE = False


def numba_disabled_by_env(environ=os.environ) -> bool:
    return environ.get("HALLUSCORE_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")


def focus_propagate_numpy(
    h: np.ndarray, keyword: np.ndarray, att_flat: np.ndarray, gamma: float
) -> np.ndarray:
    """Left-to-right propagation recurrence over final token scores.

    ``y[i] = h[i] + gamma * sum_j (att[i,j] / sum_k att[i,k]) * y[j]`` for
    keyword tokens, 0 otherwise; the propagated term is 0 when the row sums
    to 0 (and for the first token).  Non-keyword tokens keep their 0 in the
    weighted sum rather than being skipped.
    """
    n = h.shape[0]
    y = np.zeros(n, dtype=np.float64)
    off = 0
    for i in range(n):
        if keyword[i]:
            row = att_flat[off : off + i]
            p = 0.0
            s = row.sum()
            if s > 0.0:
                p = float(row @ y[:i]) / s
            y[i] = h[i] + gamma * p
        off += i
    return y


def segment_means_numpy(
    values: np.ndarray, starts: np.ndarray, ends: np.ndarray
) -> np.ndarray:
    """Mean of ``values[starts[k] : ends[k] + 1]`` for each inclusive range."""
    out = np.empty(starts.shape[0], dtype=np.float64)
    for k in range(starts.shape[0]):
        out[k] = values[starts[k] : ends[k] + 1].mean()
    return out


if NUMBA_AVAILABLE:

    @njit(cache=True)
    def focus_propagate_numba(h, keyword, att_flat, gamma):  # pragma: no cover
        n = h.shape[0]
        y = np.zeros(n, dtype=np.float64)
        off = 0
        for i in range(n):
            if keyword[i]:
                s = 0.0
                for j in range(i):
                    s += att_flat[off + j]
                p = 0.0
                if s > 0.0:
                    acc = 0.0
                    for j in range(i):
                        acc += att_flat[off + j] * y[j]
                    p = acc / s
                y[i] = h[i] + gamma * p
            off += i
        return y

    @njit(cache=True)
    def segment_means_numba(values, starts, ends):  # pragma: no cover
        out = np.empty(starts.shape[0], dtype=np.float64)
        for k in range(starts.shape[0]):
            acc = 0.0
            for i in range(starts[k], ends[k] + 1):
                acc += values[i]
            out[k] = acc / (ends[k] - starts[k] + 1)
        return out

else:
    focus_propagate_numba = None
    segment_means_numba = None


USING_NUMBA = NUMBA_AVAILABLE and not numba_disabled_by_env()

if USING_NUMBA:
    focus_propagate = focus_propagate_numba
    segment_means = segment_means_numba
else:
    focus_propagate = focus_propagate_numpy
    segment_means = segment_means_numpy


def flatten_attention(rows) -> np.ndarray:
    """Concatenate lower-triangular rows into the flat float64 layout."""
    n = len(rows)
    flat = np.empty(n * (n - 1) // 2, dtype=np.float64)
    off = 0
    for row in rows:
        flat[off : off + len(row)] = row
        off += len(row)
    return flat
