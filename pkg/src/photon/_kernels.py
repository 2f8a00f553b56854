"""Hot numeric kernels: JIT-compiled by default, pure numpy on request.

Set PHOTON_NO_NUMBA=1 to select the numpy fallback path (also used
automatically when numba is unavailable). ``benchmarks/bench_kernels.py``
compares the two paths.
"""

from __future__ import annotations

import os

import numpy as np


def _lcs_len_py(a: np.ndarray, b: np.ndarray) -> int:
    """Longest common contiguous substring length, vectorized DP rows."""
    if len(a) == 0 or len(b) == 0:
        return 0
    prev = np.zeros(len(b), dtype=np.int64)
    best = 0
    for i in range(len(a)):
        cur = np.zeros(len(b), dtype=np.int64)
        hits = b == a[i]
        cur[hits] = 1
        cur[1:][hits[1:]] += prev[:-1][hits[1:]]
        m = cur.max()
        if m > best:
            best = int(m)
        prev = cur
    return best


def _best_span_py(start_scores: np.ndarray, end_scores: np.ndarray) -> tuple[int, int]:
    """Argmax over i <= j of start[i] + end[j]; first max in row-major order
    gives the smallest-i-then-smallest-j tie rule."""
    n = len(start_scores)
    grid = start_scores[:, None] + end_scores[None, :]
    grid[np.tril_indices(n, k=-1)] = -np.inf
    flat = int(np.argmax(grid))
    return flat // n, flat % n


def _lcs_len_loop(a, b):  # pragma: no cover - compiled
    la, lb = len(a), len(b)
    if la == 0 or lb == 0:
        return 0
    prev = np.zeros(lb, dtype=np.int64)
    cur = np.zeros(lb, dtype=np.int64)
    best = 0
    for i in range(la):
        ai = a[i]
        for j in range(lb):
            if b[j] == ai:
                cur[j] = prev[j - 1] + 1 if j > 0 else 1
                if cur[j] > best:
                    best = cur[j]
            else:
                cur[j] = 0
        prev, cur = cur, prev
    return best


def _best_span_loop(start_scores, end_scores):  # pragma: no cover - compiled
    n = len(start_scores)
    best_i, best_j = 0, 0
    best = -np.inf
    for i in range(n):
        si = start_scores[i]
        for j in range(i, n):
            v = si + end_scores[j]
            if v > best:
                best = v
                best_i, best_j = i, j
    return best_i, best_j


_want_numba = os.environ.get("PHOTON_NO_NUMBA", "") in ("", "0")
USING_NUMBA = False
_lcs_len_jit = None
_best_span_jit = None

if _want_numba:
    try:
        from numba import njit

        _lcs_len_jit = njit(cache=True)(_lcs_len_loop)
        _best_span_jit = njit(cache=True)(_best_span_loop)
        USING_NUMBA = True
    except ImportError:
        USING_NUMBA = False


def lcs_len(a: np.ndarray, b: np.ndarray) -> int:
    """Length of the longest common contiguous subsequence of two codepoint
    arrays (int32)."""
    if USING_NUMBA:
        return int(_lcs_len_jit(a, b))
    return _lcs_len_py(a, b)


def best_span(start_scores: np.ndarray, end_scores: np.ndarray) -> tuple[int, int]:
    """Highest-scoring (i, j) with j >= i; ties broken by smaller i, then j."""
    if USING_NUMBA:
        i, j = _best_span_jit(np.ascontiguousarray(start_scores, dtype=np.float64),
                              np.ascontiguousarray(end_scores, dtype=np.float64))
        return int(i), int(j)
    return _best_span_py(np.asarray(start_scores, dtype=np.float64).copy(),
                         np.asarray(end_scores, dtype=np.float64))


def codepoints(text: str) -> np.ndarray:
    return np.frombuffer(text.encode("utf-32-le"), dtype=np.int32).astype(np.int32)
