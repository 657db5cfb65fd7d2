"""Pure-Python/numpy fallback for the compiled kernels.

Mirrors the compiled math batch for batch. Floating-point accumulation order
inside a batch differs slightly (numpy reductions), so the two backends agree
to within rounding noise rather than bit-for-bit; each backend on its own is
fully deterministic.
"""

from __future__ import annotations

import numpy as np

from ..rng import fnv1a64, fold_bits


def hash_fold64(data: bytes, d: int) -> int:
    return fold_bits(fnv1a64(data), d)


def hash_tokens(keys: list, d: int) -> np.ndarray:
    return np.array([fold_bits(fnv1a64(k), d) for k in keys], dtype=np.int64)


def _row_scores(w, indptr, indices, values):
    n = len(indptr) - 1
    z = np.empty(n, dtype=np.float64)
    wg = w[indices] * values
    for i in range(n):
        z[i] = wg[indptr[i]:indptr[i + 1]].sum()
    return z


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def sgd_epoch(w, indptr, indices, values, labels, order, lr0, l2, batch_size, step0):
    n = len(order)
    loss_sum = 0.0
    step = step0
    start = 0
    while start < n:
        rows = order[start:start + batch_size]
        bsz = float(len(rows))
        segs_idx = [indices[indptr[r]:indptr[r + 1]] for r in rows]
        segs_val = [values[indptr[r]:indptr[r + 1]] for r in rows]
        z = np.array([w[si] @ sv for si, sv in zip(segs_idx, segs_val)])
        y = labels[rows]
        loss_sum += float(np.sum(np.logaddexp(0.0, z) - y * z))
        g = (_sigmoid(z) - y) / bsz
        cat_idx = np.concatenate(segs_idx)
        cat_val = np.concatenate([sv * gi for sv, gi in zip(segs_val, g)])
        touched = np.unique(cat_idx)
        grad = np.bincount(cat_idx, weights=cat_val, minlength=len(w))
        step += 1
        lr = lr0 / np.sqrt(float(step))
        w[touched] -= lr * (grad[touched] + l2 * w[touched])
        start += batch_size
    return loss_sum, step - step0


def predict_scores(w, indptr, indices, values):
    return _sigmoid(_row_scores(w, indptr, indices, values))
