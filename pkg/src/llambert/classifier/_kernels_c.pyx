# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: token hashing, SGD epochs, and score prediction
over CSR-encoded hashed bag-of-n-gram features."""

from libc.math cimport exp, log1p, sqrt

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef unsigned long long FNV_OFFSET = 0xCBF29CE484222325ULL
cdef unsigned long long FNV_PRIME = 0x100000001B3ULL


cdef inline unsigned long long _fnv1a64(const unsigned char* data, Py_ssize_t n) nogil:
    cdef unsigned long long h = FNV_OFFSET
    cdef Py_ssize_t i
    for i in range(n):
        h ^= data[i]
        h *= FNV_PRIME
    return h


cdef inline unsigned long long _fold(unsigned long long h, int d) nogil:
    cdef unsigned long long mask = (1ULL << d) - 1
    cdef unsigned long long out = 0
    while h:
        out ^= h & mask
        h >>= d
    return out


def hash_fold64(bytes data, int d):
    """FNV-1a 64-bit hash of a byte string, XOR-folded to d bits."""
    return _fold(_fnv1a64(data, len(data)), d)


def hash_tokens(list keys, int d):
    """Hash a list of byte-string feature keys to indices in [0, 2^d)."""
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(len(keys), dtype=np.int64)
    cdef Py_ssize_t i
    cdef bytes k
    for i in range(len(keys)):
        k = keys[i]
        out[i] = <long long>_fold(_fnv1a64(k, len(k)), d)
    return out


cdef inline double _dot_row(double[::1] w, long long[::1] indices, double[::1] values,
                            long long s, long long e) nogil:
    cdef double z = 0.0
    cdef long long j
    for j in range(s, e):
        z += w[indices[j]] * values[j]
    return z


cdef inline double _bce(double z, double y) nogil:
    # logaddexp(0, z) - y*z, computed stably
    if z > 0:
        return z + log1p(exp(-z)) - y * z
    return log1p(exp(z)) - y * z


cdef inline double _sigmoid(double z) nogil:
    cdef double e
    if z >= 0:
        e = exp(-z)
        return 1.0 / (1.0 + e)
    e = exp(z)
    return e / (1.0 + e)


def sgd_epoch(double[::1] w, long long[::1] indptr, long long[::1] indices,
              double[::1] values, double[::1] labels, long long[::1] order,
              double lr0, double l2, int batch_size, long long step0):
    """One epoch of mini-batch SGD over the rows listed in `order`.

    Learning rate for global step t (1-based) is lr0 / sqrt(t); t resumes
    from step0. L2 applies to the coordinates touched by the batch.
    Returns (sum of per-example log losses, steps taken).
    """
    cdef Py_ssize_t n = order.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] grad_arr = np.zeros(w.shape[0], dtype=np.float64)
    cdef double[::1] grad = grad_arr
    cdef cnp.ndarray[cnp.int64_t, ndim=1] touched_arr = np.empty(w.shape[0], dtype=np.int64)
    cdef long long[::1] touched = touched_arr
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] seen_arr = np.zeros(w.shape[0], dtype=np.uint8)
    cdef unsigned char[::1] seen = seen_arr

    cdef double loss_sum = 0.0
    cdef long long step = step0
    cdef Py_ssize_t start = 0, bend, bi
    cdef long long row, s, e, j, idx, n_touched, ti
    cdef double z, p, g, lr, bsz

    with nogil:
        while start < n:
            bend = start + batch_size
            if bend > n:
                bend = n
            bsz = <double>(bend - start)
            n_touched = 0
            for bi in range(start, bend):
                row = order[bi]
                s = indptr[row]
                e = indptr[row + 1]
                z = _dot_row(w, indices, values, s, e)
                loss_sum += _bce(z, labels[row])
                p = _sigmoid(z)
                g = (p - labels[row]) / bsz
                for j in range(s, e):
                    idx = indices[j]
                    grad[idx] += g * values[j]
                    if not seen[idx]:
                        seen[idx] = 1
                        touched[n_touched] = idx
                        n_touched += 1
            step += 1
            lr = lr0 / sqrt(<double>step)
            for ti in range(n_touched):
                idx = touched[ti]
                w[idx] -= lr * (grad[idx] + l2 * w[idx])
                grad[idx] = 0.0
                seen[idx] = 0
            start = bend
    return loss_sum, step - step0


def predict_scores(double[::1] w, long long[::1] indptr, long long[::1] indices,
                   double[::1] values):
    """Positive-class probability for each CSR row."""
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t i
    cdef double z
    for i in range(n):
        z = _dot_row(w, indices, values, indptr[i], indptr[i + 1])
        out[i] = _sigmoid(z)
    return out
