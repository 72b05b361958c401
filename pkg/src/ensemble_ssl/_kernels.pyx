# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled masked mean-pool kernels.

Loop order matches ``_kernels_py`` exactly so both backends are bit-identical.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def pool_forward(const double[:, ::1] emb, const cnp.int64_t[:, ::1] ids):
    """Mean of non-PAD embedding rows per sequence.

    Returns ``(pooled, inv_counts)``; an all-PAD row pools to zeros and gets
    ``inv_count = 0``.
    """
    cdef Py_ssize_t n = ids.shape[0], length = ids.shape[1], dim = emb.shape[1]
    cdef Py_ssize_t b, l, d
    cdef cnp.int64_t tok
    cdef double inv
    pooled_arr = np.zeros((n, dim), dtype=np.float64)
    inv_arr = np.zeros(n, dtype=np.float64)
    cdef double[:, ::1] pooled = pooled_arr
    cdef double[::1] inv_counts = inv_arr
    cdef Py_ssize_t count
    for b in range(n):
        count = 0
        for l in range(length):
            tok = ids[b, l]
            if tok == 0:
                continue
            count += 1
            for d in range(dim):
                pooled[b, d] += emb[tok, d]
        if count > 0:
            inv = 1.0 / <double>count
            inv_counts[b] = inv
            for d in range(dim):
                pooled[b, d] *= inv
    return pooled_arr, inv_arr


def pool_backward(const double[:, ::1] d_pooled, const cnp.int64_t[:, ::1] ids,
                  const double[::1] inv_counts, double[:, ::1] grad_emb):
    """Scatter-add ``d_pooled[b] * inv_counts[b]`` into each non-PAD row."""
    cdef Py_ssize_t n = ids.shape[0], length = ids.shape[1], dim = d_pooled.shape[1]
    cdef Py_ssize_t b, l, d
    cdef cnp.int64_t tok
    cdef double inv
    for b in range(n):
        inv = inv_counts[b]
        for l in range(length):
            tok = ids[b, l]
            if tok == 0:
                continue
            for d in range(dim):
                grad_emb[tok, d] += d_pooled[b, d] * inv
