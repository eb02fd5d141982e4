# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: nearest-codeword search, cluster accumulation and
MSB-first bit packing. Same contracts as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

DEF BLOCK_ROWS = 256


def nearest(double[:, ::1] x, double[:, ::1] codebook, double[::1] cb_sqnorm):
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], c = codebook.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] idx_arr = np.empty(n, dtype=np.int64)
    cdef cnp.ndarray[double, ndim=1] dist_arr = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[::1] idx = idx_arr
    cdef double[::1] dist = dist_arr
    cdef double[:, ::1] gram = np.empty((BLOCK_ROWS, c), dtype=np.float64)
    cdef Py_ssize_t start, rows, i, j, k, best
    cdef double xn, v, bestv, one = 1.0, zero = 0.0
    cdef int m_, n_, k_, lda, ldb, ldc
    cdef char transa = b'T', transb = b'N'
    if n == 0 or c == 0:
        return idx_arr, dist_arr
    with nogil:
        start = 0
        while start < n:
            rows = BLOCK_ROWS if n - start > BLOCK_ROWS else n - start
            # column-major view: gram^T (c x rows) = codebook (c x d) . x_blk^T
            m_ = <int>c
            n_ = <int>rows
            k_ = <int>d
            lda = <int>d
            ldb = <int>d
            ldc = <int>c
            dgemm(&transa, &transb, &m_, &n_, &k_, &one, &codebook[0, 0], &lda,
                  &x[start, 0], &ldb, &zero, &gram[0, 0], &ldc)
            for i in range(rows):
                xn = 0.0
                for k in range(d):
                    xn = xn + x[start + i, k] * x[start + i, k]
                best = 0
                bestv = (xn - 2.0 * gram[i, 0]) + cb_sqnorm[0]
                if bestv < 0.0:
                    bestv = 0.0
                for j in range(1, c):
                    v = (xn - 2.0 * gram[i, j]) + cb_sqnorm[j]
                    if v < 0.0:
                        v = 0.0
                    if v < bestv:
                        bestv = v
                        best = j
                idx[start + i] = best
                dist[start + i] = bestv
            start = start + rows
    return idx_arr, dist_arr


def accumulate(double[:, ::1] x, cnp.int64_t[::1] labels, Py_ssize_t n_clusters):
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], i, k, lab
    sums_arr = np.zeros((n_clusters, d), dtype=np.float64)
    counts_arr = np.zeros(n_clusters, dtype=np.int64)
    cdef double[:, ::1] sums = sums_arr
    cdef cnp.int64_t[::1] counts = counts_arr
    for i in range(n):
        lab = labels[i]
        if lab < 0 or lab >= n_clusters:
            raise IndexError(f"label {lab} out of range")
    with nogil:
        for i in range(n):
            lab = labels[i]
            counts[lab] += 1
            for k in range(d):
                sums[lab, k] = sums[lab, k] + x[i, k]
    return sums_arr, counts_arr


def pack_fields(values, widths):
    cdef cnp.uint64_t[:, ::1] vals = np.ascontiguousarray(values, dtype=np.uint64)
    cdef cnp.int64_t[::1] w = np.ascontiguousarray(widths, dtype=np.int64)
    cdef Py_ssize_t n = vals.shape[0], k = vals.shape[1], i, j
    cdef Py_ssize_t total = 0
    for j in range(k):
        if not 0 <= w[j] <= 56:
            raise ValueError("field widths must lie in [0, 56]")
        total += w[j]
    cdef Py_ssize_t nbytes = (n * total + 7) // 8
    out_arr = np.zeros(nbytes, dtype=np.uint8)
    cdef cnp.uint8_t[::1] out = out_arr
    cdef Py_ssize_t pos = 0
    cdef cnp.uint64_t acc = 0, mask
    cdef int nacc = 0
    with nogil:
        for i in range(n):
            for j in range(k):
                mask = (<cnp.uint64_t>1 << w[j]) - 1
                acc = (acc << w[j]) | (vals[i, j] & mask)
                nacc += w[j]
                while nacc >= 8:
                    nacc -= 8
                    out[pos] = <cnp.uint8_t>(acc >> nacc)
                    pos += 1
                acc &= (<cnp.uint64_t>1 << nacc) - 1
        if nacc:
            out[pos] = <cnp.uint8_t>(acc << (8 - nacc))
    return out_arr.tobytes()


def unpack_fields(data, Py_ssize_t n_rows, widths):
    cdef const cnp.uint8_t[::1] buf = np.frombuffer(data, dtype=np.uint8)
    cdef cnp.int64_t[::1] w = np.ascontiguousarray(widths, dtype=np.int64)
    cdef Py_ssize_t k = w.shape[0], i, j, pos = 0, total = 0
    for j in range(k):
        if not 0 <= w[j] <= 56:
            raise ValueError("field widths must lie in [0, 56]")
        total += w[j]
    if buf.shape[0] * 8 < n_rows * total:
        raise ValueError("buffer too short for requested fields")
    out_arr = np.zeros((n_rows, k), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] out = out_arr
    cdef cnp.uint64_t acc = 0
    cdef int nacc = 0
    with nogil:
        for i in range(n_rows):
            for j in range(k):
                while nacc < w[j]:
                    acc = (acc << 8) | buf[pos]
                    pos += 1
                    nacc += 8
                nacc -= w[j]
                out[i, j] = <cnp.int64_t>((acc >> nacc) & ((<cnp.uint64_t>1 << w[j]) - 1))
                acc &= (<cnp.uint64_t>1 << nacc) - 1
    return out_arr
