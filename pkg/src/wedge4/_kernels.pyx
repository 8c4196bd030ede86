# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; same operation order as ``_kernels_py``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef enum:
    BLOCK = 4096


cdef double _tree(double* b, Py_ssize_t m) nogil:
    # level-by-level pairwise reduction in place, zero padding odd levels
    cdef Py_ssize_t i
    while m > 1:
        if m % 2:
            b[m] = 0.0
            m += 1
        for i in range(m // 2):
            b[i] = b[2 * i] + b[2 * i + 1]
        m //= 2
    return b[0]


def pairwise_sum(x):
    # Zero padding at odd levels gives the same tree as padding the input to
    # a power of two, so aligned blocks of BLOCK values are reduced in cache
    # and the block sums reduced afterwards.
    cdef cnp.ndarray[cnp.float64_t, ndim=1] src = np.ascontiguousarray(x, dtype=np.float64).ravel()
    cdef Py_ssize_t n = src.shape[0]
    if n == 0:
        return 0.0
    cdef const double[::1] s = src
    cdef Py_ssize_t nblocks = (n + BLOCK - 1) // BLOCK
    cdef Py_ssize_t blk, i, start, m, half
    cdef double local[BLOCK + 1]
    if nblocks == 1:
        for i in range(n):
            local[i] = s[i]
        return _tree(local, n)
    sums = np.empty(nblocks + 1, dtype=np.float64)
    cdef double[::1] bs = sums
    with nogil:
        for blk in range(nblocks):
            start = blk * BLOCK
            m = min(BLOCK, n - start)
            # first level straight from the input
            half = m // 2
            for i in range(half):
                local[i] = s[start + 2 * i] + s[start + 2 * i + 1]
            if m % 2:
                local[half] = s[start + m - 1] + 0.0
                half += 1
            # a short last block is padded with zeros up to BLOCK / 2 nodes
            for i in range(half, BLOCK // 2):
                local[i] = 0.0
            bs[blk] = _tree(local, BLOCK // 2)
    return _tree(&bs[0], nblocks)


def pairing_field(a, b):
    cdef const double[:, ::1] A = np.ascontiguousarray(a, dtype=np.float64).reshape(6, -1)
    cdef const double[:, ::1] B = np.ascontiguousarray(b, dtype=np.float64).reshape(6, -1)
    cdef Py_ssize_t n = A.shape[1], i
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double acc
    for i in range(n):
        acc = A[0, i] * B[5, i]
        acc = acc + A[5, i] * B[0, i]
        acc = acc - A[1, i] * B[4, i]
        acc = acc - A[4, i] * B[1, i]
        acc = acc + A[2, i] * B[3, i]
        acc = acc + A[3, i] * B[2, i]
        o[i] = acc
    return out


def herm2_det(a, d, b, c):
    cdef const double[::1] A = np.ascontiguousarray(a, dtype=np.float64).ravel()
    cdef const double[::1] D = np.ascontiguousarray(d, dtype=np.float64).ravel()
    cdef const double[::1] Bv = np.ascontiguousarray(b, dtype=np.float64).ravel()
    cdef const double[::1] C = np.ascontiguousarray(c, dtype=np.float64).ravel()
    cdef Py_ssize_t n = A.shape[0], i
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double acc
    for i in range(n):
        acc = A[i] * D[i]
        acc = acc - Bv[i] * Bv[i]
        acc = acc - C[i] * C[i]
        o[i] = acc
    return out
