# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops.

Every function here has a numpy twin with the same signature in
``bipcomm._pykernels``; ``bipcomm._backend`` picks one at import time.
Graphs arrive as raw CSR arrays (int64 ``indptr``/``indices``, float64
weights) so these functions never touch Python objects in the loops.
"""
import numpy as np

from libc.stdint cimport int64_t, int8_t


def csr_matmat(const int64_t[::1] indptr, const int64_t[::1] indices,
               const double[::1] data, const double[:, ::1] X):
    """Return ``A @ X`` for the CSR matrix ``(data, indices, indptr)``."""
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t b = X.shape[1]
    cdef Py_ssize_t u, p, c
    cdef int64_t v
    cdef double w
    out = np.zeros((n, b), dtype=np.float64)
    cdef double[:, ::1] Y = out
    with nogil:
        for u in range(n):
            for p in range(indptr[u], indptr[u + 1]):
                v = indices[p]
                w = data[p]
                for c in range(b):
                    Y[u, c] += w * X[v, c]
    return out


def sweep_links(const int64_t[::1] indptr, const int64_t[::1] indices,
                const double[::1] weights, const int64_t[::1] order,
                const int8_t[::1] side):
    """Weight from ``order[i]`` to earlier vertices of ``order``.

    Returns ``(same, opp)``: for position ``i`` the total weight of edges to
    vertices at positions ``< i`` carrying the same / the opposite side label.
    """
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t m = order.shape[0]
    cdef Py_ssize_t i, p
    cdef int64_t u, q
    cdef double s_acc, o_acc
    pos_arr = np.full(n, -1, dtype=np.int64)
    same_arr = np.zeros(m, dtype=np.float64)
    opp_arr = np.zeros(m, dtype=np.float64)
    cdef int64_t[::1] pos = pos_arr
    cdef double[::1] same = same_arr
    cdef double[::1] opp = opp_arr
    with nogil:
        for i in range(m):
            pos[order[i]] = i
        for i in range(m):
            u = order[i]
            s_acc = 0.0
            o_acc = 0.0
            for p in range(indptr[u], indptr[u + 1]):
                q = pos[indices[p]]
                if q >= 0 and q < i:
                    if side[q] == side[i]:
                        s_acc += weights[p]
                    else:
                        o_acc += weights[p]
            same[i] = s_acc
            opp[i] = o_acc
    return same_arr, opp_arr


def pair_weights(const int64_t[::1] indptr, const int64_t[::1] indices,
                 const double[::1] weights, const int64_t[::1] members,
                 const int8_t[::1] label):
    """Stub accounting for a labelled pair.

    ``label[v]`` is 0 outside the pair, 1 in S, 2 in S'.  Returns
    ``(volume, cross, internal, boundary)`` where ``cross`` and ``internal``
    count each edge once and ``boundary`` is the weight of stubs leaving
    the pair.
    """
    cdef Py_ssize_t m = members.shape[0]
    cdef Py_ssize_t i, p
    cdef int64_t u
    cdef int8_t lu, lv
    cdef double vol = 0.0, cross2 = 0.0, inside2 = 0.0, boundary = 0.0
    cdef double w
    with nogil:
        for i in range(m):
            u = members[i]
            lu = label[u]
            for p in range(indptr[u], indptr[u + 1]):
                w = weights[p]
                vol += w
                lv = label[indices[p]]
                if lv == 0:
                    boundary += w
                elif lv == lu:
                    inside2 += w
                else:
                    cross2 += w
    return vol, 0.5 * cross2, 0.5 * inside2, boundary


def fwht(double[::1] a):
    """In-place unnormalised Walsh-Hadamard transform (natural order)."""
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t h = 1, i, j
    cdef double x, y
    if n & (n - 1):
        raise ValueError("length must be a power of two")
    with nogil:
        while h < n:
            i = 0
            while i < n:
                for j in range(i, i + h):
                    x = a[j]
                    y = a[j + h]
                    a[j] = x + y
                    a[j + h] = x - y
                i += 2 * h
            h *= 2
