# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; semantics mirror ``dpsir._pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, INFINITY

cnp.import_array()


def bin_counts(t, Py_ssize_t m):
    cdef const double[::1] tv = np.ascontiguousarray(t, dtype=np.float64)
    out = np.zeros(m, dtype=np.int64)
    cdef cnp.int64_t[::1] c = out
    cdef Py_ssize_t i, j
    cdef double half = m / 2.0
    for i in range(tv.shape[0]):
        j = <Py_ssize_t>floor((tv[i] + 1.0) * half)
        if j < 0:
            j = 0
        elif j > m - 1:
            j = m - 1
        c[j] += 1
    return out


def slice_sums(X, labels, Py_ssize_t H):
    cdef const double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef const cnp.int64_t[::1] lab = np.ascontiguousarray(labels, dtype=np.int64)
    sums = np.zeros((H, x.shape[1]))
    counts = np.zeros(H, dtype=np.int64)
    cdef double[:, ::1] s = sums
    cdef cnp.int64_t[::1] c = counts
    cdef Py_ssize_t i, j, h, p = x.shape[1]
    for i in range(x.shape[0]):
        h = lab[i]
        c[h] += 1
        for j in range(p):
            s[h, j] += x[i, j]
    return sums, counts


def fold_terms(X, labels, B, double R, Py_ssize_t H):
    cdef const double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef const cnp.int64_t[::1] lab = np.ascontiguousarray(labels, dtype=np.int64)
    cdef const double[:, ::1] b = np.ascontiguousarray(B, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], p = x.shape[1], k = b.shape[1]
    cdef Py_ssize_t i, j, a, c, h
    xsum_a = np.zeros((H, p))
    zsum_a = np.zeros((H, k))
    counts_a = np.zeros(H, dtype=np.int64)
    cross_a = np.zeros((p, k))
    gram_a = np.zeros((k, k))
    z_a = np.empty(k)
    cdef double[:, ::1] xsum = xsum_a
    cdef double[:, ::1] zsum = zsum_a
    cdef cnp.int64_t[::1] counts = counts_a
    cdef double[:, ::1] cross = cross_a
    cdef double[:, ::1] gram = gram_a
    cdef double[::1] z = z_a
    cdef double acc, xv
    for i in range(n):
        for a in range(k):
            acc = 0.0
            for j in range(p):
                acc += x[i, j] * b[j, a]
            if acc > R:
                acc = R
            elif acc < -R:
                acc = -R
            z[a] = acc
        h = lab[i]
        counts[h] += 1
        for j in range(p):
            xv = x[i, j]
            xsum[h, j] += xv
            for a in range(k):
                cross[j, a] += xv * z[a]
        for a in range(k):
            zsum[h, a] += z[a]
            for c in range(k):
                gram[a, c] += z[a] * z[c]
    kern_a = np.zeros((p, k))
    cdef double[:, ::1] kern = kern_a
    cdef double inv
    for h in range(H):
        if counts[h] == 0:
            continue
        inv = 1.0 / counts[h]
        for j in range(p):
            xv = xsum[h, j] * inv
            for a in range(k):
                kern[j, a] += xv * zsum[h, a]
    inv = 1.0 / n
    return kern_a * inv, cross_a * inv, gram_a * inv


def peel_select(scores, noise):
    cdef const double[::1] sc = np.ascontiguousarray(scores, dtype=np.float64)
    cdef const double[:, ::1] w = np.ascontiguousarray(noise, dtype=np.float64)
    cdef Py_ssize_t s = w.shape[0], d = w.shape[1]
    cdef Py_ssize_t i, j, best
    cdef double v, top
    taken_a = np.zeros(d, dtype=np.uint8)
    out = np.empty(s, dtype=np.int64)
    cdef unsigned char[::1] taken = taken_a
    cdef cnp.int64_t[::1] o = out
    for i in range(s):
        best = -1
        top = -INFINITY
        for j in range(d):
            if taken[j]:
                continue
            v = sc[j] + w[i, j]
            if best < 0 or v > top:
                best = j
                top = v
        o[i] = best
        taken[best] = 1
    return out
