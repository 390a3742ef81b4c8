# cython: language_level=3
"""Compiled SkipGram negative-sampling kernel.

Mirrors ``_sgns_py.sgns_pairs`` step for step; see that module for the
update rule. Tables may be float32 or float64; dot products and gradient
scalars are accumulated in double precision.
"""
cimport cython
import numpy as np
from cython.parallel cimport parallel, prange
from libc.math cimport exp, isfinite
from libc.stdlib cimport malloc, free

ctypedef fused real:
    float
    double


cdef inline double _sigmoid(double x) noexcept nogil:
    return 1.0 / (1.0 + exp(-x))


cdef Py_ssize_t _run(real[:, ::1] syn0, real[:, ::1] syn1,
                     const int[::1] centers, const int[::1] contexts,
                     const int[:, ::1] negatives,
                     double lr_start, double lr_end,
                     Py_ssize_t lo, Py_ssize_t hi, Py_ssize_t total,
                     double* grad, int* targets, double* neu1e) noexcept nogil:
    cdef Py_ssize_t i, t, d, nt
    cdef Py_ssize_t dim = syn0.shape[1]
    cdef Py_ssize_t nneg = negatives.shape[1]
    cdef int c, o, tgt
    cdef double lr, f, g
    for i in range(lo, hi):
        c = centers[i]
        o = contexts[i]
        lr = lr_start + (lr_end - lr_start) * (<double>i / <double>total)
        targets[0] = o
        nt = 1
        for t in range(nneg):
            tgt = negatives[i, t]
            if tgt != o:
                targets[nt] = tgt
                nt += 1
        for t in range(nt):
            tgt = targets[t]
            f = 0.0
            for d in range(dim):
                f += <double>syn0[c, d] * <double>syn1[tgt, d]
            g = lr * ((1.0 if t == 0 else 0.0) - _sigmoid(f))
            if not isfinite(g):
                return i
            grad[t] = g
        for d in range(dim):
            neu1e[d] = 0.0
        for t in range(nt):
            tgt = targets[t]
            g = grad[t]
            for d in range(dim):
                neu1e[d] += g * <double>syn1[tgt, d]
        for t in range(nt):
            tgt = targets[t]
            g = grad[t]
            for d in range(dim):
                syn1[tgt, d] = <real>(<double>syn1[tgt, d] + g * <double>syn0[c, d])
        for d in range(dim):
            syn0[c, d] = <real>(<double>syn0[c, d] + neu1e[d])
            if not isfinite(<double>syn0[c, d]):
                return i
    return -1


def sgns_pairs(real[:, ::1] syn0, real[:, ::1] syn1,
               const int[::1] centers, const int[::1] contexts,
               const int[:, ::1] negatives,
               double lr_start, double lr_end, int workers=1):
    """Apply one SGD step per (center, context) pair, in order.

    Returns ``-1`` on success or the index of the first pair whose update
    was non-finite.
    """
    cdef Py_ssize_t total = centers.shape[0]
    cdef Py_ssize_t dim = syn0.shape[1]
    cdef Py_ssize_t nneg = negatives.shape[1]
    cdef Py_ssize_t bad = -1, shard, lo, hi, nshards
    cdef double* grad
    cdef int* targets
    cdef double* neu1e
    if total == 0:
        return -1
    if workers <= 1:
        grad = <double*> malloc((nneg + 1) * sizeof(double))
        targets = <int*> malloc((nneg + 1) * sizeof(int))
        neu1e = <double*> malloc(dim * sizeof(double))
        try:
            with nogil:
                bad = _run(syn0, syn1, centers, contexts, negatives,
                           lr_start, lr_end, 0, total, total, grad, targets, neu1e)
        finally:
            free(grad)
            free(targets)
            free(neu1e)
        return bad

    # Hogwild: each thread owns a contiguous shard, updates are unsynchronized.
    nshards = workers
    status = np.full(nshards, -1, dtype=np.intp)
    cdef Py_ssize_t[::1] status_view = status
    with nogil, parallel(num_threads=workers):
        grad = <double*> malloc((nneg + 1) * sizeof(double))
        targets = <int*> malloc((nneg + 1) * sizeof(int))
        neu1e = <double*> malloc(dim * sizeof(double))
        for shard in prange(nshards, schedule="static"):
            lo = shard * total // nshards
            hi = (shard + 1) * total // nshards
            status_view[shard] = _run(syn0, syn1, centers, contexts, negatives,
                                      lr_start, lr_end, lo, hi, total, grad, targets, neu1e)
        free(grad)
        free(targets)
        free(neu1e)
    failed = status[status >= 0]
    return int(failed[0]) if len(failed) else -1
