# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled Crank-Nicolson stepping kernel.

Same contract as :mod:`resonlab._kernels_py` (that module's docstring is the
spec): batched tridiagonal CN steps with a time-dependent diagonal entry at
the well node and an optional per-step point source.  Fields are stored one
mode per column, so every inner loop runs over a contiguous row of modes and
vectorises; the Thomas factorisation is shared by all modes.  The stepping
releases the GIL, so separate mode batches can run from several threads.
"""

import numpy as np

from libc.stdlib cimport free, malloc


def cn_run(double complex[::1] dl, double complex[::1] d0, double complex[::1] du,
           Py_ssize_t jc, double complex[::1] dc_mid, double kappa,
           double complex[:, ::1] U, src=None, Py_ssize_t src_row=-1):
    """Advance U (nodes x modes) in place; returns the max norm-growth ratio."""
    cdef Py_ssize_t n = d0.shape[0]
    cdef Py_ssize_t m = U.shape[1]
    cdef Py_ssize_t nsteps = dc_mid.shape[0]
    if U.shape[0] != n:
        raise ValueError("U row count must match the operator size")

    cdef double complex[:, ::1] src_mv
    cdef bint have_src = src is not None
    if have_src:
        src_mv = src
        if src_mv.shape[0] != nsteps or src_mv.shape[1] != m:
            raise ValueError("src must have shape (nsteps, modes)")
    else:
        src_mv = np.zeros((1, 1), dtype=complex)

    cdef double complex ik = 1j * kappa
    cdef double complex *cp = <double complex *> malloc(n * sizeof(double complex))
    cdef double complex *iw = <double complex *> malloc(n * sizeof(double complex))
    cdef double complex *y = <double complex *> malloc(n * m * sizeof(double complex))
    cdef double *before = <double *> malloc(m * sizeof(double))
    cdef double *after = <double *> malloc(m * sizeof(double))
    if cp == NULL or iw == NULL or y == NULL or before == NULL or after == NULL:
        free(cp); free(iw); free(y); free(before); free(after)
        raise MemoryError()

    cdef double growth_max = 0.0
    cdef double ratio
    cdef Py_ssize_t s, r, j
    cdef double complex w, dcs, uj, bd, lo, up

    try:
        with nogil:
            for s in range(nsteps):
                dcs = dc_mid[s]
                # shared Thomas factorisation of (I + i kappa H)
                w = 1.0 + ik * d0[0] + (ik * dcs if jc == 0 else 0.0)
                iw[0] = 1.0 / w
                cp[0] = (ik * du[0]) * iw[0]
                for j in range(1, n):
                    w = 1.0 + ik * d0[j]
                    if j == jc:
                        w = w + ik * dcs
                    w = w - (ik * dl[j - 1]) * cp[j - 1]
                    iw[j] = 1.0 / w
                    if j < n - 1:
                        cp[j] = (ik * du[j]) * iw[j]

                for r in range(m):
                    before[r] = 0.0
                    after[r] = 0.0

                # y = (I - i kappa H) u  (+ source), vectorised over modes
                for j in range(n):
                    bd = 1.0 - ik * d0[j]
                    if j == jc:
                        bd = bd - ik * dcs
                    for r in range(m):
                        uj = U[j, r]
                        before[r] += uj.real * uj.real + uj.imag * uj.imag
                        y[j * m + r] = bd * uj
                    if j > 0:
                        lo = ik * dl[j - 1]
                        for r in range(m):
                            y[j * m + r] = y[j * m + r] - lo * U[j - 1, r]
                    if j < n - 1:
                        up = ik * du[j]
                        for r in range(m):
                            y[j * m + r] = y[j * m + r] - up * U[j + 1, r]
                if have_src:
                    for r in range(m):
                        y[src_row * m + r] = y[src_row * m + r] + src_mv[s, r]

                # forward substitution
                for r in range(m):
                    y[r] = y[r] * iw[0]
                for j in range(1, n):
                    lo = ik * dl[j - 1]
                    w = iw[j]
                    for r in range(m):
                        y[j * m + r] = (y[j * m + r] - lo * y[(j - 1) * m + r]) * w
                # back substitution
                for r in range(m):
                    U[n - 1, r] = y[(n - 1) * m + r]
                for j in range(n - 2, -1, -1):
                    w = cp[j]
                    for r in range(m):
                        U[j, r] = y[j * m + r] - w * U[j + 1, r]

                for j in range(n):
                    for r in range(m):
                        uj = U[j, r]
                        after[r] += uj.real * uj.real + uj.imag * uj.imag
                for r in range(m):
                    if before[r] > 0.0:
                        ratio = (after[r] / before[r]) ** 0.5
                        if ratio > growth_max:
                            growth_max = ratio
    finally:
        free(cp)
        free(iw)
        free(y)
        free(before)
        free(after)
    return growth_max
