# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops.

Two kernels dominate the run time of the pipeline: evaluating the scaled
exponential integral e^u E1(u) on the annulus where the Faddeev kernel is
windowed, and the batched tridiagonal solves that precondition the polar
forward problem.  The pure-numpy versions live in ``_pykernels``.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, INFINITY

cdef extern from "complex.h" nogil:
    double complex cexp(double complex)
    double complex clog(double complex)
    double cabs(double complex)

cnp.import_array()

cdef double EULER = 0.57721566490153286061


cdef inline double complex _series_e1(double complex z) noexcept nogil:
    # E1(z) = -gamma - log z - sum_{k>=1} (-z)^k / (k k!)
    cdef double complex term = 1.0
    cdef double complex s = 0.0
    cdef int k
    for k in range(1, 400):
        term = -term * z / k
        s = s + term / k
        if cabs(term / k) <= 1e-17 * cabs(s):
            break
    return -EULER - clog(z) - s


cdef inline double complex _cf_scaled_e1(double complex z) noexcept nogil:
    # e^z E1(z) = 1/(z+1- 1/(z+3- 4/(z+5- ...))), modified Lentz
    cdef double tiny = 1e-300
    cdef double complex f, C, D, delta, b, a
    cdef int n
    b = z + 1.0
    f = b
    if cabs(f) < tiny:
        f = tiny
    C = f
    D = 0.0
    for n in range(1, 5000):
        a = -(<double> n) * n
        b = z + (2.0 * n + 1.0)
        D = b + a * D
        if cabs(D) < tiny:
            D = tiny
        C = b + a / C
        if cabs(C) < tiny:
            C = tiny
        D = 1.0 / D
        delta = C * D
        f = f * delta
        if cabs(delta - 1.0) < 1e-16:
            break
    return 1.0 / f


cdef inline double complex _scaled_e1(double complex z) noexcept nogil:
    cdef double a0 = cabs(z)
    cdef double x = z.real
    if a0 == 0.0:
        return INFINITY
    if a0 <= 5.0 or (x < -2.0 * fabs(z.imag) and a0 < 40.0):
        return cexp(z) * _series_e1(z)
    return _cf_scaled_e1(z)


def scaled_exp1(u):
    """Return e^u E1(u) elementwise for a complex array (principal branch)."""
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] flat = np.ascontiguousarray(
        np.asarray(u, dtype=np.complex128).ravel())
    cdef Py_ssize_t i, n = flat.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.empty(n, dtype=np.complex128)
    with nogil:
        for i in range(n):
            out[i] = _scaled_e1(flat[i])
    return out.reshape(np.shape(u))


def tridiag_solve(double[:, ::1] lower, double[:, ::1] inv_piv,
                  double[:, ::1] upper, rhs):
    """Solve factored tridiagonal systems, one per row of ``rhs``.

    ``inv_piv`` and the modified upper diagonal come from
    ``_pykernels.tridiag_factor``; rhs has shape (n_systems, n) and is
    complex.  Returns a new array.
    """
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] x = np.array(rhs, dtype=np.complex128,
                                                            order="C", copy=True)
    cdef Py_ssize_t m = x.shape[0], n = x.shape[1], j, i
    with nogil:
        for j in range(m):
            x[j, 0] = x[j, 0] * inv_piv[j, 0]
            for i in range(1, n):
                x[j, i] = (x[j, i] - lower[j, i] * x[j, i - 1]) * inv_piv[j, i]
            for i in range(n - 2, -1, -1):
                x[j, i] = x[j, i] - upper[j, i] * x[j, i + 1]
    return x
