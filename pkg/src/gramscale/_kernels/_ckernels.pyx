# cython: language_level=3
"""Compiled inner loops for the zero-order-hold recurrence.

Both kernels iterate ``x[k+1] = Ad x[k] + bu`` from ``x[0] = 0`` (a step
input held constant from t=0). They mirror ``_pykernels`` exactly.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, isfinite
from libc.stdlib cimport malloc, free
from libc.string cimport memset

cnp.import_array()


def lti_scan(const double[:, ::1] Ad, const double[::1] bu, const double[:, ::1] C, const double[::1] du,
             const double[::1] r, long nsteps, double threshold):
    """Trapezoid-weighted squared tracking error over samples 0..nsteps.

    Returns ``(sumsq, peak, exceeded_at)``; ``sumsq`` still needs the dt factor.
    ``exceeded_at`` is the first sample where some ``|y|`` passed ``threshold``
    or went non-finite, else -1 (in which case ``sumsq`` is valid).
    """
    cdef Py_ssize_t n = Ad.shape[0]
    cdef Py_ssize_t p = C.shape[0]
    cdef Py_ssize_t i, j, o
    cdef long k
    cdef double acc, y, e, w, peak = 0.0, sumsq = 0.0, sample, speak
    cdef double *x = <double *> malloc((n + 1) * sizeof(double))
    cdef double *xn = <double *> malloc((n + 1) * sizeof(double))
    cdef double *tmp
    if x == NULL or xn == NULL:
        free(x)
        free(xn)
        raise MemoryError()
    memset(x, 0, (n + 1) * sizeof(double))
    try:
        for k in range(nsteps + 1):
            w = 0.5 if (k == 0 or k == nsteps) else 1.0
            sample = 0.0
            speak = peak
            for o in range(p):
                acc = du[o]
                for j in range(n):
                    acc += C[o, j] * x[j]
                y = acc
                if not isfinite(y) or fabs(y) > threshold:
                    return sumsq, peak, k
                if fabs(y) > speak:
                    speak = fabs(y)
                e = r[o] - y
                sample += e * e
            # a sample counts only once every output passed the threshold check
            sumsq += w * sample
            peak = speak
            if k == nsteps:
                break
            for i in range(n):
                acc = bu[i]
                for j in range(n):
                    acc += Ad[i, j] * x[j]
                xn[i] = acc
            tmp = x
            x = xn
            xn = tmp
        return sumsq, peak, -1
    finally:
        free(x)
        free(xn)


def lti_step_response(const double[:, ::1] Ad, const double[::1] bu, const double[::1] c, double d,
                      long nsteps, const double[::1] x0):
    """Single-output samples y[0..nsteps] of the held-input recurrence from ``x0``."""
    cdef Py_ssize_t n = Ad.shape[0]
    cdef Py_ssize_t i, j
    cdef long k
    cdef double acc
    out = np.empty(nsteps + 1, dtype=np.float64)
    cdef double[::1] yv = out
    cdef double *x = <double *> malloc((n + 1) * sizeof(double))
    cdef double *xn = <double *> malloc((n + 1) * sizeof(double))
    cdef double *tmp
    if x == NULL or xn == NULL:
        free(x)
        free(xn)
        raise MemoryError()
    memset(x, 0, (n + 1) * sizeof(double))
    for i in range(n):
        x[i] = x0[i]
    try:
        for k in range(nsteps + 1):
            acc = d
            for j in range(n):
                acc += c[j] * x[j]
            yv[k] = acc
            if k == nsteps:
                break
            for i in range(n):
                acc = bu[i]
                for j in range(n):
                    acc += Ad[i, j] * x[j]
                xn[i] = acc
            tmp = x
            x = xn
            xn = tmp
        return out
    finally:
        free(x)
        free(xn)
