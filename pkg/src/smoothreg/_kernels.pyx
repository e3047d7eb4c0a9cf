# cython: language_level=3
"""Compiled inner loops. Signatures mirror ``_kernels_py``."""
import numpy as np

from libc.math cimport fabs, sqrt


cdef inline double _hk_ccdf(double v, double a, double b) nogil:
    # v + a v(1-v) + b v^2 (1-v)
    return v + (a + b * v) * v * (1.0 - v)


def fgm_chain(double u0, const double[::1] w, double lam1, double lam2, double tol=1e-12):
    """Markov chain driven by the extended FGM conditional CDF.

    ``out[0] = u0``; ``out[t]`` solves ``C_{2|1}(v | out[t-1]) = w[t-1]``.
    """
    cdef Py_ssize_t n = w.shape[0] + 1
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t t
    cdef double u, a, b, lo, hi, mid, target, disc
    out[0] = u0
    with nogil:
        for t in range(1, n):
            u = out[t - 1]
            target = w[t - 1]
            a = lam1 * (1.0 - 2.0 * u)
            b = lam2 * u * (2.0 - 3.0 * u)
            if b == 0.0:
                if a == 0.0:
                    out[t] = target
                else:
                    disc = (1.0 + a) * (1.0 + a) - 4.0 * a * target
                    out[t] = 2.0 * target / ((1.0 + a) + sqrt(disc))
                continue
            lo = 0.0
            hi = 1.0
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                if _hk_ccdf(mid, a, b) < target:
                    lo = mid
                else:
                    hi = mid
            out[t] = 0.5 * (lo + hi)
    return out_arr


def bartlett_sum(const double[:, ::1] s, Py_ssize_t lag):
    """``sum_t sum_s w(|t-s|) s_t s_s^T`` with ``w(j) = 1 - j/(lag+1)``."""
    cdef Py_ssize_t n = s.shape[0], k = s.shape[1]
    out_arr = np.zeros((k, k), dtype=np.float64)
    lagged_arr = np.zeros((k, k), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[:, ::1] lagged = lagged_arr
    cdef Py_ssize_t j, t, a, b, jmax = min(lag, n - 1)
    cdef double wj, sa
    with nogil:
        # row-wise so every access to s is contiguous
        for t in range(n):
            for a in range(k):
                sa = s[t, a]
                for b in range(k):
                    out[a, b] += sa * s[t, b]
            for j in range(1, min(jmax, t) + 1):
                wj = 1.0 - <double>j / (lag + 1.0)
                for a in range(k):
                    sa = wj * s[t, a]
                    for b in range(k):
                        lagged[a, b] += sa * s[t - j, b]
        for a in range(k):
            for b in range(k):
                out[a, b] += lagged[a, b] + lagged[b, a]
    return out_arr


def arma11_filter(const double[::1] xi, double phi, double theta):
    """``e_t = phi e_{t-1} + xi_t + theta xi_{t-1}`` with zero initial state."""
    cdef Py_ssize_t n = xi.shape[0], t
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    if n == 0:
        return out_arr
    with nogil:
        out[0] = xi[0]
        for t in range(1, n):
            out[t] = phi * out[t - 1] + xi[t] + theta * xi[t - 1]
    return out_arr
