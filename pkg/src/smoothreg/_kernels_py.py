"""Pure-Python versions of the compiled kernels in ``_kernels.pyx``."""
import math

import numpy as np


def fgm_chain(u0, w, lam1, lam2, tol=1e-12):
    w = np.asarray(w, dtype=float)
    out = np.empty(w.size + 1)
    out[0] = u0
    u = float(u0)
    for t, target in enumerate(w.tolist(), start=1):
        a = lam1 * (1.0 - 2.0 * u)
        b = lam2 * u * (2.0 - 3.0 * u)
        if b == 0.0:
            if a == 0.0:
                u = target
            else:
                disc = (1.0 + a) * (1.0 + a) - 4.0 * a * target
                u = 2.0 * target / ((1.0 + a) + math.sqrt(disc))
        else:
            lo, hi = 0.0, 1.0
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                if mid + (a + b * mid) * mid * (1.0 - mid) < target:
                    lo = mid
                else:
                    hi = mid
            u = 0.5 * (lo + hi)
        out[t] = u
    return out


def bartlett_sum(s, lag):
    s = np.ascontiguousarray(s, dtype=float)
    n = s.shape[0]
    out = s.T @ s
    for j in range(1, min(lag, n - 1) + 1):
        gj = s[j:].T @ s[:-j]
        out += (1.0 - j / (lag + 1.0)) * (gj + gj.T)
    return out


def arma11_filter(xi, phi, theta):
    xi = np.asarray(xi, dtype=float)
    out = np.empty(xi.size)
    prev_e, prev_xi = 0.0, 0.0
    for t, x in enumerate(xi.tolist()):
        prev_e = phi * prev_e + x + theta * prev_xi
        prev_xi = x
        out[t] = prev_e
    return out
