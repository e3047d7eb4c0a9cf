"""Normal, chi-square and Student-t quantiles and tail probabilities."""
from __future__ import annotations

import numpy as np
from scipy import special

from .errors import InvalidInputError


def _check_p(p):
    if not (0.0 < p < 1.0):
        raise InvalidInputError(f"probability must lie in (0, 1), got {p}")


def normal_quantile(p: float) -> float:
    _check_p(p)
    return float(special.ndtri(p))


def chi2_quantile(k: float, p: float) -> float:
    _check_p(p)
    if not k >= 1:
        raise InvalidInputError(f"degrees of freedom must be >= 1, got {k}")
    # inverse of the regularized lower incomplete gamma P(k/2, x/2)
    return float(2.0 * special.gammaincinv(0.5 * k, p))


def t_quantile(df: float, p: float) -> float:
    _check_p(p)
    if not df >= 1:
        raise InvalidInputError(f"degrees of freedom must be >= 1, got {df}")
    if p == 0.5:
        return 0.0
    return float(special.stdtrit(df, p))


def chi2_sf(x: float, k: float) -> float:
    """Upper tail ``1 - F_{chi2_k}(x)``."""
    if x <= 0:
        return 1.0
    return float(special.gammaincc(0.5 * k, 0.5 * x))


def normal_cdf(x):
    return special.ndtr(x)


def t_ppf(df: float, p) -> np.ndarray:
    """Vectorized Student-t quantile used by margin transforms."""
    return special.stdtrit(df, p)
