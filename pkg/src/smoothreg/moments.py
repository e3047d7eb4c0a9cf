"""Moment-vector algebra for the regression coefficient map.

A moment vector stacks ``vech(Sigma)`` and ``Gamma`` where ``Sigma = E[x x^T]``
and ``Gamma = E[x y]`` for the intercept-augmented regressor ``x = (1, X)``.
The coefficient vector is ``g(mu) = Sigma^{-1} Gamma``.

``vech`` is the column-stacked lower triangle and is the only layout used
anywhere in the package.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, InvalidInputError


@lru_cache(maxsize=None)
def _vech_indices(m: int) -> tuple[np.ndarray, np.ndarray]:
    # upper-triangle row-major == lower-triangle column-major after transposing
    r, c = np.triu_indices(m)
    rows, cols = c, r
    rows.setflags(write=False)
    cols.setflags(write=False)
    return rows, cols


def vech_length(m: int) -> int:
    return m * (m + 1) // 2


def moment_length(p: int) -> int:
    """Length ``q = (p+1)(p+2)/2 + (p+1)`` of the moment vector for ``p`` regressors."""
    m = p + 1
    return vech_length(m) + m


def dim_from_length(q: int) -> int:
    """Recover ``m = p + 1`` from the moment-vector length ``q``."""
    # q = m(m+1)/2 + m  =>  m^2 + 3m - 2q = 0
    m = int(round((-3 + np.sqrt(9 + 8 * q)) / 2))
    if m < 1 or vech_length(m) + m != q:
        raise InvalidInputError(f"{q} is not a valid moment-vector length")
    return m


def vech(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    rows, cols = _vech_indices(a.shape[0])
    return a[rows, cols]


def unvech(v: np.ndarray, m: int | None = None) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if m is None:
        m = int(round((np.sqrt(1 + 8 * v.size) - 1) / 2))
    if vech_length(m) != v.size:
        raise InvalidInputError(f"vech vector of length {v.size} does not match m={m}")
    rows, cols = _vech_indices(m)
    out = np.empty((m, m))
    out[rows, cols] = v
    out[cols, rows] = v
    return out


@dataclass(frozen=True)
class MomentVector:
    """Stacked regression moments ``(vech(Sigma), Gamma)``."""

    vech_sigma: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        vs = np.asarray(self.vech_sigma, dtype=float)
        gm = np.asarray(self.gamma, dtype=float)
        if vs.size != vech_length(gm.size):
            raise InvalidInputError(
                f"vech block of length {vs.size} incompatible with gamma of length {gm.size}"
            )
        object.__setattr__(self, "vech_sigma", vs)
        object.__setattr__(self, "gamma", gm)

    @classmethod
    def from_array(cls, x) -> "MomentVector":
        x = np.asarray(x, dtype=float)
        m = dim_from_length(x.size)
        return cls(x[: x.size - m], x[x.size - m:])

    @property
    def m(self) -> int:
        return self.gamma.size

    @property
    def p(self) -> int:
        return self.gamma.size - 1

    @property
    def sigma(self) -> np.ndarray:
        return unvech(self.vech_sigma, self.m)

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.vech_sigma, self.gamma])

    def __array__(self, dtype=None, copy=None):
        out = self.to_array()
        return out if dtype is None else out.astype(dtype)


# UVector shares the layout; the alias keeps signatures self-describing.
UVector = MomentVector


@dataclass(frozen=True)
class RegressionDataset:
    """Response ``y`` (length n) and design ``x`` (n x p, no intercept column)."""

    y: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] != y.size:
            raise InvalidInputError(f"x has shape {x.shape}, expected ({y.size}, p)")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise InvalidInputError("dataset contains non-finite values")
        if y.size <= moment_length(x.shape[1]):
            raise InvalidInputError(
                f"n={y.size} must exceed the moment dimension q={moment_length(x.shape[1])}"
            )
        y.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def x_tilde(self) -> np.ndarray:
        return np.column_stack([np.ones(self.n), self.x])


def _split(x) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    m = dim_from_length(x.size)
    return unvech(x[: x.size - m], m), x[x.size - m:]


def build_u(x_row, y: float) -> np.ndarray:
    """Moment contribution ``(vech(xt xt^T), xt y)`` of one observation, ``xt = (1, x_row)``."""
    x_row = np.atleast_1d(np.asarray(x_row, dtype=float))
    if not (np.all(np.isfinite(x_row)) and np.isfinite(y)):
        raise InvalidInputError("non-finite input to build_u")
    xt = np.concatenate([[1.0], x_row])
    return np.concatenate([vech(np.outer(xt, xt)), xt * float(y)])


def build_u_matrix(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Row-wise :func:`build_u` for a whole sample; returns an ``n x q`` array."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    xt = np.column_stack([np.ones(x.shape[0]), x])
    rows, cols = _vech_indices(xt.shape[1])
    return np.column_stack([xt[:, rows] * xt[:, cols], xt * y[:, None]])


def det_sigma(x) -> float:
    sigma, _ = _split(x)
    return float(np.linalg.det(sigma))


def cramer_numerators(x) -> np.ndarray:
    """``P_l = det(Sigma with column l replaced by Gamma)`` for each ``l``."""
    sigma, gamma = _split(x)
    m = gamma.size
    stack = np.repeat(sigma[None, :, :], m, axis=0)
    stack[np.arange(m), :, np.arange(m)] = gamma
    return np.linalg.det(stack)


def g_map(x) -> np.ndarray:
    """Coefficient map ``Sigma(x)^{-1} Gamma(x)``.

    Raises
    ------
    DomainError
        If ``det(Sigma(x)) <= 0``.
    """
    sigma, gamma = _split(x)
    delta = np.linalg.det(sigma)
    if not delta > 0:
        raise DomainError(delta)
    return np.linalg.solve(sigma, gamma)


def g_truncated(x, c: float) -> np.ndarray:
    """``(P_0, ..., P_p) / max(det Sigma, c)``; defined for every ``x``."""
    delta = det_sigma(x)
    if delta >= c and delta > 0:
        return g_map(x)
    return cramer_numerators(x) / max(delta, c)


def grad_g(x) -> np.ndarray:
    """Jacobian of :func:`g_map` in moment-vector coordinates (``m x q``)."""
    sigma, gamma = _split(x)
    delta = np.linalg.det(sigma)
    if not delta > 0:
        raise DomainError(delta)
    m = gamma.size
    sinv = np.linalg.inv(sigma)
    g = sinv @ gamma
    rows, cols = _vech_indices(m)
    # d g / d sigma_ij = -Sinv E_ij g,  E_ij = e_i e_j^T + e_j e_i^T  (i != j)
    block = -(sinv[:, rows] * g[cols] + sinv[:, cols] * g[rows])
    diag = rows == cols
    block[:, diag] *= 0.5
    return np.hstack([block, sinv])


def _cofactors(a: np.ndarray) -> np.ndarray:
    """Cofactor matrix by explicit minors; valid for singular ``a``."""
    m = a.shape[0]
    if m == 1:
        return np.ones((1, 1))
    out = np.empty_like(a)
    for i in range(m):
        keep_r = np.r_[0:i, i + 1:m]
        for j in range(m):
            keep_c = np.r_[0:j, j + 1:m]
            out[i, j] = (-1) ** (i + j) * np.linalg.det(a[np.ix_(keep_r, keep_c)])
    return out


def grad_cramer_numerators(x) -> np.ndarray:
    """Jacobian of ``(P_0, ..., P_p)`` with respect to the moment vector."""
    sigma, gamma = _split(x)
    m = gamma.size
    rows, cols = _vech_indices(m)
    q1 = rows.size
    jac = np.zeros((m, q1 + m))
    for ell in range(m):
        a = sigma.copy()
        a[:, ell] = gamma
        cof = _cofactors(a)
        for k, (i, j) in enumerate(zip(rows, cols)):
            # sigma_ij sits at (i, j) and (j, i); column ell holds gamma instead
            val = cof[i, j] if j != ell else 0.0
            if i != j and i != ell:
                val += cof[j, i]
            jac[ell, k] = val
        jac[ell, q1:] = cof[:, ell]
    return jac


def grad_g_truncated(x, c: float) -> np.ndarray:
    """Jacobian of :func:`g_truncated`.

    On ``det Sigma >= c`` this is :func:`grad_g`; below it the clamped
    denominator ``c`` is held constant.
    """
    delta = det_sigma(x)
    if delta >= c and delta > 0:
        return grad_g(x)
    return grad_cramer_numerators(x) / c


def sigma_mu_hat(u: np.ndarray, c2: float, f0: float) -> np.ndarray:
    """Plug-in covariance ``(c2/f0) * mean(U_i U_i^T)`` of the smoothed moments."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    if u.shape[0] == 0:
        raise InvalidInputError("empty moment sample")
    out = (c2 / f0) * (u.T @ u) / u.shape[0]
    return 0.5 * (out + out.T)


def sample_moments(dataset: RegressionDataset) -> np.ndarray:
    """Plain sample mean of the ``U_i``."""
    return build_u_matrix(dataset.x, dataset.y).mean(axis=0)
