"""Random-smoothing estimator of the regression moment vector.

Each observation ``U_i`` is weighted by ``K(V_i / h)`` where ``V_i`` is an
auxiliary draw from a known density ``f`` independent of the data. Dividing by
the exact expectation ``n E[K(V/h)]`` keeps the estimator unbiased.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import InvalidInputError
from .moments import dim_from_length, vech_length

_SQRT2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class Kernel:
    """Symmetric bounded density used as smoothing kernel."""

    name: str
    pdf: Callable[[np.ndarray], np.ndarray]
    support: float = np.inf

    def moment_constants(self) -> tuple[float, float]:
        """``(c2, d2) = (int K^2, int u^2 K)`` by quadrature."""
        s = self.support
        c2 = integrate.quad(lambda u: self.pdf(u) ** 2, -s, s, epsabs=1e-13)[0]
        d2 = integrate.quad(lambda u: u * u * self.pdf(u), -s, s, epsabs=1e-13)[0]
        return c2, d2


@dataclass(frozen=True)
class AuxDensity:
    """Known density of the auxiliary sample."""

    name: str
    pdf: Callable[[np.ndarray], np.ndarray]
    sampler: Callable[[np.random.Generator, int], np.ndarray]
    f0: float
    f2_0: float

    def rvs(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.sampler(rng, n)


def _gauss(u):
    return np.exp(-0.5 * np.square(u)) / _SQRT2PI


def _epanechnikov(u):
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)


def _cauchy(v):
    return 1.0 / (np.pi * (1.0 + np.square(v)))


KERNELS = {
    "gaussian": Kernel("gaussian", _gauss),
    "epanechnikov": Kernel("epanechnikov", _epanechnikov, support=1.0),
}

AUX_DENSITIES = {
    "normal": AuxDensity(
        "normal", _gauss, lambda rng, n: rng.standard_normal(n),
        f0=1.0 / _SQRT2PI, f2_0=-1.0 / _SQRT2PI,
    ),
    "cauchy": AuxDensity(
        "cauchy", _cauchy, lambda rng, n: rng.standard_cauchy(n),
        f0=1.0 / np.pi, f2_0=-2.0 / np.pi,
    ),
}


@dataclass(frozen=True)
class SmoothingConfig:
    """Kernel, auxiliary density and scale constants of the smoothed estimator.

    The kernel constants ``c2`` and ``d2`` are filled in at construction,
    analytically for the Gaussian kernel and by quadrature otherwise.
    """

    kernel: str = "gaussian"
    aux_density: str = "normal"
    lambda_sigma: float = 1.0
    lambda_gamma: float = 2.0
    c2: float = field(init=False)
    d2: float = field(init=False)
    f0: float = field(init=False)
    f2_0: float = field(init=False)

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise InvalidInputError(f"unknown kernel {self.kernel!r}")
        if self.aux_density not in AUX_DENSITIES:
            raise InvalidInputError(f"unknown auxiliary density {self.aux_density!r}")
        if not (self.lambda_sigma > 0 and self.lambda_gamma > 0):
            raise InvalidInputError("scale constants must be positive")
        if self.lambda_sigma == self.lambda_gamma:
            raise InvalidInputError("lambda_sigma and lambda_gamma must differ")
        if self.kernel == "gaussian":
            c2, d2 = 1.0 / (2.0 * np.sqrt(np.pi)), 1.0
        else:
            c2, d2 = KERNELS[self.kernel].moment_constants()
        dens = AUX_DENSITIES[self.aux_density]
        object.__setattr__(self, "c2", c2)
        object.__setattr__(self, "d2", d2)
        object.__setattr__(self, "f0", dens.f0)
        object.__setattr__(self, "f2_0", dens.f2_0)

    @property
    def kernel_obj(self) -> Kernel:
        return KERNELS[self.kernel]

    @property
    def density(self) -> AuxDensity:
        return AUX_DENSITIES[self.aux_density]

    @property
    def kappa(self) -> float:
        """Leading coefficient of ``E[f_hat(0)]/f(0) = 1 + kappa h^2 + o(h^2)``."""
        return self.f2_0 * self.d2 / (2.0 * self.f0)

    @property
    def lambda_gap(self) -> float:
        return self.lambda_gamma ** 2 - self.lambda_sigma ** 2

    def lambda_matrix_diag(self, m: int) -> np.ndarray:
        q1 = vech_length(m)
        return np.concatenate([
            np.full(q1, self.lambda_sigma ** 2), np.full(m, self.lambda_gamma ** 2),
        ])

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel, "aux_density": self.aux_density,
            "lambda_sigma": self.lambda_sigma, "lambda_gamma": self.lambda_gamma,
        }


@dataclass(frozen=True)
class SmoothedMoments:
    mu_hat: np.ndarray
    mu_tilde: np.ndarray
    a_sigma: float
    a_gamma: float
    h: float
    n: int
    c_n: float
    kappa: float


def _check_h(h):
    if not (np.isfinite(h) and h > 0):
        raise InvalidInputError(f"bandwidth must be positive, got {h}")


def kernel_mean(h: float, cfg: SmoothingConfig) -> float:
    """``E[K(V/h)]`` under the auxiliary density."""
    _check_h(h)
    if cfg.kernel == "gaussian" and cfg.aux_density == "normal":
        return h / np.sqrt(2.0 * np.pi * (1.0 + h * h))
    k, f = cfg.kernel_obj, cfg.density.pdf
    if np.isfinite(k.support):
        s = k.support * h
        return integrate.quad(lambda v: k.pdf(v / h) * f(v), -s, s, epsabs=1e-12)[0]
    # substitute v = h u so the integrand lives on the kernel's scale
    val = integrate.quad(lambda u: k.pdf(u) * f(h * u), -np.inf, np.inf, epsabs=1e-12)[0]
    return h * val


def smoothing_weights(v: np.ndarray, h: float, cfg: SmoothingConfig) -> np.ndarray:
    """Weights ``K(V_i/h) / (n E[K(V/h)])``; they sum to one in expectation."""
    v = np.asarray(v, dtype=float)
    return cfg.kernel_obj.pdf(v / h) / (v.size * kernel_mean(h, cfg))


def smoothed_mu(u: np.ndarray, v: np.ndarray, h: float, cfg: SmoothingConfig) -> np.ndarray:
    u = np.atleast_2d(np.asarray(u, dtype=float))
    v = np.asarray(v, dtype=float).ravel()
    if u.shape[0] != v.size or v.size == 0:
        raise InvalidInputError(f"{u.shape[0]} moment rows but {v.size} auxiliary draws")
    return smoothing_weights(v, h, cfg) @ u


def scale_factors(h: float, cfg: SmoothingConfig) -> tuple[float, float]:
    """``a_lambda = E[f_hat_{lambda h}(0)] / f(0)`` for ``lambda_sigma`` and ``lambda_gamma``."""
    _check_h(h)

    def a(lam):
        hl = lam * h
        return kernel_mean(hl, cfg) / (hl * cfg.f0)

    return a(cfg.lambda_sigma), a(cfg.lambda_gamma)


def truncation_level(n: int, h: float) -> float:
    """``(n h)^{-1/2} log(log n)``."""
    if n < 3:
        raise InvalidInputError(f"truncation level needs n >= 3, got {n}")
    _check_h(h)
    return np.log(np.log(n)) / np.sqrt(n * h)


def smooth_moments(u: np.ndarray, v: np.ndarray, h: float, cfg: SmoothingConfig) -> SmoothedMoments:
    """Smoothed moments, their rescaled version and the truncation level."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    mu_hat = smoothed_mu(u, v, h, cfg)
    m = dim_from_length(mu_hat.size)
    a_s, a_g = scale_factors(h, cfg)
    q1 = vech_length(m)
    mu_tilde = mu_hat.copy()
    mu_tilde[:q1] *= a_s
    mu_tilde[q1:] *= a_g
    n = u.shape[0]
    return SmoothedMoments(
        mu_hat=mu_hat, mu_tilde=mu_tilde, a_sigma=a_s, a_gamma=a_g, h=h, n=n,
        c_n=truncation_level(n, h), kappa=cfg.kappa,
    )
