"""OLS-based comparators: Newey-West HAC and a memory-adjusted (MAC) long-run covariance."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import kernels
from .bandwidth import cross_periodogram, floor_power, fourier_frequencies, gph
from .errors import InvalidInputError, SingularCovarianceError
from .inference import EllipsoidRegion, marginal_p_values, wald_statistic
from .moments import RegressionDataset
from .quantiles import chi2_quantile, normal_quantile

PREWHITEN_MAX_RADIUS = 0.97


@dataclass(frozen=True)
class OlsFit:
    beta_hat: np.ndarray
    residuals: np.ndarray
    xtx_inv: np.ndarray


def ols_fit(dataset: RegressionDataset) -> OlsFit:
    xt = dataset.x_tilde
    q, r = np.linalg.qr(xt)
    diag = np.abs(np.diag(r))
    if diag.min() <= 1e-10 * max(diag.max(), 1.0):
        raise SingularCovarianceError("design matrix is rank deficient")
    beta = np.linalg.solve(r, q.T @ dataset.y)
    rinv = np.linalg.inv(r)
    return OlsFit(beta, dataset.y - xt @ beta, rinv @ rinv.T)


def scores(dataset: RegressionDataset, fit: OlsFit | None = None) -> np.ndarray:
    fit = fit or ols_fit(dataset)
    return dataset.x_tilde * fit.residuals[:, None]


def _symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


@dataclass(frozen=True)
class CovarianceEstimate:
    """``Var(beta_hat)`` from one comparator plus what went into it."""

    cov: np.ndarray
    method: str
    details: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Newey-West

@dataclass(frozen=True)
class HacConfig:
    lag: int | None = None
    prewhiten: bool = True
    small_sample_adjust: bool = True


def auto_lag(n: int) -> int:
    """``floor(4 (n/100)^{2/9})`` clamped to ``[1, n-1]``."""
    return int(min(max(np.floor(4.0 * (n / 100.0) ** (2.0 / 9.0)), 1), n - 1))


def bartlett_weights(lag: int) -> np.ndarray:
    j = np.arange(lag + 1)
    return 1.0 - j / (lag + 1.0)


def nw_hac_cov(dataset: RegressionDataset, cfg: HacConfig = HacConfig(),
               fit: OlsFit | None = None) -> CovarianceEstimate:
    """Bartlett-kernel HAC sandwich ``(X'X)^{-1} S (X'X)^{-1}``.

    With prewhitening, a VAR(1) is fitted to the scores, the HAC sum is taken
    over its residuals and recoloured by ``(I - A)^{-1}``. An explosive
    VAR (spectral radius >= 0.97) disables prewhitening for this call.
    """
    fit = fit or ols_fit(dataset)
    n, k = dataset.n, dataset.p + 1
    lag = auto_lag(n) if cfg.lag is None else int(cfg.lag)
    if not 1 <= lag <= n - 1:
        raise InvalidInputError(f"lag must lie in [1, {n - 1}], got {lag}")
    s = scores(dataset, fit)
    prewhitened = False
    fallback = False
    if cfg.prewhiten:
        lhs, rhs = s[1:], s[:-1]
        coef, *_ = np.linalg.lstsq(rhs, lhs, rcond=None)
        a = coef.T
        if np.max(np.abs(np.linalg.eigvals(a))) >= PREWHITEN_MAX_RADIUS:
            fallback = True
        else:
            resid = lhs - rhs @ coef
            meat = kernels.bartlett_sum(np.ascontiguousarray(resid), lag)
            back = np.linalg.inv(np.eye(k) - a)
            meat = back @ meat @ back.T
            prewhitened = True
    if not prewhitened:
        meat = kernels.bartlett_sum(np.ascontiguousarray(s), lag)
    cov = fit.xtx_inv @ meat @ fit.xtx_inv
    if cfg.small_sample_adjust:
        cov *= n / (n - k)
    return CovarianceEstimate(
        _symmetrize(cov), "nw-hac",
        {"lag": lag, "prewhitened": prewhitened, "prewhiten_fallback": fallback},
    )


# ---------------------------------------------------------------------------
# memory-adjusted long-run covariance

@dataclass(frozen=True)
class MacConfig:
    m: int | None = None
    big_m: int | None = None
    d_cap: float = 0.49

    def resolve(self, n: int) -> tuple[int, int]:
        m = self.m if self.m is not None else min(floor_power(n, 0.8), n // 50)
        big_m = self.big_m if self.big_m is not None else floor_power(n, 2.0 / 3.0)
        if m < 2 or big_m < 1:
            raise InvalidInputError(f"MAC frequency counts too small (m={m}, M={big_m})")
        return m, big_m


def cap_memory(d, cap: float = 0.49) -> np.ndarray:
    """Clamp memory estimates to ``[-cap, cap]``."""
    return np.clip(np.asarray(d, dtype=float), -cap, cap)


def partial_sum_constant(d) -> np.ndarray:
    """``lim n^{-1-2d} Var(sum x_t) / G`` for spectral density ``f(l) ~ G l^{-2d}``.

    Equals ``2 Gamma(1-2d) sin(pi d) / (d (1+2d))`` with the limit ``2 pi`` at ``d = 0``.
    """
    d = np.asarray(d, dtype=float)
    safe = np.where(np.abs(d) < 1e-8, 1.0, d)
    val = 2.0 * special.gamma(1.0 - 2.0 * d) * np.sin(np.pi * safe) / (safe * (1.0 + 2.0 * d))
    return np.where(np.abs(d) < 1e-8, 2.0 * np.pi, val)


def mac_long_run(score: np.ndarray, cfg: MacConfig = MacConfig(),
                 d_hat: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """``Var(sum_t g_t)`` for a possibly long-memory vector process.

    Returns the matrix and the capped memory estimates used.
    """
    score = np.asarray(score, dtype=float)
    n, k = score.shape
    m, big_m = cfg.resolve(n)
    if d_hat is None:
        d_hat = np.array([gph(score[:, a], m).d_hat for a in range(k)])
    d = cap_memory(d_hat, cfg.d_cap)
    ipg = cross_periodogram(score, big_m).real
    lam = fourier_frequencies(n, big_m)
    dsum = d[:, None] + d[None, :]
    g_hat = np.mean(lam[:, None, None] ** dsum[None] * ipg, axis=0)
    omega = n ** (1.0 + dsum) * partial_sum_constant(0.5 * dsum) * g_hat
    omega = _symmetrize(omega)
    w, v = np.linalg.eigh(omega)
    omega = (v * np.clip(w, 0.0, None)) @ v.T
    return _symmetrize(omega), d


def mac_cov(dataset: RegressionDataset, cfg: MacConfig = MacConfig(),
            fit: OlsFit | None = None, d_hat=None) -> CovarianceEstimate:
    """Sandwich ``(X'X)^{-1} Omega (X'X)^{-1}`` with the memory-adjusted ``Omega``."""
    if dataset.n < 100:
        raise InvalidInputError(f"MAC needs n >= 100, got {dataset.n}")
    fit = fit or ols_fit(dataset)
    omega, d = mac_long_run(scores(dataset, fit), cfg, d_hat)
    cov = fit.xtx_inv @ omega @ fit.xtx_inv
    m, big_m = cfg.resolve(dataset.n)
    return CovarianceEstimate(_symmetrize(cov), "mac", {"d_hat": d.tolist(), "m": m, "M": big_m})


# ---------------------------------------------------------------------------
# regions

def comparator_regions(beta_hat, cov, n: int | None = None, alpha: float = 0.05):
    """Wald ellipsoid and marginal intervals centred at the OLS estimate.

    ``n`` is accepted for signature symmetry; ``cov`` is already ``Var(beta_hat)``.
    """
    beta_hat = np.asarray(beta_hat, dtype=float)
    cov = np.asarray(cov, dtype=float)
    k = beta_hat.size
    region = EllipsoidRegion(beta_hat, cov, chi2_quantile(k, 1.0 - alpha), alpha)
    z = normal_quantile(1.0 - alpha / 2.0)
    se = np.sqrt(np.diag(cov))
    intervals = [(float(b - z * s), float(b + z * s)) for b, s in zip(beta_hat, se)]
    return region, intervals


def comparator_result_dict(fit: OlsFit, est: CovarianceEstimate, alpha: float = 0.05) -> dict:
    region, intervals = comparator_regions(fit.beta_hat, est.cov, alpha=alpha)
    k = fit.beta_hat.size
    wald = wald_statistic(fit.beta_hat, est.cov, np.eye(k), np.zeros(k))
    return {
        "method": est.method,
        "n": int(fit.residuals.size),
        "beta": fit.beta_hat.tolist(),
        "bias_corr": [0.0] * k,
        "estimate": fit.beta_hat.tolist(),
        "sigma_beta": est.cov.tolist(),
        "nh": None,
        "h": None,
        "branch": None,
        "d_hat": est.details.get("d_hat"),
        "truncation_active": False,
        "intervals": [list(ci) for ci in intervals],
        "p_values": marginal_p_values(fit.beta_hat, np.diag(est.cov)).tolist(),
        "joint": {
            "radius": region.radius,
            "log_volume": region.log_volume,
            "zero_in_region": region.contains(np.zeros(k)),
        },
        "wald": {"stat": wald.statistic, "p": wald.p_value},
        "details": est.details,
    }
