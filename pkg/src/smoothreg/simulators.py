"""Data-generating processes for the simulation laboratory.

Regressors are three independent Gaussian AR(1) chains. The error process is
one of ARMA(1,1), ARFIMA(0,d,0), a copula Markov chain driven by the extended
FGM family, or fractional Gaussian noise, each with a Gaussian or a
unit-variance Student-t(5) margin.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import signal, special

from . import kernels
from .errors import EmbeddingError, InvalidInputError
from .moments import RegressionDataset
from .quantiles import t_ppf

DEFAULT_BETA = (-2.0, 0.1, -1.0, 0.5)
BURN_IN = 1000
AR_COEF = 0.4
T5_SCALE = np.sqrt(3.0 / 5.0)
MARGINS = ("gaussian", "t5")


# ---------------------------------------------------------------------------
# RNG plumbing

def make_rng(seed) -> np.random.Generator:
    """Counter-based generator from an int, a SeedSequence, or a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


def substreams(seed, k: int) -> list[np.random.SeedSequence]:
    """``k`` independent child seed sequences."""
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return seed.spawn(k)


# ---------------------------------------------------------------------------
# error-process specifications

@dataclass(frozen=True)
class Arma:
    phi: float = 0.3
    theta: float = 0.4
    kind: str = field(default="arma", init=False)

    def __post_init__(self):
        if not abs(self.phi) < 1:
            raise InvalidInputError(f"ARMA requires |phi| < 1, got {self.phi}")

    def params(self) -> dict:
        return {"phi": self.phi, "theta": self.theta}


@dataclass(frozen=True)
class Arfima:
    d: float = 0.35
    kind: str = field(default="arfima", init=False)

    def __post_init__(self):
        if not 0 <= self.d < 0.5:
            raise InvalidInputError(f"ARFIMA requires 0 <= d < 0.5, got {self.d}")

    def params(self) -> dict:
        return {"d": self.d}


@dataclass(frozen=True)
class FgmCopula:
    lambda1: float = 0.15
    lambda2: float = 0.10
    kind: str = field(default="fgm", init=False)

    def __post_init__(self):
        if not ExtendedFGM.admissible(self.lambda1, self.lambda2):
            raise InvalidInputError(
                f"(lambda1, lambda2) = ({self.lambda1}, {self.lambda2}) is not admissible"
            )

    def params(self) -> dict:
        return {"lambda1": self.lambda1, "lambda2": self.lambda2}


@dataclass(frozen=True)
class Fgn:
    hurst: float = 0.8
    kind: str = field(default="fgn", init=False)

    def __post_init__(self):
        if not 0.5 <= self.hurst < 1:
            raise InvalidInputError(f"fGn requires 0.5 <= H < 1, got {self.hurst}")

    def params(self) -> dict:
        return {"hurst": self.hurst}


ErrorModel = Union[Arma, Arfima, FgmCopula, Fgn]


@dataclass(frozen=True)
class ErrorProcessSpec:
    model: ErrorModel
    margin: str = "gaussian"

    def __post_init__(self):
        if self.margin not in MARGINS:
            raise InvalidInputError(f"margin must be one of {MARGINS}, got {self.margin!r}")

    @property
    def label(self) -> str:
        args = ",".join(f"{k}={v:g}" for k, v in self.model.params().items())
        return f"{self.model.kind}({args})/{self.margin}"

    def to_dict(self) -> dict:
        return {"model": self.model.kind, **self.model.params(), "margin": self.margin}

    @classmethod
    def from_dict(cls, d: dict) -> "ErrorProcessSpec":
        d = dict(d)
        kind = d.pop("model")
        margin = d.pop("margin", "gaussian")
        models = {"arma": Arma, "arfima": Arfima, "fgm": FgmCopula, "fgn": Fgn}
        if kind not in models:
            raise InvalidInputError(f"unknown error model {kind!r}")
        return cls(models[kind](**d), margin)


@dataclass(frozen=True)
class SimulatedDataset:
    dataset: RegressionDataset
    true_beta: np.ndarray
    seed: object
    spec: ErrorProcessSpec
    metadata: dict = field(default_factory=dict)

    def to_csv(self, path=None) -> str:
        return write_dataset_csv(self.dataset, path)


def write_dataset_csv(dataset: RegressionDataset, path=None) -> str:
    """CSV text ``t, y, x1, ..., xp`` with round-trip float formatting, also written to ``path``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "y"] + [f"x{j + 1}" for j in range(dataset.p)])
    for t in range(dataset.n):
        w.writerow([t + 1, repr(float(dataset.y[t]))] + [repr(float(v)) for v in dataset.x[t]])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


# ---------------------------------------------------------------------------
# innovations and margins

def _innovations(n: int, margin: str, rng: np.random.Generator) -> np.ndarray:
    if margin == "gaussian":
        return rng.standard_normal(n)
    return T5_SCALE * rng.standard_t(5, size=n)


def uniform_to_margin(u: np.ndarray, margin: str) -> np.ndarray:
    """Inverse-CDF transform of uniforms to the requested unit-variance margin."""
    u = np.asarray(u, dtype=float)
    if margin == "gaussian":
        return special.ndtri(u)
    return T5_SCALE * t_ppf(5, u)


# ---------------------------------------------------------------------------
# regressors

def gen_regressors(n: int, rng, p: int = 3, coef: float = AR_COEF) -> np.ndarray:
    """``p`` independent AR(1) chains with N(0,1) innovations, started stationary."""
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    rng = make_rng(rng)
    total = n + BURN_IN
    eta = rng.standard_normal((total, p))
    x0 = rng.standard_normal(p) / np.sqrt(1.0 - coef ** 2)
    out, _ = signal.lfilter([1.0], [1.0, -coef], eta, axis=0, zi=(coef * x0)[None, :])
    return out[BURN_IN:]


# ---------------------------------------------------------------------------
# ARMA(1,1)

def gen_arma(n: int, phi: float, theta: float, margin: str, rng) -> np.ndarray:
    if not abs(phi) < 1:
        raise InvalidInputError(f"|phi| must be < 1, got {phi}")
    rng = make_rng(rng)
    xi = _innovations(n + BURN_IN, margin, rng)
    return kernels.arma11_filter(xi, float(phi), float(theta))[BURN_IN:]


def arma11_acf1(phi: float, theta: float) -> float:
    return (1 + phi * theta) * (phi + theta) / (1 + theta ** 2 + 2 * phi * theta)


# ---------------------------------------------------------------------------
# circulant embedding

def circulant_embedding(acov: np.ndarray, rng, size: int | None = None) -> np.ndarray:
    """Exact stationary Gaussian draw with autocovariance ``acov[0..]``.

    ``acov`` must hold at least ``size`` lags beyond the output length; the
    circulant has order ``2 * size`` (``size`` defaults to ``len(acov) - 1``).

    Raises
    ------
    EmbeddingError
        If the circulant has eigenvalues below ``-1e-8`` (relative).
    """
    acov = np.asarray(acov, dtype=float)
    if size is None:
        size = acov.size - 1
    row = np.concatenate([acov[: size + 1], acov[size - 1:0:-1]])
    lam = np.fft.fft(row).real
    if lam.min() < -1e-8 * max(lam.max(), 1.0):
        raise EmbeddingError(f"negative circulant eigenvalue {lam.min():.3g}")
    lam = np.clip(lam, 0.0, None)
    big_n = row.size
    z = rng.standard_normal(big_n) + 1j * rng.standard_normal(big_n)
    return np.fft.fft(np.sqrt(lam / big_n) * z).real


def _embed(acov_fn, n: int, rng) -> np.ndarray:
    rng = make_rng(rng)
    try:
        return circulant_embedding(acov_fn(n), rng, n)[:n]
    except EmbeddingError:
        return circulant_embedding(acov_fn(2 * n), rng, 2 * n)[:n]


# ---------------------------------------------------------------------------
# ARFIMA(0, d, 0)

def arfima_acov(d: float, nlags: int) -> np.ndarray:
    """Autocovariances ``gamma(0..nlags)`` for unit innovation variance."""
    k = np.arange(1, nlags + 1)
    ratios = (k - 1 + d) / (k - d)
    g0 = special.gamma(1 - 2 * d) / special.gamma(1 - d) ** 2
    return g0 * np.concatenate([[1.0], np.cumprod(ratios)])


def arfima_ma_weights(d: float, length: int) -> np.ndarray:
    """``psi_0 = 1, psi_k = psi_{k-1} (k - 1 + d) / k``."""
    k = np.arange(1, length)
    return np.concatenate([[1.0], np.cumprod((k - 1 + d) / k)])


def arfima_truncation(n: int) -> int:
    return max(10 * n, 10_000)


def gen_arfima(n: int, d: float, margin: str, rng) -> np.ndarray:
    """ARFIMA(0,d,0): exact embedding for Gaussian innovations, truncated MA otherwise."""
    if not 0 <= d < 0.5:
        raise InvalidInputError(f"d must lie in [0, 0.5), got {d}")
    rng = make_rng(rng)
    if margin == "gaussian":
        return _embed(lambda m: arfima_acov(d, m), n, rng)
    big_k = arfima_truncation(n)
    psi = arfima_ma_weights(d, big_k)
    xi = _innovations(n + big_k - 1, margin, rng)
    return signal.fftconvolve(xi, psi, mode="valid")


# ---------------------------------------------------------------------------
# fractional Gaussian noise

def fgn_acov(hurst: float, nlags: int) -> np.ndarray:
    k = np.arange(nlags + 1, dtype=float)
    h2 = 2 * hurst
    return 0.5 * (np.abs(k + 1) ** h2 - 2 * np.abs(k) ** h2 + np.abs(k - 1) ** h2)


def gen_fgn_gaussian(n: int, hurst: float, rng) -> np.ndarray:
    return _embed(lambda m: fgn_acov(hurst, m), n, rng)


def gen_fgn(n: int, hurst: float, margin: str, rng) -> np.ndarray:
    """Unit-variance fGn; the t5 margin uses the Gaussian-copula transform."""
    if not 0.5 <= hurst < 1:
        raise InvalidInputError(f"H must lie in [0.5, 1), got {hurst}")
    g = gen_fgn_gaussian(n, hurst, rng)
    if margin == "gaussian":
        return g
    return uniform_to_margin(special.ndtr(g), margin)


# ---------------------------------------------------------------------------
# extended FGM copula Markov chain

class ExtendedFGM:
    """Two-parameter extension of the FGM copula.

    ``C(u, v) = u v [1 + l1 (1-u)(1-v) + l2 u v (1-u)(1-v)]``; ``l2 = 0``
    gives the classical FGM copula with parameter ``l1``.
    """

    def __init__(self, lambda1: float, lambda2: float):
        if not self.admissible(lambda1, lambda2):
            raise InvalidInputError(f"({lambda1}, {lambda2}) outside the admissible region")
        self.lambda1 = float(lambda1)
        self.lambda2 = float(lambda2)

    @staticmethod
    def admissible(lambda1: float, lambda2: float) -> bool:
        """Nonnegativity of the copula density."""
        if not -1.0 <= lambda1 <= 1.0 or lambda1 + lambda2 < -1.0:
            return False
        upper = (3.0 - lambda1 + np.sqrt(max(9.0 - 6.0 * lambda1 - 3.0 * lambda1 ** 2, 0.0))) / 2.0
        return lambda2 <= upper

    def cdf(self, u, v):
        u, v = np.asarray(u, float), np.asarray(v, float)
        w = (1 - u) * (1 - v)
        return u * v * (1 + self.lambda1 * w + self.lambda2 * u * v * w)

    def density(self, u, v):
        u, v = np.asarray(u, float), np.asarray(v, float)
        return (1 + self.lambda1 * (1 - 2 * u) * (1 - 2 * v)
                + self.lambda2 * u * v * (2 - 3 * u) * (2 - 3 * v))

    def conditional_cdf(self, v, u):
        """``P(U_t <= v | U_{t-1} = u) = dC/du``."""
        u, v = np.asarray(u, float), np.asarray(v, float)
        a = self.lambda1 * (1 - 2 * u)
        b = self.lambda2 * u * (2 - 3 * u)
        return v + (a + b * v) * v * (1 - v)

    def inverse_conditional(self, w, u, tol: float = 1e-12) -> np.ndarray:
        """Solve ``conditional_cdf(v, u) = w`` elementwise."""
        w, u = np.broadcast_arrays(np.asarray(w, float), np.asarray(u, float))
        out = np.empty(w.shape)
        for idx in np.ndindex(w.shape):
            out[idx] = kernels.fgm_chain(
                float(u[idx]), np.array([w[idx]]), self.lambda1, self.lambda2, tol
            )[1]
        return out

    def sample_chain(self, n: int, rng, burn_in: int = BURN_IN) -> np.ndarray:
        rng = make_rng(rng)
        u0 = rng.random()
        w = rng.random(n + burn_in - 1)
        return kernels.fgm_chain(u0, w, self.lambda1, self.lambda2)[burn_in:]


def fgm_quadratic_inverse(w, u, lambda1: float) -> np.ndarray:
    """Closed-form inverse conditional CDF of the classical FGM copula."""
    w, u = np.broadcast_arrays(np.asarray(w, float), np.asarray(u, float))
    a = lambda1 * (1 - 2 * u)
    return 2 * w / ((1 + a) + np.sqrt((1 + a) ** 2 - 4 * a * w))


def gen_fgm_chain(n: int, lambda1: float, lambda2: float, margin: str, rng,
                  copula=None) -> np.ndarray:
    """Stationary copula Markov chain mapped to the requested margin.

    ``copula`` may be any object with a ``sample_chain(n, rng)`` method
    returning uniforms; the extended FGM family is the default.
    """
    cop = copula if copula is not None else ExtendedFGM(lambda1, lambda2)
    return uniform_to_margin(cop.sample_chain(n, rng), margin)


# ---------------------------------------------------------------------------
# full datasets

def gen_errors(n: int, spec: ErrorProcessSpec, rng) -> np.ndarray:
    m = spec.model
    if isinstance(m, Arma):
        return gen_arma(n, m.phi, m.theta, spec.margin, rng)
    if isinstance(m, Arfima):
        return gen_arfima(n, m.d, spec.margin, rng)
    if isinstance(m, FgmCopula):
        return gen_fgm_chain(n, m.lambda1, m.lambda2, spec.margin, rng)
    if isinstance(m, Fgn):
        return gen_fgn(n, m.hurst, spec.margin, rng)
    raise InvalidInputError(f"unsupported error model {m!r}")


def gen_dataset(n: int, spec: ErrorProcessSpec, seed, beta=DEFAULT_BETA) -> SimulatedDataset:
    """Regression sample with regressors and errors drawn from independent substreams."""
    beta = np.asarray(beta, dtype=float)
    x_ss, e_ss = substreams(seed, 2)
    x = gen_regressors(n, make_rng(x_ss), p=beta.size - 1)
    eps = gen_errors(n, spec, make_rng(e_ss))
    y = beta[0] + x @ beta[1:] + eps
    meta = {}
    if isinstance(spec.model, Arfima) and spec.margin != "gaussian":
        meta["ma_truncation"] = arfima_truncation(n)
    return SimulatedDataset(RegressionDataset(y, x), beta, seed, spec, meta)
