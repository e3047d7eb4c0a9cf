"""Bandwidth selection.

Two regimes are distinguished by a one-sided test on the GPH memory estimate
of the OLS residuals. Under short memory the MSE-optimal plug-in bandwidth
(rate ``n^{-1/5}``) is used; under long memory ``h = C(d_hat) log(n) / n``
with ``C`` read off a calibrated grid.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateError, InvalidInputError
from .moments import RegressionDataset, build_u_matrix, g_map, grad_g
from .quantiles import normal_quantile
from .smoothing import SmoothingConfig

LONG_MEMORY = "long_memory"
SHORT_MEMORY = "short_memory"
MEMORY_THRESHOLD = 0.1

# (d, C(d)) calibrated under ARFIMA(0,d,0) errors, n in {250, 1000, 5000}
TABLE1 = (
    (0.11, 17), (0.13, 13), (0.15, 13), (0.17, 17), (0.19, 13),
    (0.21, 11), (0.23, 11), (0.25, 9), (0.27, 13), (0.29, 9),
    (0.31, 5), (0.33, 9), (0.35, 7), (0.37, 5), (0.39, 5),
    (0.41, 5), (0.43, 5), (0.45, 5), (0.47, 7), (0.49, 5),
)


# ---------------------------------------------------------------------------
# spectral tools

def periodogram(series) -> np.ndarray:
    """``I(l_k) = |sum_t x_t e^{i t l_k}|^2 / (2 pi n)`` at ``l_k = 2 pi k / n``, ``k = 1..n//2``.

    The series is demeaned first.
    """
    x = np.asarray(series, dtype=float).ravel()
    n = x.size
    if n < 4:
        raise InvalidInputError(f"periodogram needs n >= 4, got {n}")
    f = np.fft.rfft(x - x.mean())
    return (np.abs(f[1: n // 2 + 1]) ** 2) / (2.0 * np.pi * n)


def cross_periodogram(series: np.ndarray, nfreq: int) -> np.ndarray:
    """Cross-periodogram matrices ``I_ab(l_k)`` for ``k = 1..nfreq`` (shape ``nfreq x k x k``)."""
    x = np.asarray(series, dtype=float)
    n = x.shape[0]
    f = np.fft.rfft(x - x.mean(axis=0), axis=0)[1: nfreq + 1]
    return np.einsum("ka,kb->kab", f, f.conj()) / (2.0 * np.pi * n)


def floor_power(n: int, e: float) -> int:
    """``floor(n^e)`` robust to round-off at exact powers (``1000^(2/3)`` is 99.999...)."""
    return int(np.floor(n ** e * (1.0 + 1e-12)))


def fourier_frequencies(n: int, count: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(1, count + 1) / n


@dataclass(frozen=True)
class GphEstimate:
    d_hat: float
    sigma_d: float
    m: int
    n: int


def gph_sigma(m: int) -> float:
    """Asymptotic standard deviation ``pi / sqrt(24 m)`` of the GPH estimate."""
    return np.pi / np.sqrt(24.0 * m)


def gph(series, m: int, regressor: str = "sine") -> GphEstimate:
    """Log-periodogram regression estimate of the memory parameter.

    Parameters
    ----------
    series : array_like
    m : int
        Number of low Fourier frequencies, ``2 <= m <= n // 2``.
    regressor : {"sine", "log"}
        ``-2 log(2 sin(l/2))`` (default) or ``-2 log(l)``.
    """
    x = np.asarray(series, dtype=float).ravel()
    n = x.size
    if not 2 <= m <= n // 2:
        raise InvalidInputError(f"m={m} outside [2, {n // 2}]")
    ords = periodogram(x)[:m]
    if np.any(ords <= 0):
        raise DegenerateError("zero periodogram ordinate among the first m frequencies")
    lam = fourier_frequencies(n, m)
    if regressor == "sine":
        z = -2.0 * np.log(2.0 * np.sin(lam / 2.0))
    elif regressor == "log":
        z = -2.0 * np.log(lam)
    else:
        raise InvalidInputError(f"unknown GPH regressor {regressor!r}")
    zc = z - z.mean()
    d_hat = float(zc @ np.log(ords) / (zc @ zc))
    return GphEstimate(d_hat=d_hat, sigma_d=gph_sigma(m), m=m, n=n)


# ---------------------------------------------------------------------------
# plug-in optimal bandwidth

def plugin_constant(cfg: SmoothingConfig) -> float:
    """``c2 f(0) / ((f''(0) d2)^2 (lambda_G^2 - lambda_S^2)^2)``."""
    return cfg.c2 * cfg.f0 / ((cfg.f2_0 * cfg.d2) ** 2 * cfg.lambda_gap ** 2)


def h_opt(u: np.ndarray, cfg: SmoothingConfig) -> float:
    """MSE-optimal bandwidth for the rescaled estimator.

    Raises
    ------
    DomainError
        If the sample-mean moment vector has ``det Sigma <= 0``.
    DegenerateError
        If ``g`` vanishes at the sample mean.
    """
    u = np.atleast_2d(np.asarray(u, dtype=float))
    n = u.shape[0]
    ubar = u.mean(axis=0)
    grad = grad_g(ubar)
    g = g_map(ubar)
    gnorm2 = float(g @ g)
    if gnorm2 == 0.0:
        raise DegenerateError("g(U_bar) = 0; the plug-in bandwidth is undefined")
    z = u @ grad.T
    ratio = float(np.mean(np.sum(z * z, axis=1))) / gnorm2
    return (plugin_constant(cfg) * ratio) ** 0.2 * n ** -0.2


# ---------------------------------------------------------------------------
# calibration grid

@dataclass(frozen=True)
class CalibrationGrid:
    points: tuple

    def __post_init__(self):
        pts = tuple((float(d), float(c)) for d, c in self.points)
        if not pts:
            raise InvalidInputError("calibration grid is empty")
        ds = [d for d, _ in pts]
        if any(b <= a for a, b in zip(ds, ds[1:])):
            raise InvalidInputError("calibration grid d values must be strictly increasing")
        if any(c <= 0 for _, c in pts):
            raise InvalidInputError("calibration constants must be positive")
        object.__setattr__(self, "points", pts)

    @classmethod
    def default(cls) -> "CalibrationGrid":
        return cls(TABLE1)

    @property
    def d(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    @property
    def c(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["d", "C"])
        for d, c in self.points:
            w.writerow([repr(d), repr(c)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "CalibrationGrid":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or [h.strip() for h in rows[0]] != ["d", "C"]:
            raise InvalidInputError(f"{path}: expected header 'd,C'")
        try:
            pts = [(float(r[0]), float(r[1])) for r in rows[1:] if r]
        except (ValueError, IndexError) as exc:
            raise InvalidInputError(f"{path}: malformed grid row ({exc})") from None
        return cls(tuple(pts))


def c_of_d(grid: CalibrationGrid, d_hat: float) -> float:
    """Piecewise-linear interpolation of ``C`` with flat extrapolation."""
    # np.interp clamps to the end values outside [d_1, d_G]
    return float(np.interp(d_hat, grid.d, grid.c))


def log_rate_bandwidth(c: float, n: int) -> float:
    return c * np.log(n) / n


# ---------------------------------------------------------------------------
# adaptive selection

@dataclass(frozen=True)
class BandwidthDecision:
    branch: str
    h: float
    gph: GphEstimate
    t_stat: float
    alpha: float
    c_of_d: float | None = None

    def to_dict(self) -> dict:
        return {
            "branch": self.branch, "h": self.h, "d_hat": self.gph.d_hat,
            "sigma_d": self.gph.sigma_d, "m": self.gph.m, "t_stat": self.t_stat,
            "alpha": self.alpha, "c_of_d": self.c_of_d,
        }


def ols_residuals(dataset: RegressionDataset) -> np.ndarray:
    xt = dataset.x_tilde
    beta, *_ = np.linalg.lstsq(xt, dataset.y, rcond=None)
    return dataset.y - xt @ beta


def select_bandwidth(dataset: RegressionDataset, cfg: SmoothingConfig,
                     grid: CalibrationGrid | None = None, delta: float = 0.5,
                     alpha: float = 0.05, regressor: str = "sine") -> BandwidthDecision:
    """Test ``d <= 0.1`` against ``d > 0.1`` on the OLS residuals and pick ``h`` accordingly."""
    n = dataset.n
    if n < 50:
        raise InvalidInputError(f"bandwidth selection needs n >= 50, got {n}")
    if not 0 < delta < 0.8:
        raise InvalidInputError(f"delta must lie in (0, 0.8), got {delta}")
    grid = grid or CalibrationGrid.default()
    m = floor_power(n, delta)
    est = gph(ols_residuals(dataset), m, regressor)
    t_stat = (est.d_hat - MEMORY_THRESHOLD) / est.sigma_d
    if t_stat > normal_quantile(1.0 - alpha):
        c = c_of_d(grid, est.d_hat)
        return BandwidthDecision(LONG_MEMORY, log_rate_bandwidth(c, n), est, t_stat, alpha, c)
    # near-exact fits drive the plug-in ratio to zero; never go below what the
    # long-memory branch would use at the test threshold
    floor = log_rate_bandwidth(c_of_d(grid, MEMORY_THRESHOLD), n)
    h = max(h_opt(build_u_matrix(dataset.x, dataset.y), cfg), floor)
    return BandwidthDecision(SHORT_MEMORY, h, est, t_stat, alpha)


# ---------------------------------------------------------------------------
# minimax calibration of C(d)

@dataclass(frozen=True)
class CalibrationCell:
    d: float
    n: int
    c: float
    coverage: float
    mean_log_volume: float
    reps: int


def calibrate_cells(d_grid: Sequence[float], c_candidates: Sequence[float],
                    n_set: Sequence[int], reps: int, alpha: float = 0.05, seed=0,
                    cfg: SmoothingConfig | None = None, workers: int = 1) -> list[CalibrationCell]:
    """Joint coverage of the bias-corrected ellipsoid for every ``(d, n, C)`` cell.

    Within a replication the dataset and the auxiliary draw are shared by all
    candidate constants (common random numbers).
    """
    from .harness import map_ordered

    if reps < 1:
        raise InvalidInputError("reps must be >= 1")
    if not (d_grid and c_candidates and n_set):
        raise InvalidInputError("calibration inputs must be nonempty")
    cfg = cfg or SmoothingConfig()
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    tasks = []
    for i, d in enumerate(d_grid):
        for j, n in enumerate(n_set):
            for r in range(reps):
                ss = np.random.SeedSequence(root.entropy, spawn_key=root.spawn_key + (i, j, r))
                tasks.append((float(d), int(n), tuple(float(c) for c in c_candidates), alpha, cfg, ss))
    results = map_ordered(_calibration_replication, tasks, workers)
    cells = []
    k = 0
    for d in d_grid:
        for n in n_set:
            block = np.array(results[k:k + reps])  # reps x C x 2
            k += reps
            for ci, c in enumerate(c_candidates):
                cov = block[:, ci, 0]
                vol = block[:, ci, 1]
                ok = np.isfinite(vol)
                cells.append(CalibrationCell(
                    float(d), int(n), float(c),
                    float(np.nanmean(cov)) if ok.any() else float("nan"),
                    float(np.mean(vol[ok])) if ok.any() else float("nan"),
                    int(ok.sum()),
                ))
    return cells


def _calibration_replication(task):
    from .inference import infer, joint_region
    from .simulators import Arfima, ErrorProcessSpec, gen_dataset, make_rng, substreams

    d, n, cs, alpha, cfg, ss = task
    data_ss, aux_ss = substreams(ss, 2)
    sim = gen_dataset(n, ErrorProcessSpec(Arfima(d)), data_ss)
    v = cfg.density.rvs(make_rng(aux_ss), n)
    out = []
    for c in cs:
        try:
            inf = infer(sim.dataset, cfg, log_rate_bandwidth(c, n), aux=v)
            reg = joint_region(inf, alpha)
            out.append((float(reg.contains(sim.true_beta)), reg.log_volume))
        except (ArithmeticError, ValueError):
            out.append((np.nan, np.nan))
    return out


def select_from_cells(cells: Sequence[CalibrationCell], alpha: float) -> CalibrationGrid:
    """Minimax choice of ``C`` per ``d``; ties go to the smaller mean log-volume."""
    by_d: dict[float, dict[float, list[CalibrationCell]]] = {}
    for cell in cells:
        by_d.setdefault(cell.d, {}).setdefault(cell.c, []).append(cell)
    points = []
    for d in sorted(by_d):
        best = None
        for c, group in by_d[d].items():
            dev = max(abs(g.coverage - (1 - alpha)) if np.isfinite(g.coverage) else np.inf
                      for g in group)
            vol = float(np.mean([g.mean_log_volume for g in group]))
            key = (round(dev, 12), vol if np.isfinite(vol) else np.inf)
            if best is None or key < best[0]:
                best = (key, c)
        points.append((d, best[1]))
    return CalibrationGrid(tuple(points))


def calibrate_grid(d_grid: Sequence[float], c_candidates: Sequence[float],
                   n_set: Sequence[int], reps: int, alpha: float = 0.05, seed=0,
                   cfg: SmoothingConfig | None = None, workers: int = 1) -> CalibrationGrid:
    cells = calibrate_cells(d_grid, c_candidates, n_set, reps, alpha, seed, cfg, workers)
    return select_from_cells(cells, alpha)
