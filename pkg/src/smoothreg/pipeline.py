"""Ingestion and residual diagnostics for observational regression data.

The ingestion path is: read CSV, keep the configured months, average
consecutive blocks of rows, transform columns, then assemble a
:class:`RegressionDataset`. Within a block each column is averaged over its
available (non-missing) values; a block with no observations left for some
column is dropped.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DataError, InvalidInputError
from .moments import RegressionDataset
from .quantiles import chi2_sf

TRANSFORMS = ("none", "log1p", "standardize", "log1p_then_standardize")
TIME_COLUMNS = ("year", "month", "day", "hour")
WINTER = (12, 1, 2)


@dataclass(frozen=True)
class PipelineConfig:
    """What to read and how to preprocess it.

    ``split_points`` entries are either integer block indices or date strings
    (``YYYY-MM-DD`` or ``YYYY-MM-DD HH:MM``); a date splits before the first
    block starting at or after it.
    """

    input_path: str
    response: str = "pm2.5"
    regressors: tuple = ("TEMP", "PRES", "Iws")
    transforms: dict = field(default_factory=lambda: {
        "pm2.5": "log1p", "TEMP": "standardize", "PRES": "standardize",
        "Iws": "log1p_then_standardize",
    })
    block_length: int | None = 6
    months: tuple | None = WINTER
    split_points: tuple = ()

    def __post_init__(self):
        if self.block_length is not None and self.block_length < 1:
            raise InvalidInputError("block_length must be >= 1")
        for col, t in self.transforms.items():
            if t not in TRANSFORMS:
                raise InvalidInputError(f"unknown transform {t!r} for column {col!r}")
        if not self.regressors:
            raise InvalidInputError("at least one regressor column is required")

    @property
    def columns(self) -> list[str]:
        return [self.response, *self.regressors]

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = dict(d)
        for key in ("regressors", "split_points"):
            if key in d and d[key] is not None:
                d[key] = tuple(d[key])
        if d.get("months") is not None:
            d["months"] = tuple(int(m) for m in d["months"])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidInputError(f"unknown pipeline keys {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class IngestResult:
    dataset: RegressionDataset
    block_starts: tuple  # timestamp label of each block's first row, or its row index
    block_ends: tuple
    raw_means: dict  # per-column mean of block averages before transforms


def _timestamps(frame: pd.DataFrame) -> pd.Series | None:
    if not all(c in frame.columns for c in TIME_COLUMNS):
        return None
    parts = frame[list(TIME_COLUMNS)]
    if parts.isna().any().any():
        raise DataError("missing values in time columns")
    return pd.to_datetime(parts.astype(int), errors="raise")


def _read(path) -> pd.DataFrame:
    try:
        return pd.read_csv(path, sep=",", encoding="utf-8")
    except FileNotFoundError as exc:
        raise DataError(f"input file not found: {path}") from exc
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot parse {path}: {exc}") from exc


def _numeric(frame: pd.DataFrame, cols: list[str]) -> np.ndarray:
    out = np.empty((len(frame), len(cols)))
    for j, c in enumerate(cols):
        try:
            out[:, j] = pd.to_numeric(frame[c], errors="raise").to_numpy(dtype=float)
        except (ValueError, TypeError) as exc:
            raise DataError(f"column {c!r} has unparseable numeric values: {exc}") from exc
    return out


def block_average(values: np.ndarray, block_length: int) -> tuple[np.ndarray, np.ndarray]:
    """Available-case means over consecutive blocks; the trailing partial block is kept.

    Returns the block means and the index of each block's first row. Blocks
    where any column has no observed value are dropped.
    """
    n = values.shape[0]
    if n == 0:
        return values, np.arange(0)
    starts = np.arange(0, n, block_length)
    sums = np.add.reduceat(np.where(np.isfinite(values), values, 0.0), starts, axis=0)
    counts = np.add.reduceat(np.isfinite(values).astype(float), starts, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = sums / counts
    keep = np.all(counts > 0, axis=1)
    return means[keep], starts[keep]


def apply_transform(x: np.ndarray, kind: str, name: str = "column") -> np.ndarray:
    if kind in ("log1p", "log1p_then_standardize"):
        if np.any(x <= -1.0):
            raise DataError(f"log1p undefined for values <= -1 in {name!r}")
        x = np.log1p(x)
    if kind in ("standardize", "log1p_then_standardize"):
        sd = x.std(ddof=1) if x.size > 1 else 0.0
        if not sd > 0:
            raise DataError(f"column {name!r} has zero variance and cannot be standardized")
        x = (x - x.mean()) / sd
    return x


def ingest_frame(cfg: PipelineConfig, frame: pd.DataFrame | None = None) -> IngestResult:
    frame = _read(cfg.input_path) if frame is None else frame
    missing = [c for c in cfg.columns if c not in frame.columns]
    if missing:
        raise DataError(f"missing columns {missing}; available: {list(frame.columns)}")
    if cfg.months is not None:
        if "month" not in frame.columns:
            raise DataError("month filter requested but there is no 'month' column")
        frame = frame[frame["month"].isin(cfg.months)]
    frame = frame.reset_index(drop=True)
    stamps = _timestamps(frame)
    values = _numeric(frame, cfg.columns)
    block = cfg.block_length or 1
    means, starts = block_average(values, block)
    if means.shape[0] == 0:
        raise DataError("no complete observations left after filtering and block averaging")
    ends = np.minimum(starts + block, len(frame)) - 1
    raw_means = {c: float(means[:, j].mean()) for j, c in enumerate(cfg.columns)}
    cols = [apply_transform(means[:, j], cfg.transforms.get(c, "none"), c)
            for j, c in enumerate(cfg.columns)]
    if stamps is not None:
        labels_s = tuple(stamps.iloc[starts].dt.strftime("%Y-%m-%d %H:%M"))
        labels_e = tuple(stamps.iloc[ends].dt.strftime("%Y-%m-%d %H:%M"))
    else:
        labels_s, labels_e = tuple(int(s) for s in starts), tuple(int(e) for e in ends)
    try:
        ds = RegressionDataset(cols[0], np.column_stack(cols[1:]))
    except InvalidInputError as exc:
        raise DataError(f"ingested data unusable: {exc}") from exc
    return IngestResult(ds, labels_s, labels_e, raw_means)


def ingest(cfg: PipelineConfig) -> RegressionDataset:
    return ingest_frame(cfg).dataset


def split_indices(result: IngestResult, split_points) -> list[int]:
    """Block indices where each new segment starts."""
    n = result.dataset.n
    out = []
    for sp in split_points:
        if isinstance(sp, (int, np.integer)) and not isinstance(sp, bool):
            k = int(sp)
        else:
            if not isinstance(result.block_starts[0], str):
                raise InvalidInputError("date split points need year/month/day/hour columns")
            target = pd.Timestamp(str(sp))
            starts = pd.to_datetime(list(result.block_starts))
            after = np.flatnonzero(starts >= target)
            k = int(after[0]) if after.size else n
        if not 0 < k < n:
            raise InvalidInputError(f"split point {sp!r} does not fall strictly inside the sample")
        out.append(k)
    if out != sorted(set(out)):
        raise InvalidInputError("split points must be strictly increasing")
    return out


def split_segments(result: IngestResult, split_points) -> list[tuple[str, RegressionDataset, str, str]]:
    """``[(label, dataset, first block start, last block end), ...]`` for each segment."""
    cuts = [0, *split_indices(result, split_points), result.dataset.n]
    y, x = np.asarray(result.dataset.y), np.asarray(result.dataset.x)
    segs = []
    for i, (a, b) in enumerate(zip(cuts[:-1], cuts[1:])):
        try:
            ds = RegressionDataset(y[a:b], x[a:b])
        except InvalidInputError as exc:
            raise DataError(f"segment {i + 1} unusable: {exc}") from exc
        segs.append((f"block{i + 1}", ds, str(result.block_starts[a]), str(result.block_ends[b - 1])))
    return segs


# ---------------------------------------------------------------------------
# diagnostics

@dataclass(frozen=True)
class DiagnosticsReport:
    n_effective: int
    rmse: float
    mae: float
    r2: float
    adj_r2: float
    condition_number: float
    ljung_box: dict  # lag -> (Q, p)

    def to_dict(self) -> dict:
        return {
            "n_effective": self.n_effective, "rmse": self.rmse, "mae": self.mae,
            "r2": self.r2, "adj_r2": self.adj_r2, "condition_number": self.condition_number,
            "ljung_box": {str(k): {"stat": q, "p": p} for k, (q, p) in self.ljung_box.items()},
        }


def autocorrelations(e: np.ndarray, max_lag: int) -> np.ndarray:
    """Sample autocorrelations at lags ``1..max_lag`` around the sample mean."""
    e = np.asarray(e, dtype=float) - np.mean(e)
    denom = e @ e
    if denom == 0:
        return np.zeros(max_lag)
    return np.array([e[k:] @ e[:-k] for k in range(1, max_lag + 1)]) / denom


def ljung_box(e, lag: int) -> tuple[float, float]:
    """``Q = n(n+2) sum_{k<=lag} rho_k^2/(n-k)`` and its chi-square(lag) upper tail."""
    e = np.asarray(e, dtype=float)
    n = e.size
    if n <= lag:
        raise InvalidInputError(f"need n > lag, got n={n}, lag={lag}")
    rho = autocorrelations(e, lag)
    k = np.arange(1, lag + 1)
    q = float(n * (n + 2) * np.sum(rho ** 2 / (n - k)))
    return q, float(chi2_sf(q, lag))


def condition_number(x_tilde: np.ndarray) -> float:
    s = np.linalg.svd(x_tilde, compute_uv=False)
    return float(s[0] / s[-1]) if s[-1] > 0 else float("inf")


def diagnose(dataset: RegressionDataset, residuals, lags=(4, 12, 24)) -> DiagnosticsReport:
    e = np.asarray(residuals, dtype=float)
    n = dataset.n
    if e.shape != (n,):
        raise InvalidInputError(f"residuals must have length {n}")
    lags = [int(k) for k in lags]
    if lags and n <= max(lags):
        raise InvalidInputError(f"need n > max lag, got n={n}, max lag={max(lags)}")
    y = np.asarray(dataset.y)
    k = dataset.p + 1
    sse = float(e @ e)
    sst = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if sse == 0 else (1.0 - sse / sst if sst > 0 else 0.0)
    # clipped so non-OLS residuals still give a reportable value
    r2 = min(max(r2, 0.0), 1.0)
    adj = 1.0 - (1.0 - r2) * (n - 1) / (n - k)
    return DiagnosticsReport(
        n_effective=n,
        rmse=float(np.sqrt(sse / n)),
        mae=float(np.mean(np.abs(e))),
        r2=r2,
        adj_r2=float(adj),
        condition_number=condition_number(dataset.x_tilde),
        ljung_box={lag: ljung_box(e, lag) for lag in lags},
    )


def bundled_fixture() -> Path:
    """Path of the synthetic hourly air-quality fixture shipped with the package."""
    return Path(__file__).with_name("data") / "beijing_like.csv"
