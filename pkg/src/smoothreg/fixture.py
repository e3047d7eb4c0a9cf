"""Synthetic hourly air-quality data with the column layout of the UCI PRSA file.

The bundled ``data/beijing_like.csv`` is produced by :func:`write_fixture`
with the default seed; a test regenerates it and compares bytes.
"""
from __future__ import annotations

import csv
import io

import numpy as np
import pandas as pd

from .simulators import make_rng

COLUMNS = ("No", "year", "month", "day", "hour", "pm2.5", "DEWP", "TEMP", "PRES",
           "cbwd", "Iws", "Is", "Ir")
DEFAULT_SEED = 20101115
START = "2010-11-15 00:00"
END = "2011-03-14 23:00"
WIND_DIRS = ("NW", "NE", "SE", "cv")


def _ar1(rng, n, phi, sd):
    z = rng.standard_normal(n) * sd
    out = np.empty(n)
    out[0] = z[0] / np.sqrt(1 - phi * phi)
    for t in range(1, n):
        out[t] = phi * out[t - 1] + z[t]
    return out


def make_beijing_like(seed: int = DEFAULT_SEED) -> pd.DataFrame:
    """Hourly rows from mid-November to mid-March with persistent weather and pollution."""
    rng = make_rng(seed)
    stamps = pd.date_range(START, END, freq="h")
    n = len(stamps)
    hour = stamps.hour.to_numpy()
    doy = stamps.dayofyear.to_numpy()
    season = np.cos(2 * np.pi * (doy - 15) / 365.25)

    temp = -1.0 + 8.0 * (1 - season) + 4.0 * np.sin(2 * np.pi * (hour - 9) / 24) \
        + _ar1(rng, n, 0.97, 0.8)
    pres = 1030.0 - 6.0 * (1 - season) + _ar1(rng, n, 0.99, 0.7)
    log_wind = 1.8 + _ar1(rng, n, 0.95, 0.35)
    iws = np.round(np.exp(log_wind) * (1 + 0.1 * np.abs(rng.standard_normal(n))), 2)
    dewp = np.round(temp - 12.0 + _ar1(rng, n, 0.9, 1.5))

    def z(a):
        return (a - a.mean()) / a.std()

    log_pm = (4.3 - 0.1 * z(temp) - 0.35 * z(pres) - 0.65 * z(np.log1p(iws))
              + _ar1(rng, n, 0.93, 0.3))
    pm = np.maximum(np.round(np.expm1(log_pm)), 0.0)
    pm[rng.random(n) < 0.03] = np.nan

    cbwd = np.array(WIND_DIRS)[rng.integers(0, len(WIND_DIRS), n)]
    snow = np.where(rng.random(n) < 0.01, rng.integers(1, 5, n), 0)

    return pd.DataFrame({
        "No": np.arange(1, n + 1), "year": stamps.year, "month": stamps.month,
        "day": stamps.day, "hour": hour, "pm2.5": pm, "DEWP": dewp.astype(int),
        "TEMP": np.round(temp).astype(int), "PRES": np.round(pres).astype(int),
        "cbwd": cbwd, "Iws": iws, "Is": snow, "Ir": np.zeros(n, dtype=int),
    })


def fixture_csv(seed: int = DEFAULT_SEED) -> str:
    frame = make_beijing_like(seed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in frame.itertuples(index=False):
        w.writerow(["NA" if isinstance(v, float) and np.isnan(v) else
                    (repr(float(v)) if isinstance(v, float) else v) for v in row])
    return buf.getvalue()


def write_fixture(path, seed: int = DEFAULT_SEED) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(fixture_csv(seed))
