"""Monte Carlo coverage experiments.

Every replication draws its randomness from a seed sequence keyed by
``(spec index, n index, replication)`` under the master seed, with separate
child streams for the data and for the auxiliary smoothing sample. Results
are reduced in index order, so output does not depend on the worker count.
"""
from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bandwidth import CalibrationGrid, LONG_MEMORY, select_bandwidth
from .comparators import (HacConfig, MacConfig, comparator_regions, mac_cov, nw_hac_cov,
                          ols_fit)
from .errors import InvalidInputError
from .inference import infer, joint_region, marginal_cis
from .simulators import (DEFAULT_BETA, Arfima, Arma, ErrorProcessSpec, FgmCopula, Fgn,
                         gen_dataset, make_rng, substreams)
from .smoothing import SmoothingConfig

METHODS = ("proposed", "nw-hac", "mac")


def map_ordered(fn, tasks: list, workers: int = 1) -> list:
    """``[fn(t) for t in tasks]``, optionally across processes; order is preserved."""
    if workers <= 1 or len(tasks) < 2:
        return [fn(t) for t in tasks]
    chunk = max(1, len(tasks) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, tasks, chunksize=chunk))


def winkler_score(lo: float, hi: float, truth: float, alpha: float) -> float:
    """Interval score: width plus ``2/alpha`` times the distance by which ``truth`` is missed."""
    if lo > hi:
        raise InvalidInputError(f"lower bound {lo} exceeds upper bound {hi}")
    width = hi - lo
    if truth < lo:
        return width + (2.0 / alpha) * (lo - truth)
    if truth > hi:
        return width + (2.0 / alpha) * (truth - hi)
    return width


@dataclass(frozen=True)
class ExperimentConfig:
    n_set: tuple = (1000,)
    reps: int = 500
    alpha: float = 0.05
    methods: tuple = ("proposed",)
    spec_grid: tuple = (ErrorProcessSpec(FgmCopula(0.15, 0.10)),)
    seed: int = 0
    true_beta: tuple = DEFAULT_BETA
    smoothing: SmoothingConfig = field(default_factory=SmoothingConfig)
    grid: CalibrationGrid = field(default_factory=CalibrationGrid.default)
    gph_delta: float = 0.5
    test_alpha: float = 0.05
    hac: HacConfig = field(default_factory=HacConfig)
    mac: MacConfig = field(default_factory=MacConfig)

    def __post_init__(self):
        if self.reps < 1:
            raise InvalidInputError("reps must be >= 1")
        if not 0 < self.alpha < 1:
            raise InvalidInputError("alpha must lie in (0, 1)")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise InvalidInputError(f"unknown methods {sorted(bad)}")
        if not self.spec_grid or not self.n_set:
            raise InvalidInputError("spec_grid and n_set must be nonempty")


@dataclass(frozen=True)
class ReplicationResult:
    method: str
    joint_covered: bool
    marginal_covered: np.ndarray
    winkler: np.ndarray
    log_volume: float
    branch: str | None = None
    truncation_active: bool = False
    pivot: float = float("nan")
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _failed(method: str, m: int, exc: Exception) -> ReplicationResult:
    nan = np.full(m, np.nan)
    return ReplicationResult(method, False, nan, nan, float("nan"),
                             error=f"{type(exc).__name__}: {exc}")


def _score(method, region, intervals, beta, alpha, **extra) -> ReplicationResult:
    cov = np.array([lo <= b <= hi for (lo, hi), b in zip(intervals, beta)])
    wink = np.array([winkler_score(lo, hi, b, alpha) for (lo, hi), b in zip(intervals, beta)])
    return ReplicationResult(
        method=method, joint_covered=region.contains(beta), marginal_covered=cov,
        winkler=wink, log_volume=region.log_volume, **extra,
    )


def run_replication(spec: ErrorProcessSpec, n: int, cfg: ExperimentConfig,
                    seed) -> list[ReplicationResult]:
    """One simulated dataset, every requested method."""
    data_ss, aux_ss = substreams(seed, 2)
    beta = np.asarray(cfg.true_beta, dtype=float)
    sim = gen_dataset(n, spec, data_ss, beta)
    ds = sim.dataset
    out = []
    fit = None
    for method in cfg.methods:
        try:
            if method == "proposed":
                dec = select_bandwidth(ds, cfg.smoothing, cfg.grid, cfg.gph_delta, cfg.test_alpha)
                inf = infer(ds, cfg.smoothing, dec, rng=make_rng(aux_ss))
                region = joint_region(inf, cfg.alpha)
                out.append(_score(
                    method, region, marginal_cis(inf, cfg.alpha), beta, cfg.alpha,
                    branch=dec.branch, truncation_active=inf.truncation_active,
                    pivot=region.statistic(beta) * inf.nh,
                ))
            else:
                fit = fit or ols_fit(ds)
                est = nw_hac_cov(ds, cfg.hac, fit) if method == "nw-hac" else mac_cov(ds, cfg.mac, fit)
                region, intervals = comparator_regions(fit.beta_hat, est.cov, n, cfg.alpha)
                out.append(_score(method, region, intervals, beta, cfg.alpha,
                                  pivot=region.statistic(beta)))
        except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            out.append(_failed(method, beta.size, exc))
    return out


def _replication_task(task):
    spec, n, cfg, ss = task
    return run_replication(spec, n, cfg, ss)


def replication_seed(master, i: int, j: int, r: int) -> np.random.SeedSequence:
    root = master if isinstance(master, np.random.SeedSequence) else np.random.SeedSequence(master)
    return np.random.SeedSequence(root.entropy, spawn_key=root.spawn_key + (i, j, r))


def run_replications(cfg: ExperimentConfig, workers: int = 1) -> dict:
    """Raw per-replication results keyed by ``(spec index, n)``."""
    tasks, keys = [], []
    for i, spec in enumerate(cfg.spec_grid):
        for j, n in enumerate(cfg.n_set):
            for r in range(cfg.reps):
                tasks.append((spec, int(n), cfg, replication_seed(cfg.seed, i, j, r)))
                keys.append((i, int(n)))
    results = map_ordered(_replication_task, tasks, workers)
    grouped: dict = {}
    for key, res in zip(keys, results):
        grouped.setdefault(key, []).append(res)
    return grouped


def aggregate(spec: ErrorProcessSpec, n: int, method: str,
              reps: Sequence[ReplicationResult]) -> dict:
    """One output row: coverage in percent, mean Winkler, mean log-volume."""
    good = [r for r in reps if r.ok]
    row = {**{f"spec_{k}": v for k, v in spec.to_dict().items()}, "spec": spec.label,
           "n": n, "method": method}
    m = len(good[0].marginal_covered) if good else len(DEFAULT_BETA)
    if good:
        cov = np.mean([r.marginal_covered for r in good], axis=0) * 100.0
        wink = np.mean([r.winkler for r in good], axis=0)
        joint = 100.0 * np.mean([r.joint_covered for r in good])
        logv = float(np.mean([r.log_volume for r in good]))
        longmem = float(np.mean([r.branch == LONG_MEMORY for r in good]))
        trunc = float(np.mean([r.truncation_active for r in good]))
    else:
        cov = wink = np.full(m, np.nan)
        joint = logv = longmem = trunc = float("nan")
    for j in range(m):
        row[f"cov_b{j}"] = float(cov[j])
    for j in range(m):
        row[f"wink_b{j}"] = float(wink[j])
    row.update({"cov_joint": float(joint), "log_vol": logv,
                "branch_longmem_frac": longmem if method == "proposed" else float("nan"),
                "trunc_frac": trunc if method == "proposed" else float("nan"),
                "n_errors": len(reps) - len(good)})
    return row


def run_experiment(cfg: ExperimentConfig, workers: int = 1, raw: bool = False):
    """Aggregated rows in ``(spec, n, method)`` order; with ``raw=True`` also the replications."""
    grouped = run_replications(cfg, workers)
    rows = []
    for i, spec in enumerate(cfg.spec_grid):
        for n in cfg.n_set:
            reps = grouped[(i, int(n))]
            for k, method in enumerate(cfg.methods):
                rows.append(aggregate(spec, int(n), method, [r[k] for r in reps]))
    return (rows, grouped) if raw else rows


# ---------------------------------------------------------------------------
# sweeps

SWEEP_AXES = ("arma_grid", "fgm_grid", "arfima_d", "fgn_h")


def sweep_specs(axis: str, values, margin: str = "gaussian") -> tuple:
    """Error specifications along one sweep axis.

    ``arma_grid`` and ``fgm_grid`` take pairs; ``arfima_d`` and ``fgn_h`` take scalars.
    Inadmissible FGM pairs are skipped.
    """
    if axis not in SWEEP_AXES:
        raise InvalidInputError(f"unknown sweep axis {axis!r}")
    values = list(values)
    if not values:
        raise InvalidInputError("sweep grid is empty")
    specs = []
    for v in values:
        if axis == "arma_grid":
            specs.append(ErrorProcessSpec(Arma(*v), margin))
        elif axis == "fgm_grid":
            try:
                specs.append(ErrorProcessSpec(FgmCopula(*v), margin))
            except InvalidInputError:
                continue
        elif axis == "arfima_d":
            specs.append(ErrorProcessSpec(Arfima(float(v)), margin))
        else:
            specs.append(ErrorProcessSpec(Fgn(float(v)), margin))
    return tuple(specs)


def sweep(axis: str, values, cfg: ExperimentConfig, margin: str = "gaussian",
          workers: int = 1) -> list[dict]:
    """One aggregated row per grid point per ``n`` per method."""
    from dataclasses import replace

    specs = sweep_specs(axis, values, margin)
    return run_experiment(replace(cfg, spec_grid=specs), workers)


def rows_to_csv(rows: list[dict], path=None) -> str:
    """Serialise rows with ``repr`` floats; the header is the union of keys in first-seen order."""
    fields: list[str] = []
    for row in rows:
        for k in row:
            if k not in fields:
                fields.append(k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for row in rows:
        w.writerow([_fmt(row.get(k, "")) for k in fields])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def _fmt(v):
    if isinstance(v, float):
        return "NA" if np.isnan(v) else repr(v)
    return v
