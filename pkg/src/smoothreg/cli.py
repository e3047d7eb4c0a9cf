"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

import numpy as np
import pandas as pd

from . import __version__
from .bandwidth import CalibrationGrid, calibrate_cells, select_bandwidth, select_from_cells
from .comparators import (HacConfig, MacConfig, comparator_result_dict, mac_cov, nw_hac_cov,
                          ols_fit)
from .errors import DataError, InvalidInputError, NumericalError
from .harness import METHODS, SWEEP_AXES, ExperimentConfig, rows_to_csv, sweep
from .inference import infer, result_dict
from .moments import RegressionDataset
from .pipeline import (PipelineConfig, diagnose, ingest_frame, split_segments)
from .simulators import (MARGINS, Arfima, Arma, ErrorProcessSpec, FgmCopula, Fgn, gen_dataset,
                         make_rng, substreams)
from .smoothing import SmoothingConfig

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _global_flags() -> argparse.ArgumentParser:
    # SUPPRESS lets the flags appear before or after the subcommand without clobbering
    p = _Parser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed (default 0)")
    g.add_argument("--alpha", type=float, default=argparse.SUPPRESS,
                   help="nominal non-coverage level (default 0.05)")
    g.add_argument("--config", default=argparse.SUPPRESS, help="JSON configuration file")
    g.add_argument("--method", choices=[*METHODS, "all"], default=argparse.SUPPRESS,
                   help="inference method (default: proposed; sweep default: all)")
    g.add_argument("--grid", default=argparse.SUPPRESS, help="calibration grid CSV (d,C)")
    g.add_argument("--out", default=argparse.SUPPRESS, help="output path (default stdout)")
    g.add_argument("--workers", type=int, default=argparse.SUPPRESS,
                   help="worker processes for Monte Carlo commands (default 1)")
    return p


GLOBAL_DEFAULTS = {"seed": 0, "alpha": 0.05, "config": None, "method": None, "grid": None,
                   "out": None, "workers": 1}


def _pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", help="input CSV")
    p.add_argument("--layout", choices=["auto", "simulated", "pipeline"], default="auto",
                   help="'simulated' reads columns y, x1.. as-is; 'auto' detects that layout")
    p.add_argument("--response")
    p.add_argument("--regressors", nargs="+")
    p.add_argument("--transform", action="append", default=[], metavar="COL=KIND")
    p.add_argument("--block-length", type=int)
    p.add_argument("--months", help="comma-separated months, or 'all'")
    p.add_argument("--split", action="append", default=[],
                   help="split point: block index or date (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    parser = _Parser(prog="smoothreg", parents=[common],
                     description="Regression inference under serial dependence by random smoothing.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    s = sub.add_parser("simulate", parents=[common], help="generate a regression dataset as CSV")
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--model", choices=["arma", "arfima", "fgm", "fgn"], default="fgm")
    s.add_argument("--phi", type=float, default=0.3)
    s.add_argument("--theta", type=float, default=0.4)
    s.add_argument("--d", type=float, default=0.35)
    s.add_argument("--lambda1", type=float, default=0.15)
    s.add_argument("--lambda2", type=float, default=0.10)
    s.add_argument("--hurst", type=float, default=0.8)
    s.add_argument("--margin", choices=MARGINS, default="gaussian")
    s.add_argument("--beta", type=float, nargs=4, metavar="B")
    s.add_argument("--noise-scale", type=float, default=1.0,
                   help="multiplies the error process; 0 gives a noiseless dataset")

    i = sub.add_parser("infer", parents=[common], help="confidence regions for one dataset")
    _pipeline_flags(i)
    i.add_argument("--bandwidth", type=float, help="fixed bandwidth instead of adaptive selection")

    w = sub.add_parser("sweep", parents=[common], help="Monte Carlo coverage along one grid axis")
    w.add_argument("--axis", choices=SWEEP_AXES, required=True)
    w.add_argument("--values", required=True,
                   help="comma-separated grid; pair axes use a:b, e.g. 0.3:0.4,0.5:0.2")
    w.add_argument("--n", type=int, nargs="+", default=[1000])
    w.add_argument("--reps", type=int, default=500)
    w.add_argument("--margin", choices=MARGINS, default="gaussian")

    c = sub.add_parser("calibrate", parents=[common], help="minimax calibration of C(d)")
    c.add_argument("--d", type=float, nargs="+", required=True)
    c.add_argument("--c", type=float, nargs="+", default=[3.0, 5.0, 7.0, 9.0, 11.0])
    c.add_argument("--n", type=int, nargs="+", default=[250, 1000])
    c.add_argument("--reps", type=int, default=300)
    c.add_argument("--cells", help="also write per-cell coverage CSV here")

    d = sub.add_parser("diagnose", parents=[common], help="OLS fit diagnostics")
    _pipeline_flags(d)
    d.add_argument("--lags", type=int, nargs="+", default=[4, 12, 24])
    return parser


# ---------------------------------------------------------------------------
# helpers

CONFIG_KEYS = {"smoothing", "hac", "mac", "pipeline", "gph_delta", "test_alpha"}


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError as exc:
        raise UsageError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    unknown = set(cfg) - CONFIG_KEYS
    if unknown:
        raise UsageError(f"unknown config keys {sorted(unknown)}")
    # fail on bad sections up front, whichever command reads them
    _smoothing(cfg)
    _section(HacConfig, cfg, "hac")
    _section(MacConfig, cfg, "mac")
    if "pipeline" in cfg:
        try:
            PipelineConfig.from_dict({"input_path": "", **cfg["pipeline"]})
        except (InvalidInputError, TypeError) as exc:
            raise UsageError(f"bad 'pipeline' section in config: {exc}") from exc
    return cfg


def _section(cls, conf: dict, key: str):
    try:
        return cls(**conf.get(key, {}))
    except (TypeError, InvalidInputError) as exc:
        raise UsageError(f"bad {key!r} section in config: {exc}") from exc


def _smoothing(conf: dict) -> SmoothingConfig:
    return _section(SmoothingConfig, conf, "smoothing")


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=True) + "\n"


def _methods(args, default) -> list[str]:
    m = args.method or default
    return list(METHODS) if m == "all" else [m]


def _pipeline_config(args, conf: dict) -> PipelineConfig:
    base = dict(conf.get("pipeline", {}))
    if args.input:
        base["input_path"] = args.input
    if "input_path" not in base:
        raise UsageError("an --input CSV (or pipeline.input_path in --config) is required")
    if args.response:
        base["response"] = args.response
    if args.regressors:
        base["regressors"] = args.regressors
    if args.transform:
        tr = dict(base.get("transforms", PipelineConfig.__dataclass_fields__["transforms"]
                           .default_factory()))
        for item in args.transform:
            col, sep, kind = item.partition("=")
            if not sep:
                raise UsageError(f"--transform expects COL=KIND, got {item!r}")
            tr[col] = kind
        base["transforms"] = tr
    if args.block_length is not None:
        base["block_length"] = args.block_length
    if args.months is not None:
        try:
            base["months"] = None if args.months == "all" else [int(m) for m in args.months.split(",")]
        except ValueError as exc:
            raise UsageError(f"cannot parse --months {args.months!r}") from exc
    if args.split:
        base["split_points"] = [int(s) if s.lstrip("-").isdigit() else s for s in args.split]
    return PipelineConfig.from_dict(base)


def _load_segments(args, conf: dict):
    """``[(label, dataset, start, end)]``: the full sample then any split blocks."""
    layout = args.layout
    if layout != "pipeline" and args.input and not args.response and "pipeline" not in conf:
        try:
            head = pd.read_csv(args.input, nrows=0)
        except FileNotFoundError as exc:
            raise DataError(f"input file not found: {args.input}") from exc
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
            raise DataError(f"cannot parse {args.input}: {exc}") from exc
        if layout == "auto":
            layout = "simulated" if {"y", "x1"} <= set(head.columns) else "pipeline"
    if layout == "simulated":
        frame = pd.read_csv(args.input)
        xcols = sorted((c for c in frame.columns if c.startswith("x") and c[1:].isdigit()),
                       key=lambda c: int(c[1:]))
        try:
            ds = RegressionDataset(pd.to_numeric(frame["y"]).to_numpy(float),
                                   frame[xcols].apply(pd.to_numeric).to_numpy(float))
        except (InvalidInputError, ValueError, KeyError) as exc:
            raise DataError(f"cannot use {args.input} as a simulated dataset: {exc}") from exc
        if args.split:
            from .pipeline import IngestResult
            res = IngestResult(ds, tuple(range(ds.n)), tuple(range(ds.n)), {})
            try:
                pts = [int(s) for s in args.split]
            except ValueError as exc:
                raise UsageError(f"simulated datasets split at row indices only: {exc}") from exc
            return [("full", ds, "0", str(ds.n - 1)), *split_segments(res, pts)], {}
        return [("full", ds, "0", str(ds.n - 1))], {}
    pcfg = _pipeline_config(args, conf)
    res = ingest_frame(pcfg)
    segs = [("full", res.dataset, str(res.block_starts[0]), str(res.block_ends[-1]))]
    if pcfg.split_points:
        segs += split_segments(res, pcfg.split_points)
    meta = {"input": str(pcfg.input_path), "response": pcfg.response,
            "regressors": list(pcfg.regressors), "block_length": pcfg.block_length,
            "months": list(pcfg.months) if pcfg.months is not None else None,
            "split_points": list(pcfg.split_points), "raw_means": res.raw_means}
    return segs, meta


def _infer_one(ds, method, args, conf, cfg, grid, seed_ss) -> dict:
    if method == "proposed":
        if args.bandwidth is not None:
            dec = args.bandwidth
        else:
            dec = select_bandwidth(ds, cfg, grid, conf.get("gph_delta", 0.5),
                                   conf.get("test_alpha", 0.05))
        inf = infer(ds, cfg, dec, rng=make_rng(seed_ss))
        out = result_dict(inf, args.alpha)
        out["bandwidth"] = inf.decision.to_dict() if inf.decision else {"h": inf.h}
        return out
    fit = ols_fit(ds)
    if method == "nw-hac":
        est = nw_hac_cov(ds, _section(HacConfig, conf, "hac"), fit)
    else:
        est = mac_cov(ds, _section(MacConfig, conf, "mac"), fit)
    return comparator_result_dict(fit, est, args.alpha)


def format_table(results: list[dict]) -> str:
    """Aligned plain-text summary of inference results."""
    lines = []
    for block in results:
        lines.append(f"[{block['sample']}] n={block['n']}  {block['start']} .. {block['end']}")
        for res in block["methods"]:
            if "error" in res:
                lines.append(f"  {res['method']}: failed ({res['error']})")
                continue
            lines.append(f"  method: {res['method']}")
            lines.append(f"    {'coef':<6}{'estimate':>12}{'lower':>12}{'upper':>12}{'p':>10}")
            for j, (est, (lo, hi), p) in enumerate(zip(res["estimate"], res["intervals"],
                                                         res["p_values"])):
                lines.append(f"    {'b' + str(j):<6}{est:>12.4f}{lo:>12.4f}{hi:>12.4f}{p:>10.4f}")
            jt = res["joint"]
            lines.append(f"    joint: log-vol={jt['log_volume']:.4f}  p={res['wald']['p']:.4g}  "
                         f"zero in region: {'yes' if jt['zero_in_region'] else 'no'}")
    return "\n".join(lines) + "\n"


def _report_text(label: str, rep: dict) -> str:
    rows = [("effective n", str(rep["n_effective"])), ("RMSE", f"{rep['rmse']:.4f}"),
            ("MAE", f"{rep['mae']:.4f}"), ("R2 / adj R2", f"{rep['r2']:.3f} / {rep['adj_r2']:.3f}"),
            ("condition number", f"{rep['condition_number']:.3f}")]
    rows += [(f"Ljung-Box p (lag {k})", f"{v['p']:.4g}") for k, v in rep["ljung_box"].items()]
    width = max(len(r[0]) for r in rows)
    return f"[{label}]\n" + "".join(f"  {a:<{width}}  {b}\n" for a, b in rows)


# ---------------------------------------------------------------------------
# commands

def cmd_simulate(args, conf) -> int:
    models = {
        "arma": lambda: Arma(args.phi, args.theta), "arfima": lambda: Arfima(args.d),
        "fgm": lambda: FgmCopula(args.lambda1, args.lambda2), "fgn": lambda: Fgn(args.hurst),
    }
    spec = ErrorProcessSpec(models[args.model](), args.margin)
    kwargs = {} if args.beta is None else {"beta": np.asarray(args.beta)}
    sim = gen_dataset(args.n, spec, args.seed, **kwargs)
    if args.noise_scale != 1.0:
        ds = sim.dataset
        signal = ds.x_tilde @ sim.true_beta
        y = signal + args.noise_scale * (np.asarray(ds.y) - signal)
        sim = replace(sim, dataset=RegressionDataset(y, np.asarray(ds.x)))
    _emit(sim.to_csv(), args.out)
    return EXIT_OK


def cmd_infer(args, conf) -> int:
    cfg = _smoothing(conf)
    grid = CalibrationGrid.from_csv(args.grid) if args.grid else CalibrationGrid.default()
    segs, meta = _load_segments(args, conf)
    methods = _methods(args, "proposed")
    results = []
    for k, (label, ds, start, end) in enumerate(segs):
        seed_ss = substreams(np.random.SeedSequence(args.seed), len(segs))[k]
        block = {"sample": label, "start": start, "end": end, "n": ds.n,
                 "diagnostics": diagnose(ds, ols_fit(ds).residuals, _lags(ds.n)).to_dict(),
                 "methods": []}
        for method in methods:
            block["methods"].append(_infer_one(ds, method, args, conf, cfg, grid, seed_ss))
        results.append(block)
    payload = {"seed": args.seed, "alpha": args.alpha, "smoothing": cfg.to_dict(),
               "data": meta, "results": results}
    _emit(_dumps(payload), args.out)
    (sys.stdout if args.out else sys.stderr).write(format_table(results))
    return EXIT_OK


def _lags(n: int) -> list[int]:
    return [k for k in (4, 12, 24) if k < n]


def _parse_values(axis: str, text: str):
    try:
        if axis in ("arma_grid", "fgm_grid"):
            return [tuple(float(v) for v in item.split(":")) for item in text.split(",")]
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"cannot parse --values {text!r}: {exc}") from exc


def cmd_sweep(args, conf) -> int:
    values = _parse_values(args.axis, args.values)
    if args.axis in ("arma_grid", "fgm_grid") and any(len(v) != 2 for v in values):
        raise UsageError(f"--values for {args.axis} needs pairs a:b")
    grid = CalibrationGrid.from_csv(args.grid) if args.grid else CalibrationGrid.default()
    exp = ExperimentConfig(
        n_set=tuple(args.n), reps=args.reps, alpha=args.alpha,
        methods=tuple(_methods(args, "all")), seed=args.seed, smoothing=_smoothing(conf),
        grid=grid, hac=_section(HacConfig, conf, "hac"), mac=_section(MacConfig, conf, "mac"),
    )
    rows = sweep(args.axis, values, exp, args.margin, args.workers)
    _emit(rows_to_csv(rows), args.out)
    return EXIT_OK


def cmd_calibrate(args, conf) -> int:
    cells = calibrate_cells(args.d, args.c, args.n, args.reps, args.alpha, args.seed,
                            _smoothing(conf), args.workers)
    grid = select_from_cells(cells, args.alpha)
    _emit(grid.to_csv(), args.out)
    if args.cells:
        rows = [{"d": c.d, "n": c.n, "C": c.c, "coverage": c.coverage,
                 "mean_log_volume": c.mean_log_volume, "reps": c.reps} for c in cells]
        rows_to_csv(rows, args.cells)
    return EXIT_OK


def cmd_diagnose(args, conf) -> int:
    segs, meta = _load_segments(args, conf)
    reports = []
    for label, ds, start, end in segs:
        fit = ols_fit(ds)
        rep = diagnose(ds, fit.residuals, args.lags).to_dict()
        reports.append({"sample": label, "start": start, "end": end,
                        "beta_ols": fit.beta_hat.tolist(), **rep})
    _emit(_dumps({"data": meta, "reports": reports}), args.out)
    text = "".join(_report_text(r["sample"], r) for r in reports)
    (sys.stdout if args.out else sys.stderr).write(text)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "infer": cmd_infer, "sweep": cmd_sweep,
            "calibrate": cmd_calibrate, "diagnose": cmd_diagnose}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        for k, v in GLOBAL_DEFAULTS.items():
            if not hasattr(args, k):
                setattr(args, k, v)
        if args.command is None:
            raise UsageError("a command is required: " + ", ".join(COMMANDS))
        if not 0 < args.alpha < 1:
            raise UsageError("--alpha must lie in (0, 1)")
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        conf = _load_config(args.config)
        return COMMANDS[args.command](args, conf)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"smoothreg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"smoothreg: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"smoothreg: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except InvalidInputError as exc:
        print(f"smoothreg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"smoothreg: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
