import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from smoothreg.cli import main
from smoothreg.pipeline import bundled_fixture
from smoothreg.simulators import DEFAULT_BETA

FIXTURE = str(bundled_fixture())


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def read_bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


@pytest.fixture(scope="module")
def noiseless_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("sim") / "noiseless.csv"
    assert main(["simulate", "--n", "2000", "--noise-scale", "0", "--seed", "0",
                 "--out", str(path)]) == 0
    return str(path)


class TestExitCodes:
    def test_no_command(self, capsys):
        assert run([], capsys)[0] == 1

    def test_bad_flag(self, capsys):
        code, _, err = run(["simulate", "--bogus"], capsys)
        assert code == 1 and "error" in err

    def test_bad_alpha(self, capsys):
        assert run(["simulate", "--alpha", "1.5"], capsys)[0] == 1

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(["infer", "--input", str(tmp_path / "none.csv")], capsys)
        assert code == 2 and "data error" in err

    def test_missing_column(self, capsys):
        code, _, err = run(["infer", "--input", FIXTURE, "--regressors", "TEMP", "NOPE"], capsys)
        assert code == 2

    def test_numeric_failure(self, capsys, tmp_path):
        # collinear regressors make the OLS design singular
        path = tmp_path / "bad.csv"
        rows = ["t,y,x1,x2,x3"] + [f"{i},{i % 7},{i % 5},{i % 5},{i % 3}" for i in range(200)]
        path.write_text("\n".join(rows) + "\n")
        code, _, err = run(["infer", "--input", str(path)], capsys)
        assert code == 3 and "numerical" in err

    def test_bad_config_key(self, capsys, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"smoothing": {"nonsense": 1}}))
        assert run(["simulate", "--config", str(cfg)], capsys)[0] == 1

    def test_good_config(self, capsys, tmp_path, noiseless_csv):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"smoothing": {"lambda_gamma": 3.0}, "hac": {"lag": 5},
                                   "test_alpha": 0.01}))
        code, out, _ = run(["infer", "--input", noiseless_csv, "--config", str(cfg),
                            "--method", "all"], capsys)
        assert code == 0
        payload = json.loads(out)
        assert payload["smoothing"]["lambda_gamma"] == 3.0
        assert payload["results"][0]["methods"][1]["details"]["lag"] == 5

    def test_pipeline_config_section(self, capsys, tmp_path):
        cfg = tmp_path / "p.json"
        cfg.write_text(json.dumps({"pipeline": {"input_path": FIXTURE, "block_length": 12,
                                                "split_points": ["2011-01-15"]}}))
        code, out, _ = run(["diagnose", "--config", str(cfg)], capsys)
        assert code == 0
        payload = json.loads(out)
        assert payload["data"]["block_length"] == 12
        assert [r["sample"] for r in payload["reports"]] == ["full", "block1", "block2"]
        assert payload["reports"][0]["n_effective"] == 180

    def test_simulated_split_must_be_index(self, capsys, noiseless_csv):
        assert run(["infer", "--input", noiseless_csv, "--split", "2011-01-01"], capsys)[0] == 1

    def test_entry_point(self, tmp_path):
        out = subprocess.run([sys.executable, "-m", "smoothreg", "simulate", "--n", "30"],
                             capture_output=True, text=True)
        assert out.returncode == 0
        assert out.stdout.splitlines()[0] == "t,y,x1,x2,x3"
        assert len(out.stdout.splitlines()) == 31


class TestSimulate:
    def test_models(self, capsys):
        for model in ("arma", "arfima", "fgm", "fgn"):
            code, out, _ = run(["simulate", "--n", "50", "--model", model, "--margin", "t5"], capsys)
            assert code == 0 and len(out.splitlines()) == 51


class TestInfer:
    def test_noiseless(self, capsys, noiseless_csv):
        code, out, _ = run(["infer", "--input", noiseless_csv], capsys)
        assert code == 0
        res = json.loads(out)["results"][0]["methods"][0]
        np.testing.assert_allclose(res["estimate"], DEFAULT_BETA, atol=1e-4)

    def test_noiseless_fixed_bandwidth(self, capsys, noiseless_csv):
        code, out, _ = run(["infer", "--input", noiseless_csv, "--bandwidth", "0.05",
                            "--method", "all"], capsys)
        assert code == 0
        methods = json.loads(out)["results"][0]["methods"]
        assert [m["method"] for m in methods] == ["proposed", "nw-hac", "mac"]
        for m in methods:
            np.testing.assert_allclose(m["estimate"], DEFAULT_BETA, atol=1e-4)

    def test_split_blocks(self, capsys):
        code, out, err = run(["infer", "--input", FIXTURE, "--split", "2011-01-15"], capsys)
        assert code == 0
        results = json.loads(out)["results"]
        assert [r["sample"] for r in results] == ["full", "block1", "block2"]
        assert results[1]["n"] + results[2]["n"] == results[0]["n"] == 360
        assert "block2" in err

    def test_table_to_stdout_with_out(self, capsys, tmp_path):
        path = tmp_path / "r.json"
        code, out, err = run(["infer", "--input", FIXTURE, "--out", str(path)], capsys)
        assert code == 0 and "full" in out and err == ""
        assert json.loads(path.read_text())["results"][0]["sample"] == "full"


class TestSweep:
    def test_row_count(self, capsys):
        code, out, _ = run(["sweep", "--axis", "arfima_d", "--values", "0.2,0.4", "--n", "300", "500",
                            "--reps", "3", "--method", "all"], capsys)
        assert code == 0
        rows = list(csv.DictReader(io.StringIO(out)))
        assert len(rows) == 2 * 2 * 3
        assert {"cov_joint", "log_vol", "wink_b0", "n_errors"} <= set(rows[0])

    def test_pairs(self, capsys):
        code, out, _ = run(["sweep", "--axis", "fgm_grid", "--values", "0.1:0.1", "--n", "300",
                            "--reps", "2", "--method", "proposed"], capsys)
        assert code == 0 and len(out.splitlines()) == 2

    def test_bad_pairs(self, capsys):
        assert run(["sweep", "--axis", "fgm_grid", "--values", "0.1", "--reps", "1"], capsys)[0] == 1


class TestCalibrate:
    def test_grid_csv(self, capsys, tmp_path):
        cells = tmp_path / "cells.csv"
        code, out, _ = run(["calibrate", "--d", "0.3", "--c", "3", "7", "--n", "250", "--reps", "3",
                            "--cells", str(cells)], capsys)
        assert code == 0
        assert out.splitlines()[0] == "d,C" and len(out.splitlines()) == 2
        assert len(cells.read_text().splitlines()) == 3

    def test_grid_feeds_infer(self, capsys, tmp_path, noiseless_csv):
        grid = tmp_path / "g.csv"
        grid.write_text("d,C\n0.1,4.0\n0.4,4.0\n")
        assert run(["infer", "--input", noiseless_csv, "--grid", str(grid)], capsys)[0] == 0


class TestDiagnose:
    def test_report(self, capsys):
        code, out, err = run(["diagnose", "--input", FIXTURE], capsys)
        assert code == 0
        rep = json.loads(out)["reports"][0]
        assert rep["n_effective"] == 360
        assert set(rep["ljung_box"]) == {"4", "12", "24"}
        assert "Ljung" in err


class TestDeterminism:
    CASES = [
        ["simulate", "--n", "300", "--model", "fgn"],
        ["infer", "--input", FIXTURE, "--split", "2011-01-15", "--method", "all"],
        ["sweep", "--axis", "fgn_h", "--values", "0.6,0.8", "--n", "300", "--reps", "6",
         "--method", "all"],
        ["calibrate", "--d", "0.3", "--c", "3", "5", "--n", "250", "--reps", "4"],
        ["diagnose", "--input", FIXTURE, "--split", "100"],
    ]

    @pytest.mark.parametrize("argv", CASES, ids=lambda a: a[0])
    def test_byte_identical_across_runs_and_workers(self, argv, tmp_path):
        outs = []
        for i, workers in enumerate((1, 1, 2)):
            path = tmp_path / f"o{i}"
            assert main([*argv, "--seed", "11", "--workers", str(workers), "--out", str(path)]) == 0
            outs.append(read_bytes(path))
        assert outs[0] == outs[1] == outs[2]

    def test_seed_changes_output(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        main(["simulate", "--n", "50", "--seed", "1", "--out", str(a)])
        main(["simulate", "--n", "50", "--seed", "2", "--out", str(b)])
        assert read_bytes(a) != read_bytes(b)


def _all_finite(obj):
    if isinstance(obj, dict):
        return all(_all_finite(v) for v in obj.values())
    if isinstance(obj, list):
        return all(_all_finite(v) for v in obj)
    if isinstance(obj, float):
        return math.isfinite(obj)
    return True


def test_pipeline_end_to_end(capsys):
    code, out, _ = run(["infer", "--input", FIXTURE, "--split", "2011-01-15", "--method", "all"],
                       capsys)
    assert code == 0
    payload = json.loads(out)
    for block in payload["results"]:
        diag = block["diagnostics"]
        assert {"n_effective", "rmse", "mae", "r2", "adj_r2", "condition_number", "ljung_box"} <= set(diag)
        for m in block["methods"]:
            assert {"estimate", "intervals", "p_values", "joint", "wald"} <= set(m)
            assert {"zero_in_region", "log_volume"} <= set(m["joint"])
            assert len(m["intervals"]) == 4 and len(m["p_values"]) == 4
        assert _all_finite(block)
