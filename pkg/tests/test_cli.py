"""End-to-end runs of the command line subcommands."""

import csv
import json

import numpy as np
import pytest

from heavysar.cli import main


def run(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Simulated dataset plus a disjoint sites file, shared by the tests."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data.csv"
    sites = root / "sites.csv"
    assert run("simulate", "--n", "80", "--k", "8", "--nu", "4", "--seed", "3",
               "--out", str(data)) == 0
    assert run("simulate", "--n", "12", "--k", "3", "--nu", "4", "--seed", "4",
               "--out", str(sites)) == 0
    return root


class TestSimulateAndProximity:
    def test_simulate_output_shape(self, workdir):
        rows = list(csv.DictReader(open(workdir / "data.csv")))
        assert len(rows) == 80
        assert set(rows[0]) == {"id", "lat", "lon", "y"} | {f"x{j}" for j in range(1, 8)}

    def test_proximity_roundtrip(self, workdir):
        out = workdir / "w.json"
        assert run("proximity", "--data", str(workdir / "data.csv"),
                   "--knn", "6", "--out", str(out)) == 0
        doc = json.loads(out.read_text())
        assert doc["n"] == 80
        assert doc["scheme"] == "knn:6"
        assert doc["row_standardized"] is True
        # entries are [i, j, w] with zero-based indices
        i, j, w = doc["entries"][0]
        assert i == 0 and j != 0 and w > 0

    def test_exactly_one_scheme_flag(self, workdir):
        assert run("proximity", "--data", str(workdir / "data.csv"),
                   "--out", str(workdir / "x.json")) == 1


class TestFit:
    def test_fit_writes_artifact_and_residuals(self, workdir):
        fit_path = workdir / "fit.json"
        res_path = workdir / "residuals.csv"
        code = run("fit", "--data", str(workdir / "data.csv"),
                   "--response", "y", "--covariates", "x1,x2,x3,x4,x5,x6,x7",
                   "--family", "tsar", "--sigma-eps", "local-regression",
                   "--knn", "8", "--out", str(fit_path),
                   "--residuals-csv", str(res_path))
        assert code == 0
        doc = json.loads(fit_path.read_text())
        assert doc["model"] == "tsar"
        assert len(doc["beta"]) == 8
        assert 3.0 <= doc["nu"] <= 20.0
        rows = list(csv.DictReader(open(res_path)))
        assert len(rows) == 80
        assert set(rows[0]) == {"index", "residual", "std_residual", "fitted"}

    def test_missing_column_exit_code(self, workdir):
        assert run("fit", "--data", str(workdir / "data.csv"),
                   "--response", "nope", "--knn", "8",
                   "--out", str(workdir / "bad.json")) == 1

    def test_proximity_file_reuse(self, workdir):
        fit_path = workdir / "fit_sar.json"
        code = run("fit", "--data", str(workdir / "data.csv"),
                   "--response", "y", "--covariates", "x1,x2",
                   "--family", "sar", "--proximity", str(workdir / "w.json"),
                   "--out", str(fit_path))
        assert code == 0
        assert json.loads(fit_path.read_text())["model"] == "sar"


class TestQq:
    def test_qq_from_residuals(self, workdir):
        out = workdir / "qq.csv"
        assert run("qq", "--residuals", str(workdir / "residuals.csv"),
                   "--reference", "t", "--nu", "6", "--out", str(out)) == 0
        rows = list(csv.reader(open(out)))
        assert rows[0] == ["theoretical", "empirical"]
        assert len(rows) == 81
        emp = [float(r[1]) for r in rows[1:]]
        assert emp == sorted(emp)


class TestPredict:
    def test_predictions_csv(self, workdir):
        out = workdir / "pred.csv"
        code = run("predict", "--fit", str(workdir / "fit.json"),
                   "--insample", str(workdir / "data.csv"),
                   "--sites", str(workdir / "sites.csv"),
                   "--response", "y", "--covariates", "x1,x2,x3,x4,x5,x6,x7",
                   "--scheme", "knn:8", "--alpha", "0.1", "--out", str(out))
        assert code == 0
        rows = list(csv.DictReader(open(out)))
        assert len(rows) == 12
        for row in rows:
            lo, pt, hi = float(row["lo"]), float(row["point"]), float(row["hi"])
            assert lo <= pt <= hi

    def test_original_scale_needs_transform(self, workdir):
        assert run("predict", "--fit", str(workdir / "fit.json"),
                   "--insample", str(workdir / "data.csv"),
                   "--sites", str(workdir / "sites.csv"),
                   "--response", "y", "--covariates", "x1",
                   "--scheme", "knn:8", "--original-scale",
                   "--out", str(workdir / "p2.csv")) == 1


class TestCrossval:
    def test_coverage_table(self, workdir):
        out = workdir / "cov.csv"
        code = run("crossval", "--data", str(workdir / "data.csv"),
                   "--response", "y", "--covariates", "x1,x2,x3,x4,x5,x6,x7",
                   "--scheme", "knn:8", "--family", "both", "--folds", "4",
                   "--seed", "1", "--alphas", "0.1,0.01", "--nu", "4",
                   "--out", str(out))
        assert code == 0
        rows = list(csv.DictReader(open(out)))
        assert len(rows) == 4  # two families x two levels
        for row in rows:
            assert 0.0 <= float(row["coverage"]) <= 1.0
            assert 0.0 <= float(row["p_value"]) <= 1.0


class TestSelect:
    def test_select_emits_models_and_trace(self, workdir):
        out = workdir / "selected.json"
        code = run("select", "--data", str(workdir / "data.csv"),
                   "--response", "y", "--covariates", "x1,x2,x3,x4,x5,x6,x7",
                   "--m", "1000", "--l-grid", "0.5,1", "--family", "sar+tsar",
                   "--knn", "8", "--out", str(out))
        assert code == 0
        doc = json.loads(out.read_text())
        assert set(doc) == {"sar", "tsar"}
        assert doc["sar"]["covariates"] == doc["tsar"]["covariates"]
        assert doc["sar"]["l"] == doc["tsar"]["l"]
        assert doc["tsar"]["fit"]["model"] == "tsar"
        assert len(doc["sar"]["trace"]) >= 1


class TestStudy:
    def test_study_csv(self, workdir):
        out = workdir / "study.csv"
        config = workdir / "study.json"
        config.write_text(json.dumps({
            "n": 40, "k": 4, "nu": 4.0, "lambda": 0.5,
            "replications": 2, "seed": 11,
        }))
        assert run("study", "--config", str(config), "--out", str(out)) == 0
        rows = list(csv.DictReader(open(out)))
        assert len(rows) == 6
        assert [int(r["model"]) for r in rows] == [1, 2, 3, 4, 5, 6]
        assert rows[0]["rmse_nu"] == ""
        assert float(rows[1]["rmse_nu"]) >= 0.0

    def test_unknown_config_key_rejected(self, workdir):
        config = workdir / "bad.json"
        config.write_text(json.dumps({"n": 40, "bogus": 1}))
        assert run("study", "--config", str(config),
                   "--out", str(workdir / "s.csv")) == 1


class TestDeterminism:
    def test_simulate_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            assert run("simulate", "--n", "30", "--k", "4", "--seed", "9",
                       "--out", str(out)) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_crossval_byte_identical(self, workdir, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            assert run("crossval", "--data", str(workdir / "data.csv"),
                       "--response", "y", "--covariates", "x1,x2",
                       "--scheme", "knn:8", "--family", "sar", "--folds", "4",
                       "--seed", "2", "--alphas", "0.1", "--out", str(out)) == 0
        assert a.read_bytes() == b.read_bytes()


class TestVersionAndErrors:
    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run("--version")
        assert exc.value.code == 0

    def test_missing_file_is_validation_error(self, tmp_path):
        assert run("fit", "--data", str(tmp_path / "absent.csv"),
                   "--response", "y", "--knn", "3",
                   "--out", str(tmp_path / "f.json")) == 1

    def test_numerical_failure_exit_code(self, tmp_path):
        # constant response: the local regression variance matrix degenerates
        rows = ["id,lat,lon,y"]
        rows += [f"p{i},{24 + i * 0.5},{-100 + i * 0.5},7.0" for i in range(12)]
        data = tmp_path / "flat.csv"
        data.write_text("\n".join(rows) + "\n")
        assert run("fit", "--data", str(data), "--response", "y",
                   "--sigma-eps", "local-regression", "--knn", "3",
                   "--out", str(tmp_path / "f.json")) == 2
