import csv
import json

import numpy as np
import pytest

from fairpca.cli import main
from fairpca.data import DataSet, load_csv, standardize, synth1, write_csv
from fairpca.objective import Covariance


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def read_kv(path):
    values = {}
    for line in path.read_text().splitlines():
        key, _, value = line.partition("=")
        values[key] = value
    return values


def write_synth1_csv(path, seed=0):
    write_csv(synth1(seed), path)
    return path


def write_identical_groups_csv(path, seed=0, n=60, p=3):
    rng = np.random.default_rng(seed)
    base = rng.standard_normal((n, p)) @ np.diag([3.0, 2.0, 1.0])
    ds = DataSet(
        features=np.vstack([base, base]),
        protected=np.array([0] * n + [1] * n),
    )
    write_csv(ds, path)
    return path


class TestSynthCommand:
    def test_kind1_shape_and_determinism(self, tmp_path):
        out_a = tmp_path / "a.csv"
        out_b = tmp_path / "b.csv"
        assert main(["synth", "--kind", "1", "--seed", "7", "-o", str(out_a)]) == 0
        assert main(["synth", "--kind", "1", "--seed", "7", "-o", str(out_b)]) == 0
        assert out_a.read_bytes() == out_b.read_bytes()
        rows = read_rows(out_a)
        assert rows[0] == ["x0", "x1", "x2", "protected"]
        assert len(rows) == 301
        assert (tmp_path / "a_manifest.json").exists()

    def test_kind2_grid_violation_fails(self, tmp_path, capsys):
        code = main(["synth", "--kind", "2", "--p", "35", "--seed", "1",
                     "-o", str(tmp_path / "x.csv")])
        assert code == 1
        assert "p must be one of" in capsys.readouterr().err

    def test_kind2_writes_expected_shape(self, tmp_path):
        out = tmp_path / "s2.csv"
        code = main(["synth", "--kind", "2", "--p", "20", "--n-per-group", "25",
                     "--seed", "3", "-o", str(out)])
        assert code == 0
        rows = read_rows(out)
        assert len(rows) == 51
        assert len(rows[0]) == 21


class TestFitCommand:
    def test_identical_groups_yield_pca_subspace(self, tmp_path):
        data = write_identical_groups_csv(tmp_path / "d.csv")
        report_path = tmp_path / "rep.txt"
        code = main(["fit", "--data", str(data), "--protected", "protected",
                     "--dim", "2", "--seed", "0", "-o", str(report_path)])
        assert code == 0
        report = read_kv(report_path)
        assert report["status"] == "proper_termination"
        assert float(report["mmd2_train"]) <= 1e-10

        loadings = np.genfromtxt(tmp_path / "rep_loadings.csv", delimiter=",", skip_header=1)
        assert loadings.shape == (3, 2)
        assert np.linalg.norm(loadings.T @ loadings - np.eye(2)) <= 1e-10

        ds = standardize(load_csv(data, "protected"))
        eigvals, eigvecs = np.linalg.eigh(Covariance.from_data(ds.features).matrix)
        top = eigvecs[:, ::-1][:, :2]
        assert np.linalg.norm(top @ (top.T @ loadings) - loadings) <= 1e-6

    def test_synth1_with_feasible_tau(self, tmp_path):
        data = write_synth1_csv(tmp_path / "s1.csv", seed=1)
        report_path = tmp_path / "rep.txt"
        code = main(["fit", "--data", str(data), "--protected", "protected",
                     "--dim", "2", "--tau", "1e-3", "--seed", "0", "-o", str(report_path)])
        assert code == 0
        report = read_kv(report_path)
        assert float(report["mmd2_train"]) <= 1e-3
        assert "mmd2_test" not in report  # whole-file fit has no held-out split
        assert float(report["sigma"]) > 0.0
        manifest = json.loads((tmp_path / "rep_manifest.json").read_text())
        assert str(report_path) in manifest["output_paths"]
        assert manifest["command"] == "fit"

    def test_config_file_with_flag_override(self, tmp_path):
        data = write_synth1_csv(tmp_path / "s1.csv", seed=2)
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "# solver settings\n"
            f"data={data}\n"
            "protected=protected\n"
            "dim=2\n"
            "tau=0.5\n"
            "seed=4\n"
        )
        report_path = tmp_path / "rep.txt"
        code = main(["fit", "--config", str(cfg), "--tau", "1e-3", "-o", str(report_path)])
        assert code == 0
        manifest = json.loads((tmp_path / "rep_manifest.json").read_text())
        assert manifest["config"]["tau"] == 1e-3  # flag beats file
        assert manifest["config"]["seed"] == 4  # file beats default

    def test_unknown_config_key_fails(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("bogus=1\n")
        code = main(["fit", "--config", str(cfg), "-o", str(tmp_path / "r.txt")])
        assert code == 1
        assert "bogus" in capsys.readouterr().err

    def test_missing_required_option_fails(self, tmp_path, capsys):
        code = main(["fit", "--dim", "2", "-o", str(tmp_path / "r.txt")])
        assert code == 1
        assert "--data" in capsys.readouterr().err


@pytest.fixture(scope="module")
def compare_outputs(tmp_path_factory):
    """Run compare twice on synth1 and check byte-level determinism once."""
    tmp_path = tmp_path_factory.mktemp("cmp")
    data = write_synth1_csv(tmp_path / "s1.csv", seed=0)
    out = tmp_path / "table.csv"
    args = ["compare", "--data", str(data), "--protected", "protected",
            "--dim", "2", "--tau", "1e-5", "--splits", "10", "--seed", "0",
            "-o", str(out)]
    assert main(args) == 0
    first = {
        "summary": out.read_bytes(),
        "splits": (tmp_path / "table_splits.csv").read_bytes(),
    }
    assert main(args) == 0
    assert out.read_bytes() == first["summary"]
    assert (tmp_path / "table_splits.csv").read_bytes() == first["splits"]
    return tmp_path


class TestCompareCommand:
    def test_outputs_exist(self, compare_outputs):
        for name in ("table.csv", "table_splits.csv", "table_communalities.csv",
                     "table_manifest.json"):
            assert (compare_outputs / name).exists()

    def test_pca_has_maximal_variance_per_split(self, compare_outputs):
        rows = read_rows(compare_outputs / "table_splits.csv")
        header = rows[0]
        var_idx = header.index("explained_variance_pct")
        by_split = {}
        for row in rows[1:]:
            by_split.setdefault(row[2], {})[row[0]] = float(row[var_idx])
        for split_vars in by_split.values():
            assert split_vars["mmd-fair-pca"] <= split_vars["pca"] + 1e-8

    def test_fair_fit_reduces_test_mmd2_in_most_splits(self, compare_outputs):
        rows = read_rows(compare_outputs / "table_splits.csv")
        header = rows[0]
        idx = header.index("mmd2_test")
        pca, fair = {}, {}
        for row in rows[1:]:
            (pca if row[0] == "pca" else fair)[row[2]] = float(row[idx])
        wins = sum(1 for s in pca if fair[s] < pca[s])
        assert wins >= 9

    def test_summary_layout(self, compare_outputs):
        rows = read_rows(compare_outputs / "table.csv")
        assert rows[0][:2] == ["method", "tau"]
        assert "var_pct_mean" in rows[0] and "var_pct_std" in rows[0]
        assert rows[1][0] == "pca"
        assert rows[2][0] == "mmd-fair-pca"

    def test_communalities_file_shape(self, compare_outputs):
        rows = read_rows(compare_outputs / "table_communalities.csv")
        assert rows[0] == ["method", "tau", "split", "feature", "communality"]
        # 2 methods x 10 splits x 3 features
        assert len(rows) == 1 + 60


class TestCompareWithOutcome:
    def test_accuracy_and_dp_columns_filled(self, tmp_path):
        rng = np.random.default_rng(0)
        n = 40
        pos = rng.normal((2.0, 0.0, 0.0), 0.5, size=(n, 3))
        neg = rng.normal((-2.0, 0.0, 0.0), 0.5, size=(n, 3))
        ds = DataSet(
            features=np.vstack([pos, neg]),
            protected=rng.integers(0, 2, 2 * n),
            outcome=np.array([1] * n + [0] * n),
        )
        data = tmp_path / "d.csv"
        write_csv(ds, data)
        out = tmp_path / "cmp.csv"
        code = main(["compare", "--data", str(data), "--protected", "protected",
                     "--outcome", "outcome", "--dim", "2", "--tau", "1e-2",
                     "--splits", "2", "--seed", "1", "-o", str(out)])
        assert code == 0
        rows = read_rows(out)
        header = rows[0]
        acc_mean = rows[1][header.index("acc_pct_mean")]
        dp_mean = rows[1][header.index("delta_dp_mean")]
        assert acc_mean != "" and 0.0 <= float(acc_mean) <= 100.0
        assert dp_mean != "" and 0.0 <= float(dp_mean) <= 1.0
