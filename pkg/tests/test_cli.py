"""Batch front-end: config parsing, reports, exit codes, determinism."""

import json

import pytest

from conespectra import cli
from conespectra.errors import ConsistencyFailure, NonConvergence

Z5_CFG = {
    "curve": {"z5": {"lambda1": [0.0, 0.0], "r": 1.0}, "cone_point": 0},
    "surface_grid": [12, 16],
}


def write_cfg(tmp_path, extra, name="cfg.json"):
    cfg = dict(Z5_CFG)
    cfg.update(extra)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


@pytest.fixture(scope="module")
def basic_report(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    cfg = write_cfg(tmp, {"commands": ["periods", "cone", "smatrix"]})
    out = tmp / "report.json"
    code = cli.main(["--config", cfg, "--out", str(out)])
    return code, json.loads(out.read_text()), cfg, tmp


class TestReports:
    def test_exit_zero(self, basic_report):
        assert basic_report[0] == 0

    def test_schema_and_version(self, basic_report):
        _, rep, _, _ = basic_report
        assert rep["schema"] == "cone-spectra/1"
        assert "version" in rep and "config" in rep

    def test_periods_result(self, basic_report):
        _, rep, _, _ = basic_report
        res = rep["results"]["periods"]
        assert res["area"] > 0
        assert res["area_error_estimate"] < 1e-4
        names = {c["name"]: c["passed"] for c in res["checks"]}
        assert names["period_matrix_symmetry"]
        assert names["im_b_positive_definite"]
        assert names["area_grid_stability"]

    def test_cone_result(self, basic_report):
        _, rep, _, _ = basic_report
        res = rep["results"]["cone"]
        first = res["entries"][0]
        assert first["lambda"] == -1.0
        assert abs(first["detP_asym"] - 27 / (2 * 3.141592653589793 ** 2)) \
            < 1e-6
        assert res["checks"][0]["passed"]

    def test_smatrix_result(self, basic_report):
        _, rep, _, _ = basic_report
        res = rep["results"]["smatrix"]
        assert res["classification"] == "dimension 3 signature"
        assert all(c["passed"] for c in res["checks"])

    def test_deterministic_bytes(self, basic_report):
        _, _, cfg, tmp = basic_report
        a, b = tmp / "a.json", tmp / "b.json"
        assert cli.main(["--config", cfg, "--out", str(a)]) == 0
        assert cli.main(["--config", cfg, "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_tol_scale_applied(self, basic_report, tmp_path):
        _, _, cfg, _ = basic_report
        out = tmp_path / "scaled.json"
        assert cli.main(["--config", cfg, "--command", "cone",
                         "--out", str(out), "--tol-scale", "10"]) == 0
        rep = json.loads(out.read_text())
        assert rep["results"]["cone"]["checks"][0]["tolerance"] == 1e-9


class TestGreenCommand:
    def test_green_report(self, tmp_path):
        cfg = write_cfg(tmp_path, {
            "commands": ["green"],
            "points": [{"lam": [-0.7, 0.4], "sheet": 1},
                       {"lam": [0.9, 1.3], "sheet": 1}],
        })
        out = tmp_path / "green.json"
        assert cli.main(["--config", cfg, "--out", str(out)]) == 0
        res = json.loads(out.read_text())["results"]["green"]
        names = {c["name"]: c["passed"] for c in res["checks"]}
        assert names["symmetry"]
        assert names["coefficient_matching_xi"]
        assert names["bergman_consistency"]
        assert len(res["green_values"]) == 1

    def test_too_few_points(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, {"commands": ["green"], "points": []})
        assert cli.main(["--config", cfg]) == cli.EXIT_VALIDATION


class TestExitCodes:
    def test_duplicate_branch_points(self, tmp_path):
        cfg = tmp_path / "dup.json"
        cfg.write_text(json.dumps({
            "curve": {"branch_points": [[0, 0], [0, 0], [1, 0], [2, 0],
                                        [3, 0], [4, 0]],
                      "cone_point": 0},
            "commands": ["periods"]}))
        assert cli.main(["--config", str(cfg)]) == cli.EXIT_VALIDATION

    def test_positive_lambda(self, tmp_path):
        cfg = write_cfg(tmp_path, {"commands": ["cone"], "lambdas": [1.0]})
        assert cli.main(["--config", cfg]) == cli.EXIT_VALIDATION

    def test_missing_config(self):
        assert cli.main(["--config", "/no/such/file.json"]) \
            == cli.EXIT_VALIDATION

    def test_no_command(self, tmp_path):
        cfg = write_cfg(tmp_path, {})
        assert cli.main(["--config", cfg]) == cli.EXIT_VALIDATION

    def test_unknown_command(self, tmp_path):
        cfg = write_cfg(tmp_path, {"commands": ["frobnicate"]})
        assert cli.main(["--config", cfg]) == cli.EXIT_VALIDATION

    def test_nonconvergence_exit(self, tmp_path, monkeypatch):
        def boom(cfg, tol_scale=1.0):
            raise NonConvergence("stalled")
        monkeypatch.setitem(cli._COMMANDS, "cone", boom)
        cfg = write_cfg(tmp_path, {"commands": ["cone"]})
        assert cli.main(["--config", cfg]) == cli.EXIT_CONVERGENCE

    def test_internal_inconsistency_exit(self, tmp_path, monkeypatch):
        def boom(cfg, tol_scale=1.0):
            raise ConsistencyFailure("route mismatch")
        monkeypatch.setitem(cli._COMMANDS, "cone", boom)
        cfg = write_cfg(tmp_path, {"commands": ["cone"]})
        assert cli.main(["--config", cfg]) == cli.EXIT_INTERNAL
