import json

import pytest

from qdbar.cli import (
    EXIT_INVALID, EXIT_NUMERICAL, EXIT_OK, EXIT_PROPERTY, EXIT_SYNTAX,
    emit_config, main, parse_config, run_experiment,
)
from qdbar.errors import ConfigInvalidError, ConfigSyntaxError

ZBAR = [{"side": "g", "n": 1, "kind": "sqrt_poly", "coeffs": [1.0]}]
F1 = [{"side": "f", "n": 1, "kind": "poly", "coeffs": [1.0]}]


def minimal_config(**extra):
    cfg = {"family": {"kind": "unilateral_example"}, "element": ZBAR,
           "experiment": "norms"}
    cfg.update(extra)
    return json.dumps(cfg)


class TestParseConfig:
    def test_defaults_filled(self):
        cfg = parse_config(minimal_config())
        assert cfg.tail_tol == 1e-5
        assert cfg.k_cap == 20_000_000
        assert cfg.data["qt_kernel"] == "corrected"
        grid = cfg.t_grid()
        assert len(grid) == 8 and grid[0] == 0.2

    def test_invalid_family(self):
        with pytest.raises(ConfigInvalidError, match="alpha > beta"):
            parse_config(json.dumps({
                "family": {"kind": "bilateral_rational", "alpha": 1, "beta": 1.5},
                "element": ZBAR, "experiment": "norms"}))

    def test_explicit_grid_sorted(self):
        cfg = parse_config(minimal_config(t_grid=[0.1, 0.5, 0.01]))
        assert cfg.t_grid() == [0.5, 0.1, 0.01]

    def test_syntax_error(self):
        with pytest.raises(ConfigSyntaxError):
            parse_config("{not json")

    def test_experiment_mismatch(self):
        with pytest.raises(ConfigInvalidError, match="does not match"):
            parse_config(minimal_config(), experiment="schur")

    def test_round_trip(self):
        cfg = parse_config(minimal_config(t_grid=[0.5, 0.1]))
        assert parse_config(emit_config(cfg)) == cfg

    def test_unknown_experiment(self):
        with pytest.raises(ConfigInvalidError):
            parse_config(minimal_config(experiment="frobnicate"))


class TestRunExperiment:
    def test_norms_report(self, tmp_path):
        cfg = parse_config(minimal_config(
            t_grid={"kind": "geometric", "head": 0.2, "ratio": 0.5, "count": 4},
            truncation={"tail_tol": 1e-4}))
        art = run_experiment(cfg, out_dir=tmp_path)
        assert art.exit_code == EXIT_OK
        lines = art.report_path.read_text().splitlines()
        assert lines[0] == "t,k_hi,quantum_norm,classical_norm,abs_error,tail_bound"
        assert len(lines) == 5
        errs = [float(line.split(",")[4]) for line in lines[1:]]
        assert errs == sorted(errs, reverse=True)
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["status"] == "ok"
        assert len(manifest["points"]) == 4
        assert manifest["points"][0]["k_hi"] == 49994

    def test_manifest_windows_match_truncation(self, tmp_path):
        from qdbar.elements import truncation_window
        from qdbar.weights import make_family
        cfg = parse_config(minimal_config(
            t_grid=[0.4, 0.2], truncation={"tail_tol": 1e-4}))
        run_experiment(cfg, out_dir=tmp_path)
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        fam = make_family("unilateral_example")
        for point in manifest["points"]:
            win = truncation_window(fam, point["t"], 1e-4)
            assert point["k_hi"] == win.k_hi and point["k_lo"] == win.k_lo

    def test_determinism(self, tmp_path):
        raw = minimal_config(
            t_grid={"kind": "geometric", "head": 0.2, "ratio": 0.5, "count": 3},
            truncation={"tail_tol": 1e-4})
        a = run_experiment(parse_config(raw), out_dir=tmp_path / "a")
        b = run_experiment(parse_config(raw), out_dir=tmp_path / "b")
        assert a.report_path.read_bytes() == b.report_path.read_bytes()

    def test_json_mirror(self, tmp_path):
        cfg = parse_config(minimal_config(t_grid=[0.3], truncation={"tail_tol": 1e-3}))
        art = run_experiment(cfg, out_dir=tmp_path, fmt="json")
        rows = json.loads(art.report_path.read_text())
        assert list(rows[0]) == ["t", "k_hi", "quantum_norm", "classical_norm",
                                 "abs_error", "tail_bound"]

    def test_check_weights_ok(self, tmp_path):
        cfg = parse_config(json.dumps({
            "family": {"kind": "unilateral_example"},
            "experiment": "check-weights",
            "t_grid": [0.5, 0.25, 0.1, 0.01],
            "weights_check": {"window": [0, 2000], "tail_index": 1000}}))
        art = run_experiment(cfg, out_dir=tmp_path)
        assert art.exit_code == EXIT_OK
        for row in art.rows:
            assert row["h1_closed_delta"] <= 1e-12
            assert row["h2_closed_delta"] <= 1e-12
            assert row["h3_closed_delta_max"] <= 1e-12

    def test_inverse_printed_expected_failure_flag(self, tmp_path):
        base = {"family": {"kind": "unilateral_example"}, "element": F1,
                "experiment": "inverse", "qt_kernel": "printed",
                "t_grid": [0.5], "truncation": {"tail_tol": 1e-4}}
        art = run_experiment(parse_config(json.dumps(
            {**base, "expect_failure": True})), out_dir=tmp_path / "flagged")
        assert art.exit_code == EXIT_OK
        assert art.rows[0]["status"] == "expected-failure"
        art2 = run_experiment(parse_config(json.dumps(base)),
                              out_dir=tmp_path / "unflagged")
        assert art2.exit_code == EXIT_PROPERTY
        assert art2.rows[0]["status"] == "violation"

    def test_numerical_failure_manifest(self, tmp_path):
        cfg = parse_config(minimal_config(
            t_grid=[0.001], truncation={"tail_tol": 1e-6, "k_cap": 1000}))
        art = run_experiment(cfg, out_dir=tmp_path)
        assert art.exit_code == EXIT_NUMERICAL
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["status"].startswith("numerical-failure")

    def test_uniform_bound(self, tmp_path):
        cfg = parse_config(json.dumps({
            "family": {"kind": "unilateral_example"},
            "element": ZBAR,
            "elements": [ZBAR, [{"side": "diag", "n": 0, "kind": "poly",
                                 "coeffs": [1.0]}]],
            "experiment": "uniform-bound",
            "t_grid": [0.5, 0.1],
            "truncation": {"tail_tol": 1e-4}}))
        art = run_experiment(cfg, out_dir=tmp_path)
        assert art.exit_code == EXIT_OK
        assert all(row["within_cap"] for row in art.rows)

    def test_schur_small(self, tmp_path):
        cfg = parse_config(json.dumps({
            "family": {"kind": "unilateral_example"},
            "element": ZBAR,
            "experiment": "schur",
            "t_grid": [0.5],
            "truncation": {"tail_tol": 1e-3},
            "schur": {"max_n": 2, "iters": 400}}))
        art = run_experiment(cfg, out_dir=tmp_path)
        assert art.exit_code == EXIT_OK
        assert all(row["ok"] for row in art.rows)

    def test_continuity(self, tmp_path):
        cfg = parse_config(json.dumps({
            "family": {"kind": "unilateral_example"}, "element": ZBAR,
            "experiment": "continuity",
            "continuity": {"t_lo": 0.2, "t_hi": 0.6, "steps": 5},
            "truncation": {"tail_tol": 1e-4}}))
        art = run_experiment(cfg, out_dir=tmp_path)
        assert art.exit_code == EXIT_OK
        assert len(art.rows) == 5


class TestMain:
    def test_cli_exit_codes(self, tmp_path, capsys):
        cfgfile = tmp_path / "run.json"
        cfgfile.write_text(minimal_config(
            t_grid=[0.3], truncation={"tail_tol": 1e-3}))
        rc = main(["norms", "--config", str(cfgfile), "--out", str(tmp_path / "o")])
        assert rc == EXIT_OK
        assert (tmp_path / "o" / "norms.csv").exists()

    def test_cli_syntax_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{oops")
        assert main(["norms", "--config", str(bad)]) == EXIT_SYNTAX

    def test_cli_invalid_config(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({
            "family": {"kind": "bilateral_rational", "alpha": 1.0, "beta": 2.0},
            "element": ZBAR}))
        assert main(["norms", "--config", str(bad)]) == EXIT_INVALID

    def test_cli_missing_config(self, tmp_path):
        assert main(["norms", "--config", str(tmp_path / "nope.json")]) == EXIT_SYNTAX
