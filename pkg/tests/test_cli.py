import csv
import json
import xml.etree.ElementTree as ET

import pytest

from accelpd import acceptance, cli
from accelpd.acceptance import CriterionResult
from accelpd.cli import (
    EXIT_ACCEPTANCE,
    EXIT_CONFIG,
    EXIT_INTEGRATION,
    EXIT_OK,
    EXIT_ORACLE,
    ConfigError,
    config_from_dict,
    execute,
    expand_grid,
    main,
    parse_config,
    sweep,
)
from accelpd.diagnostics import COLUMNS

QUICK = {"problem": "quadratic-easy", "params": {"alpha": 3, "theta": 0.5, "beta": 1}, "t_end": 100, "samples": 60}


@pytest.fixture(autouse=True)
def out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.ENV_OUTPUT_DIR, str(tmp_path / "out"))
    return tmp_path / "out"


def write_config(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data, indent=2))
    return path


class TestConfig:
    def test_missing_alpha_names_path_and_line(self):
        text = '{\n  "problem": "quadratic-easy",\n  "params": {\n    "theta": 0.5\n  },\n  "t_end": 10\n}'
        with pytest.raises(ConfigError) as info:
            parse_config(text)
        assert info.value.path == "params.alpha"
        assert info.value.line == 3
        assert "params.alpha" in str(info.value)

    def test_unknown_field_rejected(self):
        with pytest.raises(ConfigError, match="params.gamma"):
            config_from_dict({**QUICK, "params": {"alpha": 3, "theta": 0.5, "gamma": 1}})

    def test_unknown_catalog_name(self):
        with pytest.raises(ConfigError, match="quadratic-easy"):
            config_from_dict({**QUICK, "problem": "nope"})

    def test_bad_json_reports_line(self):
        with pytest.raises(ConfigError) as info:
            parse_config('{\n  "problem": ,\n}')
        assert info.value.line == 2

    @pytest.mark.parametrize(
        "patch, path",
        [
            ({"t_end": -1}, "t_end"),
            ({"t_end": 0.5}, "t_end"),
            ({"samples": 1}, "samples"),
            ({"integrator": {"rel_tol": 0.5}}, "integrator.rel_tol"),
            ({"params": {"alpha": 3, "theta": 0.5, "scaling": {"kind": "power"}}}, "params.scaling.r"),
            ({"params": {"alpha": 3, "theta": 0.5, "beta": -1}}, "params.beta"),
            ({"mode": "loose"}, "mode"),
            ({"problem": {"Q": [[1]], "c": [0, 0], "A": [[1]], "b": [0]}}, "problem.Q"),
        ],
    )
    def test_invalid_values(self, patch, path):
        with pytest.raises(ConfigError) as info:
            config_from_dict({**QUICK, **patch})
        assert info.value.path == path

    def test_roundtrip(self):
        data = {
            **QUICK,
            "params": {"alpha": 5, "theta": 0.3, "beta": 1, "scaling": {"kind": "power", "r": 1}},
            "mode": "scaled-strict",
            "integrator": {"rel_tol": 1e-9},
            "initial": {"x0": [1, 2, 3, 4]},
        }
        cfg = config_from_dict(data)
        again = config_from_dict(cfg.to_dict())
        assert again == cfg
        assert again.to_dict() == cfg.to_dict()


class TestRun:
    def test_quick_run(self, tmp_path, out_dir):
        path = write_config(tmp_path, QUICK, "quick.json")
        assert main(["run", str(path)]) == EXIT_OK
        with open(out_dir / "quick.csv") as fh:
            rows = list(csv.reader(fh))
        assert tuple(rows[0]) == COLUMNS
        # 60 log-spaced samples plus the T/4 and T/2 anchors
        assert len(rows) == 63
        assert {"25", "50"} <= {r[0] for r in rows[1:]}
        for cell in rows[-1]:
            assert float(cell) == float(repr(float(cell)))
        summary = json.loads((out_dir / "quick.json").read_text())
        assert summary["termination"].startswith("completed")
        assert summary["validation"]["passed"]
        assert len(summary["series"]["t"]) == 62

    def test_csv_full_precision(self, out_dir):
        execute(config_from_dict(QUICK), "prec")
        text = (out_dir / "prec.csv").read_text().splitlines()
        cell = text[5].split(",")[1]
        mantissa = cell.lstrip("-").split("e")[0].replace(".", "").lstrip("0")
        assert len(mantissa) == 17

    def test_deterministic_csv(self, out_dir):
        execute(config_from_dict(QUICK), "a")
        execute(config_from_dict(QUICK), "b")
        assert (out_dir / "a.csv").read_bytes() == (out_dir / "b.csv").read_bytes()

    def test_explicit_output_paths(self, tmp_path):
        outs = {"csv_path": str(tmp_path / "x" / "r.csv"), "json_path": str(tmp_path / "x" / "r.json"),
                "svg_paths": [str(tmp_path / "x" / "r1.svg"), str(tmp_path / "x" / "r2.svg")]}
        summary, code = execute(config_from_dict({**QUICK, "outputs": outs}))
        assert code == EXIT_OK
        for p in outs["svg_paths"]:
            ET.parse(p)
        assert summary["files"]["csv"] == outs["csv_path"]

    def test_unconstrained_o_rate(self):
        cfg = config_from_dict({"problem": "unconstrained-quad", "params": {"alpha": 5, "theta": 0.3},
                                "t_end": 1e4, "integrator": {"rel_tol": 1e-8, "abs_tol": 1e-12}})
        summary, code = execute(cfg)
        assert code == EXIT_OK
        assert summary["o_rates"]["f_gap"]["o_rate_pass"] is True

    def test_invalid_params_exit(self, tmp_path):
        path = write_config(tmp_path, {**QUICK, "params": {"alpha": 3, "theta": 0.5}, "mode": "strict"})
        assert main(["run", str(path)]) == EXIT_CONFIG

    def test_override_runs_anyway(self):
        cfg = config_from_dict({**QUICK, "params": {"alpha": 2, "theta": 0.5}, "override": True})
        summary, code = execute(cfg)
        assert code == EXIT_OK and not summary["validation"]["passed"]

    def test_missing_field_exit(self, tmp_path):
        path = write_config(tmp_path, {"problem": "quadratic-easy", "params": {"theta": 0.5}, "t_end": 10})
        assert main(["run", str(path)]) == EXIT_CONFIG

    def test_oracle_failure_exit(self, tmp_path):
        inline = {"Q": [[0]], "c": [1], "A": [[0]], "b": [0]}
        path = write_config(tmp_path, {**QUICK, "problem": inline})
        assert main(["run", str(path)]) == EXIT_ORACLE

    def test_step_limit_exit(self, tmp_path, out_dir):
        path = write_config(tmp_path, {**QUICK, "integrator": {"max_steps": 10}}, "short.json")
        assert main(["run", str(path)]) == EXIT_INTEGRATION
        summary = json.loads((out_dir / "short.json").read_text())
        assert summary["termination"].startswith("step-limit")

    def test_custom_initial_state(self):
        init = {"x0": [0, 0, 0, 0], "lambda0": [0, 0], "x_dot0": [1, 0, 0, 0], "lambda_dot0": [0, 0]}
        summary, code = execute(config_from_dict({**QUICK, "initial": init}))
        assert code == EXIT_OK
        assert summary["series"]["vel"][0] == 1.0

    def test_initial_state_dimension(self):
        summary, code = execute(config_from_dict({**QUICK, "initial": {"x0": [0, 0]}}))
        assert code == EXIT_CONFIG and "x0" in summary["error"]


class TestSweep:
    GRID = {"params.alpha": [3, 3.5, 5], "params.theta": [0.5, 0.4, 0.3]}

    def test_product_count_and_order(self):
        cfgs = expand_grid(QUICK, self.GRID)
        assert len(cfgs) == 9
        assert [(c["params"]["alpha"], c["params"]["theta"]) for c in cfgs[:4]] == [
            (3, 0.5), (3, 0.4), (3, 0.3), (3.5, 0.5)]

    def test_sweep_records_every_point(self):
        base = {**QUICK, "t_end": 20, "samples": 20}
        results = sweep(base, self.GRID)
        assert len(results) == 9
        assert [r["index"] for r in results] == list(range(9))
        # theta = 0.3 lies outside the basic region for alpha = 3 and 3.5
        failed = {r["index"] for r in results if r["exit_code"] == EXIT_CONFIG}
        assert failed == {1, 2, 5}

    def test_single_point_equals_run(self):
        one = sweep(QUICK, {"params.alpha": [5], "params.theta": [0.3]})[0]
        direct, _ = execute(config_from_dict({**QUICK, "params": {"alpha": 5, "theta": 0.3, "beta": 1}}))
        assert one["series"] == direct["series"]
        assert one["rates"] == direct["rates"]

    def test_parallel_matches_sequential(self):
        base = {**QUICK, "t_end": 30, "samples": 20}
        grid = {"params.beta": [0, 1, 2]}
        seq = sweep(base, grid, 1)
        par = sweep(base, grid, 2)
        assert [s["series"] for s in seq] == [p["series"] for p in par]

    def test_bad_grid_path(self):
        with pytest.raises(ConfigError, match="grid.params.gamma"):
            expand_grid(QUICK, {"params.gamma": [1]})

    def test_cli_sweep(self, tmp_path):
        path = write_config(tmp_path, {**QUICK, "t_end": 20})
        out = tmp_path / "sw.json"
        code = main(["sweep", str(path), "--grid", '{"params.beta": [0, 1]}', "--json", str(out)])
        assert code == EXIT_OK
        assert len(json.loads(out.read_text())) == 2

    def test_output_paths_suffixed(self, tmp_path):
        base = {**QUICK, "t_end": 20, "outputs": {"csv_path": str(tmp_path / "s.csv")}}
        sweep(base, {"params.beta": [0, 1]})
        assert (tmp_path / "s_0.csv").exists() and (tmp_path / "s_1.csv").exists()

    @pytest.mark.slow
    def test_scaling_power_sharpens_feasibility(self):
        base = {"problem": "quadratic-flat", "params": {"alpha": 5, "theta": 0.3, "beta": 1,
                "scaling": {"kind": "power", "r": 0}}, "t_end": 1000, "mode": "scaled-basic"}
        results = sweep(base, {"params.scaling.r": [0, 1, 1.3]})
        slopes = [r["rates"]["feas"]["slope"] for r in results]
        assert all(r["exit_code"] == EXIT_OK for r in results)
        assert slopes[0] > slopes[1] > slopes[2]


class TestVerify:
    def test_suites(self):
        assert acceptance.SUITES["critical"] == ("A5", "A6")
        assert len(acceptance.SUITES["all"]) >= 10
        assert set(acceptance.SUITES["all"]) == set(acceptance.CRITERIA)

    @pytest.mark.parametrize("passed, code", [(True, EXIT_OK), (False, EXIT_ACCEPTANCE)])
    def test_exit_codes(self, monkeypatch, tmp_path, passed, code):
        def fake(ids, cache=None, progress=None):
            res = [CriterionResult(i, "stub", 0.0, "== 0", passed, []) for i in ids]
            for r in res:
                progress and progress(r)
            return res

        monkeypatch.setattr(acceptance, "run_criteria", fake)
        out = tmp_path / "v.json"
        assert main(["verify", "basic", "--json", str(out)]) == code
        report = json.loads(out.read_text())
        assert report["passed"] is passed
        assert [c["id"] for c in report["criteria"]] == list(acceptance.SUITES["basic"])

    def test_real_fast_criterion(self, monkeypatch, tmp_path):
        monkeypatch.setitem(acceptance.SUITES, "basic", ("A1",))
        assert main(["verify", "basic", "--json", str(tmp_path / "v.json")]) == EXIT_OK


class TestReport:
    def test_svg_from_run(self, tmp_path, out_dir):
        execute(config_from_dict(QUICK), "rep")
        svg_dir = tmp_path / "svg"
        assert main(["report", str(out_dir / "rep.json"), "--svg", str(svg_dir)]) == EXIT_OK
        files = sorted(p.name for p in svg_dir.iterdir())
        assert files == ["rep_energy.svg", "rep_rates.svg"]
        for p in svg_dir.iterdir():
            root = ET.parse(p).getroot()
            assert root.tag.endswith("svg")

    def test_svg_from_sweep(self, tmp_path):
        path = write_config(tmp_path, {**QUICK, "t_end": 20})
        out = tmp_path / "sw.json"
        main(["sweep", str(path), "--grid", '{"params.beta": [0, 1]}', "--json", str(out)])
        svg_dir = tmp_path / "svg"
        assert main(["report", str(out), "--svg", str(svg_dir)]) == EXIT_OK
        assert len(list(svg_dir.iterdir())) == 4

    def test_missing_summary(self, tmp_path):
        assert main(["report", str(tmp_path / "none.json"), "--svg", str(tmp_path)]) == EXIT_CONFIG


def test_env_output_dir(tmp_path, monkeypatch):
    target = tmp_path / "elsewhere"
    monkeypatch.setenv(cli.ENV_OUTPUT_DIR, str(target))
    summary, _ = execute(config_from_dict(QUICK), "env")
    assert (target / "env.csv").exists() and (target / "env.json").exists()
    assert summary["files"]["csv"] == str(target / "env.csv")
