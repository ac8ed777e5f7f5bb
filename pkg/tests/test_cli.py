import csv
import io
import json

import pytest

from agsynth.cli import main
from agsynth.experiment import CSV_COLUMNS, ReportRow, emit_table, rows_from_json
from agsynth.gridworld import experiment_config


def row(**kw):
    base = dict(experiment=1, grid=4, mode="ag", vars=4609, cons=4609, build_s=0.1,
                solve_s=1.0, objective=30.0, achieved_reward=30.285, sat_exact=0.81,
                sat_mc=0.8123, rel_opt_pct=97.8589, seed=0)
    base.update(kw)
    return ReportRow(**base)


class TestCompileSpec:
    @pytest.mark.parametrize("text,msg", [("F(a) & G(!b)", "3 states"), ("true", "1 state"),
                                          ("F(b) & G(!c) & (!b U a)", "4 states")])
    def test_state_counts(self, text, msg, capsys):
        assert main(["compile-spec", text]) == 0
        assert capsys.readouterr().out.strip() == msg

    def test_writes_exports(self, tmp_path, capsys):
        assert main(["compile-spec", "F(a) & G(!b)", "--out", str(tmp_path / "phi")]) == 0
        assert (tmp_path / "phi.dot").read_text().startswith("digraph")
        assert json.loads((tmp_path / "phi.json").read_text())["states"] == 3

    def test_syntax_error_exit(self, capsys):
        assert main(["compile-spec", "(a"]) == 3
        assert "error" in capsys.readouterr().err


class TestEmit:
    def test_csv_header_and_line(self):
        text = emit_table([row()], "csv")
        lines = text.splitlines()
        assert len(lines) == 2
        assert lines[0] == ",".join(CSV_COLUMNS)
        rec = next(csv.DictReader(io.StringIO(text)))
        assert rec["achieved_reward"] == "30.285" and rec["rel_opt_pct"] == "97.8589"

    def test_markdown_layout(self):
        rows = []
        for n in (4, 5, 6):
            rows += [row(grid=n, mode="monolithic", build_s=1.0, solve_s=9.0, objective=31.0),
                     row(grid=n)]
        text = emit_table(rows, "markdown")
        lines = text.splitlines()
        assert len(lines) == 2 + 3
        assert lines[0].split("|")[1:-1] == [
            " Experiment ", " Gridworld Size ", " LP Size Monolithic ", " LP Size AG ",
            " Runtime Monolithic (s) ", " Runtime AG (s) ", " Speedup ", " Reward Monolithic ",
            " Reward AG ", " Relative Optimality "]
        assert "| 9.09091x |" in lines[2]

    def test_empty_rows(self):
        with pytest.raises(ValueError):
            emit_table([], "csv")

    def test_json_round_trip(self, tmp_path, capsys):
        path = tmp_path / "rows.json"
        emit_table([row(), row(mode="monolithic")], "json", path)
        assert rows_from_json(path.read_text())[0] == row()
        assert main(["emit", str(path), "--format", "csv"]) == 0
        assert capsys.readouterr().out.startswith("experiment,grid")

    def test_timing_blanked(self):
        text = emit_table([row()], "csv", timing=False)
        rec = next(csv.DictReader(io.StringIO(text)))
        assert rec["build_s"] == "" and rec["solve_s"] == ""


class TestRun:
    def test_unsound_thresholds_exit(self, capsys):
        code = main(["run", "--mode", "ag", "--delta1", "0.5", "--delta2", "0.5", "--delta", "0.2"])
        assert code == 3
        assert "exceeds" in capsys.readouterr().err

    def test_unsupported_size(self, capsys):
        assert main(["run", "--grid", "3"]) == 3

    def test_infeasible_exit(self, tmp_path, capsys):
        # goal a is four moves away but the horizon is two steps
        cfg = {"n": 4, "p_star": [0.9, 0.8], "starts": [[0, 0], [0, 0]],
               "placements": [{"a": [3, 3], "b": [0, 2]}, {"c": [1, 0], "d": [3, 1]}],
               "horizon": 2, "delta1": 0.1, "delta2": 0.1, "delta": 0.2}
        bundle = tmp_path / "bundle.json"
        bundle.write_text(json.dumps({"experiment": 1, "config": cfg}))
        code = main(["run", "--config", str(bundle), "--episodes", "10",
                     "--out", str(tmp_path / "r.csv")])
        assert code == 2
        recs = list(csv.DictReader(open(tmp_path / "r.csv")))
        assert [r["mode"] for r in recs] == ["monolithic", "ag"]
        assert all(r["objective"] == "" for r in recs)

    def test_solver_limit_exit(self, tmp_path):
        code = main(["run", "--mode", "ag", "--method", "simplex", "--time-limit", "1e-6",
                     "--episodes", "10", "--out", str(tmp_path / "r.csv")])
        assert code == 4

    def test_byte_identical_reports(self, tmp_path):
        outs = []
        for k in range(2):
            path = tmp_path / f"r{k}.json"
            assert main(["run", "--mode", "ag", "--episodes", "200", "--seed", "5",
                         "--out", str(path)]) == 0
            recs = json.loads(path.read_text())
            for rec in recs:
                rec["build_s"] = rec["solve_s"] = None
            outs.append(json.dumps(recs))
        assert outs[0] == outs[1]

    def test_config_bundle(self, tmp_path, capsys):
        cfg = experiment_config(1, 4).config
        path = tmp_path / "bundle.json"
        path.write_text(json.dumps({"experiment": 1, "config": json.loads(cfg.to_json())}))
        assert main(["validate-config", str(path)]) == 0
        assert capsys.readouterr().out.strip() == "ok"
        bad = json.loads(path.read_text())
        bad["config"]["starts"] = [[9, 9], [0, 0]]
        path.write_text(json.dumps(bad))
        assert main(["validate-config", str(path)]) == 3
