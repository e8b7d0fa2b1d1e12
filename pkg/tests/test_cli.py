import json

import jsonschema
import numpy as np
import pytest

from xaxisreg.cli import main, parse_grid
from xaxisreg.dataset import Dataset, write_csv
from xaxisreg.exceptions import ValidationError
from xaxisreg.tuning import TUNING_RESULT_SCHEMA, TuningResult


@pytest.fixture
def sine_csv(tmp_path):
    path = tmp_path / "d.csv"
    assert main(["gen", "--fn", "sine", "--n", "100", "--seed", "7", "--noise", "0.5,1.5", "-o", str(path)]) == 0
    return path


class TestGen:
    def test_row_count_and_spec_echo(self, sine_csv, capsys):
        assert len(sine_csv.read_text().splitlines()) == 101
        main(["gen", "--fn", "sine", "--n", "5", "--seed", "7", "-o", str(sine_csv.parent / "e.csv")])
        spec = json.loads(capsys.readouterr().out)
        assert spec["n"] == 5 and spec["target_function"] == "sine" and "noise_low" in spec

    def test_deterministic(self, sine_csv, tmp_path):
        other = tmp_path / "again.csv"
        main(["gen", "--fn", "sine", "--n", "100", "--seed", "7", "--noise", "0.5,1.5", "-o", str(other)])
        assert other.read_bytes() == sine_csv.read_bytes()

    def test_spec_file_with_override(self, tmp_path):
        spec = tmp_path / "s.json"
        spec.write_text(json.dumps({"target_function": "polynomial", "coefficients": [0, 0, 1], "n": 4, "seed": 1}))
        out = tmp_path / "p.csv"
        assert main(["gen", "--spec", str(spec), "--n", "6", "--domain", "0,2", "-o", str(out)]) == 0
        assert len(out.read_text().splitlines()) == 7

    def test_noise_invariant(self, tmp_path, capsys):
        code = main(["gen", "--fn", "sine", "--n", "10", "--noise", "1.5,0.5", "-o", str(tmp_path / "x.csv")])
        assert code == 2
        assert "noise_low <= noise_high" in capsys.readouterr().err

    @pytest.mark.parametrize("argv", [
        ["gen", "--fn", "cube", "-o", "x.csv"],
        ["gen", "--fn", "sine", "--noise", "1", "-o", "x.csv"],
        ["gen", "--fn", "sine"],
        ["frobnicate"],
        [],
    ])
    def test_usage_errors(self, argv, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        assert main(argv) == 2


class TestGrid:
    def test_inclusive_decimals(self):
        g = parse_grid("0:1:11")
        assert g.tolist() == [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
        assert parse_grid("2:5:1").tolist() == [2.0]

    @pytest.mark.parametrize("text", ["0:1", "0:1:0", "a:1:3", "0:1:2.5"])
    def test_bad(self, text):
        with pytest.raises(ValidationError):
            parse_grid(text)


class TestFit:
    def test_grid_rows(self, sine_csv, tmp_path):
        out = tmp_path / "f.csv"
        assert main(["fit", "--data", str(sine_csv), "--grid", "0:1:11", "-o", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 12
        assert [float(l.split(",")[0]) for l in lines[1:]] == [i / 10 for i in range(11)]

    def test_deterministic_and_threads(self, sine_csv, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["fit", "--data", str(sine_csv), "--r", "50", "-o", str(a)])
        main(["fit", "--data", str(sine_csv), "--r", "50", "--threads", "3", "-o", str(b)])
        assert a.read_bytes() == b.read_bytes()
        assert len(a.read_text().splitlines()) == 102

    def test_r_must_exceed_one(self, sine_csv, tmp_path, capsys):
        assert main(["fit", "--data", str(sine_csv), "--kernel", "exp_base", "--r", "1.0", "-o", str(tmp_path / "f.csv")]) == 2
        assert "r" in capsys.readouterr().err

    def test_kernel_json(self, sine_csv, tmp_path):
        spec = json.dumps({"family": "inverse_power", "p": 2})
        assert main(["fit", "--data", str(sine_csv), "--kernel-json", spec, "--grid", "1:2:3", "-o", str(tmp_path / "f.csv")]) == 0

    def test_missing_file_is_runtime(self, tmp_path, capsys):
        assert main(["fit", "--data", str(tmp_path / "none.csv"), "-o", str(tmp_path / "f.csv")]) == 1
        assert "none.csv" in capsys.readouterr().err

    def test_error_policy_on_match(self, tmp_path):
        data = tmp_path / "m.csv"
        write_csv(Dataset([[0.0], [1.0]], [1.0, 2.0]), data)
        argv = ["fit", "--data", str(data), "--kernel", "inverse_power", "--grid", "0:1:3", "-o", str(tmp_path / "f.csv")]
        assert main(argv) == 0
        assert main(argv + ["--policy", "error"]) == 1

    def test_bad_threads(self, sine_csv, tmp_path):
        assert main(["fit", "--data", str(sine_csv), "--threads", "0", "-o", str(tmp_path / "f.csv")]) == 2


class TestPlotdata:
    def test_roles(self, sine_csv, tmp_path):
        out = tmp_path / "curve.csv"
        assert main(["plotdata", "--data", str(sine_csv), "--grid", "0:12:25", "--r", "20", "-o", str(out)]) == 0
        lines = (tmp_path / "curve.points.csv").read_text().splitlines()
        assert lines[0] == "x,y,role"
        roles = [l.rsplit(",", 1)[1] for l in lines[1:]]
        assert roles.count("given") == 100 and roles.count("estimate") == 25
        est = [l for l in lines[1:] if l.endswith(",estimate")]
        assert [l.split(",")[:2] for l in est] == [l.split(",")[:2] for l in out.read_text().splitlines()[1:]]


class TestTune:
    def test_constant_response_is_runtime(self, tmp_path, capsys):
        data = tmp_path / "c.csv"
        write_csv(Dataset(np.arange(10.0).reshape(-1, 1), np.full(10, 3.0)), data)
        assert main(["tune", "--data", str(data), "--mode", "variance"]) == 1
        assert "degenerate" in capsys.readouterr().err.lower()

    def test_iterate_noiseless_trace(self, tmp_path):
        data, out = tmp_path / "q.csv", tmp_path / "t.json"
        main(["gen", "--fn", "square", "--n", "200", "--domain", "1,2", "--noise", "1,1", "--seed", "0", "-o", str(data)])
        assert main(["tune", "--data", str(data), "--mode", "iterate", "-o", str(out)]) == 0
        doc = json.loads(out.read_text())
        jsonschema.validate(doc, TUNING_RESULT_SCHEMA)
        assert len(doc["rounds"]) <= 3 and doc["explained_fraction"] >= 0.97
        assert TuningResult.from_json(out.read_text()).to_dict() == doc

    @pytest.mark.parametrize("mode", ["variance", "two-param"])
    def test_schema_round_trip(self, mode, sine_csv, capsys):
        assert main(["tune", "--data", str(sine_csv), "--mode", mode]) == 0
        text = capsys.readouterr().out
        doc = json.loads(text)
        jsonschema.validate(doc, TUNING_RESULT_SCHEMA)
        assert TuningResult.from_json(text).to_json() + "\n" == text
        if mode == "two-param":
            assert doc["kernel"]["family"] == "exp_base_shifted"

    def test_deterministic(self, sine_csv, capsys):
        main(["tune", "--data", str(sine_csv)])
        first = capsys.readouterr().out
        main(["tune", "--data", str(sine_csv), "--threads", "2"])
        assert capsys.readouterr().out == first


class TestBench:
    def test_print_advantage(self, capsys):
        assert main(["bench", "--print-advantage", "0.16057744", "0.15342135612367921"]) == 0
        assert capsys.readouterr().out.strip() == "4.66433"

    def test_print_advantage_invalid(self):
        assert main(["bench", "--print-advantage", "1", "0"]) == 2

    def test_config_happy_path(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"data": {"synthetic": {"target_function": "linear", "n": 80, "seed": 2}},
                                   "lasso": {"lambda_grid": [1e-3]}}))
        assert main(["bench", str(cfg)]) == 0
        report = json.loads((tmp_path / "c.report.json").read_text())
        assert set(report["metrics"]) == {"xaxis", "lasso"}
        assert (tmp_path / "c.report.predictions.csv").exists()

    def test_missing_csv(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"data": {"csv": {"path": "gone.csv"}}}))
        assert main(["bench", str(cfg)]) == 1
        assert "gone.csv" in capsys.readouterr().err

    def test_unknown_key(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"data": {"synthetic": {}}, "colour": 1}))
        assert main(["bench", str(cfg)]) == 2

    def test_no_config(self):
        assert main(["bench"]) == 2
