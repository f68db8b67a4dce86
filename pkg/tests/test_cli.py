import io
import json
import subprocess
import sys

import pytest

from biphoton.cli import EXIT_COMPUTE, EXIT_USAGE, EXIT_VALIDATION, build_parser, main, make_config, read_config
from biphoton.experiments import ExperimentRecord, qfi_vs_cfi_check
from biphoton.model import BiphotonModel
from biphoton.records_io import RECORD_COLUMNS, read_csv, read_records, write_csv


def run(argv, tmp_path, fmt="csv"):
    out = tmp_path / f"out.{fmt}"
    code = main([*argv, "--out", str(out), "--format", fmt])
    return code, out.read_text(encoding="utf-8")


def records(text):
    return read_records(io.StringIO(text))


class TestExamples:
    def test_fisher(self, tmp_path):
        code, text = run(["fisher", "--sigma", "1", "--epsilon", "0.5"], tmp_path)
        assert code == 0
        meta, rows = records(text)
        values = {r.statistic: r.value for r in rows}
        assert values["fisher_continuous"] == 16.0
        assert abs(values["qfi_numeric"] - 16.0) < 1e-4 * 16
        assert meta["subcommand"] == "fisher"

    def test_probabilities(self, tmp_path):
        code, text = run(["probabilities", "--sigma", "1", "--epsilon", "1", "--d", "0"], tmp_path)
        assert code == 0
        values = {r.statistic: r.value for r in records(text)[1]}
        assert values["split_exact:P[-2]"] == pytest.approx(0.25, abs=1e-14)
        assert values["split_exact:P[0]"] == pytest.approx(0.5, abs=1e-14)
        assert values["split_exact:P[+2]"] == pytest.approx(0.25, abs=1e-14)

    def test_crossover(self, tmp_path):
        code, text = run(["crossover", "--sigma", "1", "--epsilon", "0", "--d", "0.01", "--snr", "1"], tmp_path)
        assert code == 0
        meta, rows = records(text)
        assert [r.value for r in rows] == [63.0]
        assert "0.01 curve" in meta["note"]

    def test_pixel_probabilities(self, tmp_path):
        code, text = run(["probabilities", "--epsilon", "0.5", "--d", "0.05", "--pixels", "4"], tmp_path)
        assert code == 0
        rows = records(text)[1]
        pix = [r.value for r in rows if r.statistic.startswith("pixels4:P[")]
        assert sum(pix) == pytest.approx(1.0, abs=1e-9)


class TestStochastic:
    def test_seed_required(self, capsys):
        assert main(["sample", "--nu", "5"]) == EXIT_VALIDATION
        assert "--seed" in capsys.readouterr().err

    def test_sample_columns(self, tmp_path):
        code, text = run(["sample", "--nu", "4", "--seed", "3"], tmp_path)
        assert code == 0
        _, rows = read_csv(io.StringIO(text))
        assert list(rows[0]) == ["index", "x1", "x2"]
        assert len(rows) == 4

    def test_same_seed_same_bytes(self, tmp_path):
        argv = ["random-walk", "--epsilon", "0.5", "--nu", "300", "--seed", "12"]
        _, a = run(argv, tmp_path)
        _, b = run(argv, tmp_path)
        assert a == b

    def test_random_walk_metadata_records_default_d(self, tmp_path):
        _, text = run(["random-walk", "--epsilon", "1", "--nu", "50", "--seed", "1"], tmp_path)
        meta, rows = records(text)
        assert "d_default" in meta
        assert {r.d for r in rows} == {0.1}

    def test_scaling_workers_invariant(self, tmp_path):
        argv = ["scaling", "--epsilon", "0.1", "--nu", "10,100", "--replications", "60", "--seed", "2"]
        _, a = run([*argv, "--workers", "1"], tmp_path)
        _, b = run([*argv, "--workers", "4"], tmp_path)
        strip = lambda t: [line for line in t.splitlines() if not line.startswith("# workers")]
        assert strip(a) == strip(b)

    def test_appendix_a(self, tmp_path):
        code, text = run(["appendix-a", "--nu", "200", "--replications", "200", "--seed", "5"], tmp_path)
        assert code == 0
        stats = {r.statistic for r in records(text)[1]}
        assert {"cov_empirical", "cov_predicted", "argmin_w1"} <= stats


class TestErrors:
    def test_bad_flag(self, capsys):
        assert main(["fisher", "--bogus", "1"]) == EXIT_USAGE

    def test_missing_subcommand(self):
        assert main([]) == EXIT_USAGE

    def test_invalid_parameter(self, capsys):
        assert main(["fisher", "--epsilon", "-1"]) == EXIT_VALIDATION
        assert "epsilon" in capsys.readouterr().err

    def test_bad_format(self):
        assert main(["fisher", "--format", "xml"]) == EXIT_USAGE

    def test_non_convergence(self, capsys):
        code = main(["fisher", "--epsilon", "0.3", "--d", "0.2", "--pixels", "50",
                     "--max-subdivisions", "1", "--rel-tol", "1e-15", "--abs-tol", "1e-300"])
        assert code == EXIT_COMPUTE
        assert "computation failed" in capsys.readouterr().err

    def test_unparseable_list(self):
        assert main(["crossover", "--d", "0.1,abc"]) == EXIT_VALIDATION


class TestConfig:
    def test_file_values_and_override(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# demo\nsigma = 2\nepsilon = 0.5  # trailing comment\nd = 0.1\n", encoding="utf-8")
        config = make_config(["fisher", "--config", str(cfg), "--epsilon", "0.25"])
        assert config.params["sigma"] == 2.0
        assert config.params["epsilon"] == "0.25"
        assert config.params["d"] == "0.1"

    def test_effective_config_echoed(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("epsilon = 0.5\nrel-tol = 1e-9\n", encoding="utf-8")
        code, text = run(["fisher", "--config", str(cfg)], tmp_path)
        meta, _ = records(text)
        assert meta["epsilon"] == "0.5" and meta["rel-tol"] == "1e-09"

    def test_unknown_key(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("colour = blue\n", encoding="utf-8")
        assert main(["fisher", "--config", str(cfg)]) == EXIT_USAGE

    def test_underscore_keys_accepted(self, tmp_path):
        cfg = tmp_path / "u.cfg"
        cfg.write_text("max_subdivisions = 50\n", encoding="utf-8")
        assert read_config(str(cfg)) == {"max-subdivisions": 50}


class TestOutput:
    def test_csv_round_trip(self):
        rows = qfi_vs_cfi_check([BiphotonModel(1.0, 0.3, 0.1), BiphotonModel(2.0, 0.7, 0.0)])
        buf = io.StringIO()
        write_csv(buf, RECORD_COLUMNS, [r.as_dict() for r in rows], {"k": "v"})
        meta, back = read_records(io.StringIO(buf.getvalue()))
        assert meta == {"k": "v"}
        assert back == rows  # bit-identical floats

    def test_round_trip_awkward_floats(self):
        rec = ExperimentRecord("x", 0.1 + 0.2, 1e-300, -0.0, None, None, None, "s", 1 / 3, 5e-324)
        buf = io.StringIO()
        write_csv(buf, RECORD_COLUMNS, [rec.as_dict()])
        assert read_records(io.StringIO(buf.getvalue()))[1] == [rec]

    def test_jsonl(self, tmp_path):
        code, text = run(["fisher", "--epsilon", "0.5"], tmp_path, fmt="jsonl")
        lines = [json.loads(line) for line in text.splitlines()]
        assert "metadata" in lines[0]
        assert set(lines[1]) == set(RECORD_COLUMNS)

    def test_help_documents_columns(self):
        sub = build_parser()._subparsers._group_actions[0].choices["scaling"]
        assert "columns:" in sub.format_help()

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "biphoton", "fisher", "--epsilon", "1"],
                              capture_output=True, text=True, check=True)
        assert "fisher_continuous,4.0" in proc.stdout
