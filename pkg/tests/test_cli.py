import json
from pathlib import Path

import numpy as np
import pytest

from udalab.cli import (ConfigError, ExperimentConfig, emit_config, main,
                        parse_config, run_bound, run_check, run_experiment,
                        run_sweep)

FAST_CONFIG = {
    "seed": 3,
    "scenario": {
        "num_common": 2, "num_source_private": 1, "num_target_private": 1,
        "samples_per_class": 20,
    },
    "train": {"max_steps": 40, "batch_size": 10, "learning_rate": 0.1},
}


def fast_config(tmp_path, **extra):
    doc = dict(FAST_CONFIG, output_dir=str(tmp_path / "out"), **extra)
    return parse_config(json.dumps(doc))


class TestParseConfig:
    def test_empty_document_gives_defaults(self):
        config = parse_config("")
        assert config.train.max_steps == 2000
        assert config.train.epsilon == 0.1
        assert config.eval_threshold == 0.5
        assert config.scenario.num_common == 4
        assert config.scenario.num_source_private == 2
        assert config.scenario.num_target_private == 3

    def test_w0_out_of_range_rejected(self):
        with pytest.raises(ConfigError):
            parse_config(json.dumps({"train": {"w0": 2}}))

    def test_round_trip_identity(self, tmp_path):
        config = fast_config(tmp_path)
        again = parse_config(emit_config(config))
        assert again == config

    def test_round_trip_default_config(self):
        config = parse_config("{}")
        assert parse_config(emit_config(config)) == config

    def test_unknown_top_level_key_named(self):
        with pytest.raises(ConfigError, match="banana"):
            parse_config(json.dumps({"banana": 1}))

    def test_unknown_section_key_named(self):
        with pytest.raises(ConfigError, match="scenario.frobnicate"):
            parse_config(json.dumps({"scenario": {"frobnicate": 2}}))

    def test_malformed_json_reports_line(self):
        with pytest.raises(ConfigError, match="line"):
            parse_config("{\n  broken\n}")

    def test_seed_inheritance(self):
        config = parse_config(json.dumps({"seed": 9}))
        assert config.scenario.seed == 9
        assert config.train.seed == 9
        explicit = parse_config(json.dumps({"seed": 9, "scenario": {"seed": 2}}))
        assert explicit.scenario.seed == 2
        assert explicit.train.seed == 9

    def test_unknown_mode_rejected(self):
        with pytest.raises(ConfigError, match="mode"):
            parse_config(json.dumps({"train": {"mode": "magic"}}))

    def test_sweep_parameter_validated(self):
        good = json.dumps({"sweep": {"parameter": "scenario.num_target_private",
                                     "values": [0, 2], "seeds": [0]}})
        assert parse_config(good).sweep.parameter == "scenario.num_target_private"
        bad = json.dumps({"sweep": {"parameter": "scenario.nope", "values": [1]}})
        with pytest.raises(ConfigError):
            parse_config(bad)


class TestRunExperiment:
    def test_writes_contract_files(self, tmp_path):
        config = fast_config(tmp_path)
        written = run_experiment(config)
        out = tmp_path / "out"
        for name in ("trace.csv", "eval_report.json", "weight_groups.csv",
                     "register.json", "bound.json"):
            assert (out / name).exists(), name
        report = json.loads((out / "eval_report.json").read_text())
        assert 0.0 <= report["averaged_accuracy"] <= 1.0
        reg = json.loads((out / "register.json").read_text())
        assert len(reg["values"]) == 3
        bound = json.loads((out / "bound.json").read_text())
        assert bound["decomposition"]["total"] >= bound["decomposition"]["complexity"]
        assert any(p.endswith(".png") for p in written)

    def test_determinism_byte_identical(self, tmp_path):
        config_a = fast_config(tmp_path / "a")
        config_b = fast_config(tmp_path / "b")
        run_experiment(config_a)
        run_experiment(config_b)
        for name in ("trace.csv", "eval_report.json", "weight_groups.csv",
                     "register.json", "bound.json", "model.json"):
            a = (tmp_path / "a" / "out" / name).read_bytes()
            b = (tmp_path / "b" / "out" / name).read_bytes()
            assert a == b, name

    def test_trace_has_one_row_per_step(self, tmp_path):
        config = fast_config(tmp_path)
        run_experiment(config)
        lines = (tmp_path / "out" / "trace.csv").read_text().strip().split("\n")
        assert len(lines) == 1 + config.train.max_steps

    def test_model_round_trip(self, tmp_path):
        from udalab.report import load_model
        from udalab.trainer import classify
        config = fast_config(tmp_path)
        run_experiment(config)
        model = load_model(tmp_path / "out" / "model.json")
        x = np.random.default_rng(0).normal(size=(5, 2))
        probs = classify(model, x)
        assert probs.shape == (5, 3)
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-12)


class TestSweep:
    def test_summary_row_per_value_seed(self, tmp_path):
        config = fast_config(tmp_path, sweep={
            "parameter": "scenario.num_target_private",
            "values": [0, 1, 2], "seeds": [0, 1]})
        run_sweep(config)
        lines = (tmp_path / "out" / "sweep_summary.csv").read_text().strip().split("\n")
        assert lines[0] == "parameter,value,seed,averaged_accuracy"
        assert len(lines) == 1 + 3 * 2

    def test_missing_sweep_section_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            run_sweep(fast_config(tmp_path))


class TestBoundCommand:
    def test_writes_decomposition_and_scans(self, tmp_path):
        config = parse_config(json.dumps({"output_dir": str(tmp_path)}))
        run_bound(config)
        payload = json.loads((tmp_path / "bound.json").read_text())
        parts = payload["decomposition"]
        assert parts["total"] == pytest.approx(
            parts["source_risk"] + parts["half_divergence"]
            + parts["complexity"] + parts["joint_risk"], abs=1e-9)
        scan = (tmp_path / "scan_target_classes.csv").read_text().strip().split("\n")
        assert scan[0] == "parameter,bound,verdict"
        assert len(scan) == 7  # header + 6 grid points


class TestMain:
    def test_run_via_main(self, tmp_path, capsys):
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps(dict(FAST_CONFIG)))
        code = main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "o")])
        assert code == 0
        assert (tmp_path / "o" / "eval_report.json").exists()

    def test_flag_overrides(self, tmp_path):
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps(dict(FAST_CONFIG)))
        code = main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "o"),
                     "--mode", "source_only", "--seed", "7", "--threshold", "0.4",
                     "--w0", "0"])
        assert code == 0
        saved = json.loads((tmp_path / "o" / "config.json").read_text())
        assert saved["train"]["mode"] == "source_only"
        assert saved["train"]["seed"] == 7
        assert saved["scenario"]["seed"] == 7
        assert saved["eval_threshold"] == 0.4
        assert saved["train"]["w0"] == 0

    def test_bad_config_nonzero_exit(self, tmp_path, capsys):
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text("{nope}")
        code = main(["run", "--config", str(cfg_path)])
        assert code == 1
        assert "error" in capsys.readouterr().err

    def test_check_passes(self, capsys):
        assert run_check(seed=0) == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "FAIL" not in out
