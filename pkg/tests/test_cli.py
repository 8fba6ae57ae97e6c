import json
import subprocess
import sys

import numpy as np
import pytest

from bzscr.cli import default_config, main
from bzscr.data import cosine_divergence, load_dataset, load_samples
from bzscr.scoring import load_model
from bzscr.trainer import evaluate

SYNTH = ["--classes", "7", "--seen", "4", "--dim", "4", "--feat", "5", "--per-class", "12",
         "--noise", "0.5"]
QUICK = ["--t-es", "3", "--max-iters-outer", "6", "--solver-max-iters", "80"]


@pytest.fixture(scope="module")
def ds(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "ds"
    assert main(["synth", *SYNTH, "--seed", "3", "--out", str(out)]) == 0
    return out


def run_train(ds, out, *extra):
    return main(["train", "--data", str(ds), "--out", str(out), *QUICK, *extra])


class TestSynth:
    def test_loadable_and_valid(self, ds):
        data, E, split, D = load_dataset(ds)
        assert data.n_samples == 48 and E.class_count == 7
        assert split.seen == (1, 2, 3, 4) and split.unseen == (5, 6, 7)
        np.testing.assert_array_equal(D.matrix, cosine_divergence(E).matrix)
        test = load_samples(ds / "test", 7, allowed=split.unseen)
        assert test.n_samples == 36

    def test_same_flags_identical_files(self, ds, tmp_path):
        again = tmp_path / "again"
        assert main(["synth", *SYNTH, "--seed", "3", "--out", str(again)]) == 0
        for name in ("features.csv", "labels.csv", "embeddings.csv", "split.json", "delta.csv",
                     "header.json", "test/features.csv", "test/labels.csv"):
            assert (ds / name).read_bytes() == (again / name).read_bytes()

    def test_no_unseen_classes(self, tmp_path, capsys):
        assert main(["synth", "--classes", "15", "--seen", "15", "--out", str(tmp_path)]) != 0
        assert "n_seen" in capsys.readouterr().err


class TestTrain:
    def test_outputs_and_round_trip(self, ds, tmp_path):
        out = tmp_path / "run"
        assert run_train(ds, out) == 0
        ens = load_model(out / "model.json")
        assert ens.feature_dim == 5 and ens.embed_dim == 4
        header = (out / "trace.csv").read_text().splitlines()[0]
        assert header == "iter,objective,train_er,val_er,mean_cov,selected,violation,lambda"
        eff = json.loads((out / "effective_config.json").read_text())
        assert eff["t_es"] == 3 and eff["solver"]["max_iters"] == 80

    def test_rerun_byte_identical(self, ds, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run_train(ds, a, "--seed", "5") == 0
        assert run_train(ds, b, "--seed", "5") == 0
        for name in ("model.json", "trace.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_flag_overrides_config(self, ds, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"schema_version": 1, "beta_over_n": 0.7, "nu_over_n": 0.002,
                                   "pace": {"p0": 0.6}}))
        out = tmp_path / "run"
        assert run_train(ds, out, "--config", str(cfg), "--beta-over-n", "0") == 0
        eff = json.loads((out / "effective_config.json").read_text())
        assert eff["beta_over_n"] == 0 and eff["nu_over_n"] == 0.002
        assert eff["pace"]["p0"] == 0.6 and eff["pace"]["mode"] == default_config()["pace"]["mode"]

    @pytest.mark.parametrize("doc", [
        {"schema_version": 1, "bogus": 1},
        {"schema_version": 2},
        {"beta_over_n": 0.1},
        {"schema_version": 1, "pace": {"speed": 3}},
        {"schema_version": 1, "t_es": "ten"},
    ])
    def test_bad_config_rejected(self, ds, tmp_path, capsys, doc):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(doc))
        assert run_train(ds, tmp_path / "run", "--config", str(cfg)) == 2
        assert "config error" in capsys.readouterr().err
        assert not (tmp_path / "run" / "model.json").exists()

    def test_invalid_json_reports_location(self, ds, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text('{"schema_version": 1,\n "t_es": }')
        assert run_train(ds, tmp_path / "run", "--config", str(cfg)) == 1
        assert "row 1" in capsys.readouterr().err

    def test_out_of_range_value_rejected(self, ds, tmp_path):
        assert run_train(ds, tmp_path / "run", "--t-es", "0") == 1

    def test_strict_mode_flags_unconverged_solves(self, ds, tmp_path):
        out = tmp_path / "run"
        assert main(["train", "--data", str(ds), "--out", str(out), "--t-es", "2",
                     "--max-iters-outer", "3", "--solver-max-iters", "1", "--strict"]) == 3
        assert (out / "model.json").exists()

    def test_missing_data_dir(self, tmp_path, capsys):
        assert run_train(tmp_path / "nope", tmp_path / "run") == 1
        assert "header.json" in capsys.readouterr().err

    def test_divergence_sources(self, ds, tmp_path):
        P = np.ones((7, 7)) - np.eye(7)
        P[0, 1] = P[1, 0] = 3
        np.savetxt(tmp_path / "paths.csv", P, delimiter=",", fmt="%d")
        assert run_train(ds, tmp_path / "file", "--divergence", "file") == 0
        assert run_train(ds, tmp_path / "path", "--divergence", "path",
                         "--path-matrix", str(tmp_path / "paths.csv")) == 0
        assert run_train(ds, tmp_path / "nopath", "--divergence", "path") == 2


class TestEvalAndSweep:
    def test_eval_matches_in_process(self, ds, tmp_path):
        out = tmp_path / "run"
        assert run_train(ds, out) == 0
        assert main(["eval", "--data", str(ds), "--out", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        data, E, split, D = load_dataset(ds)
        test = load_samples(ds / "test", 7, allowed=split.unseen)
        rep = evaluate(load_model(out / "model.json"), test, E, D, split.unseen)
        assert report["error_rate"] == rep.error_rate
        assert report["mean_delta"] == rep.mean_delta
        assert set(report["per_class"]) == {"4", "5", "6"}

    def test_eval_missing_model(self, ds, tmp_path, capsys):
        assert main(["eval", "--data", str(ds), "--out", str(tmp_path),
                     "--model", str(tmp_path / "none.json")]) == 1
        assert "none.json" in capsys.readouterr().err

    def test_sweep_single_point_equals_train_eval(self, ds, tmp_path):
        out = tmp_path / "sweep"
        assert main(["sweep", "--data", str(ds), "--out", str(out), *QUICK,
                     "--beta-grid", "0"]) == 0
        lines = (out / "sweep.csv").read_text().splitlines()
        assert lines[0] == "beta_over_n,test_er,mean_delta" and len(lines) == 2
        run = tmp_path / "run"
        assert run_train(ds, run, "--beta-over-n", "0") == 0
        assert main(["eval", "--data", str(ds), "--out", str(run)]) == 0
        report = json.loads((run / "report.json").read_text())
        b, er, md = (float(v) for v in lines[1].split(","))
        assert (b, er, md) == (0.0, report["error_rate"], report["mean_delta"])

    def test_sweep_row_count(self, ds, tmp_path):
        out = tmp_path / "sweep"
        assert main(["sweep", "--data", str(ds), "--out", str(out), *QUICK,
                     "--beta-grid", "0,0.2,0.4"]) == 0
        assert len((out / "sweep.csv").read_text().splitlines()) == 4


def test_module_entry_point(ds, tmp_path):
    res = subprocess.run([sys.executable, "-m", "bzscr", "train", "--data", str(ds),
                          "--out", str(tmp_path / "run"), *QUICK],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "run" / "model.json").exists()
