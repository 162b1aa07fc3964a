import json

import pytest

from gzslkit.cli import main
from gzslkit.dataio import write_gzb
from gzslkit.synthetic import make_synthetic_dataset


@pytest.fixture()
def workspace(tmp_path):
    data_dir = tmp_path / "data"
    write_gzb(make_synthetic_dataset(n_seen=4, n_unseen=2, x_dim=8, a_dim=4,
                                     samples_per_class=20, seed=11), data_dir)
    config = {
        "seed": 3,
        "stage1": {"epochs": 3, "batch_size": 16, "learning_rate": 1e-3,
                   "latent_dim": 4, "enc_visual_hidden": 16, "enc_semantic_hidden": 12,
                   "dec_visual_hidden": 16, "dec_semantic_hidden": 8,
                   "cm_schedule": {"rate": 0.05, "start_epoch": 0, "end_epoch": 2},
                   "da_schedule": {"rate": 0.02, "start_epoch": 0, "end_epoch": 2},
                   "kl_schedule": {"rate": 0.01, "start_epoch": 0, "end_epoch": 2}},
        "generate": {"per_seen_class": 12, "per_unseen_class": 12},
        "classifier": {"epochs": 4, "batch_size": 16},
        "eval": {"mode": "ensemble", "with_ausuc": False, "n_bias": 50},
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(config))
    return data_dir, cfg_path, tmp_path


def run(args):
    return main([str(a) for a in args])


def test_run_all_produces_artifacts(workspace):
    data_dir, cfg_path, tmp_path = workspace
    out = tmp_path / "out"
    assert run(["run-all", "--config", cfg_path, "--data", data_dir, "--out", out]) == 0
    assert (out / "model" / "manifest.json").exists()
    assert (out / "stage1_log.json").exists()
    for space in ("latent", "recon_visual", "recon_semantic"):
        assert (out / "sets" / space / "manifest.json").exists()
        assert (out / "classifiers" / space / "manifest.json").exists()
    assert (out / "eval_ensemble.json").exists()
    assert (out / "run.json").exists()
    report = json.loads((out / "eval_ensemble.json").read_text())
    assert 0.0 <= report["h_mean"] <= 100.0


def test_rerun_is_byte_identical(workspace):
    data_dir, cfg_path, tmp_path = workspace
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert run(["run-all", "--config", cfg_path, "--data", data_dir, "--out", out1]) == 0
    assert run(["run-all", "--config", cfg_path, "--data", data_dir, "--out", out2]) == 0
    assert (out1 / "eval_ensemble.json").read_bytes() == (out2 / "eval_ensemble.json").read_bytes()


def test_z_only_mode_equals_zero_lambdas(workspace):
    data_dir, cfg_path, tmp_path = workspace
    out = tmp_path / "out"
    assert run(["run-all", "--config", cfg_path, "--data", data_dir, "--out", out]) == 0
    assert run(["evaluate", "--config", cfg_path, "--data", data_dir, "--out", out,
                "--mode", "z-only"]) == 0
    z_only = json.loads((out / "eval_z-only.json").read_text())
    assert run(["evaluate", "--config", cfg_path, "--data", data_dir, "--out", out,
                "--lambda-x", "0", "--lambda-a", "0"]) == 0
    zero_lambda = json.loads((out / "eval_ensemble.json").read_text())
    for key in ("seen_top1", "unseen_top1", "h_mean", "per_class"):
        assert z_only[key] == zero_lambda[key]


def test_replay_from_run_json(workspace):
    data_dir, cfg_path, tmp_path = workspace
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert run(["run-all", "--config", cfg_path, "--data", data_dir, "--out", out1]) == 0
    replay = json.loads((out1 / "run.json").read_text())
    replay["config"]["out"] = str(out2)
    replay_path = tmp_path / "replay.json"
    replay_path.write_text(json.dumps(replay))
    assert run(["run-all", "--config", replay_path]) == 0
    assert (out1 / "eval_ensemble.json").read_bytes() == (out2 / "eval_ensemble.json").read_bytes()


def test_missing_predecessor_fails_cleanly(workspace, capsys):
    data_dir, cfg_path, tmp_path = workspace
    code = run(["evaluate", "--config", cfg_path, "--data", data_dir, "--out", tmp_path / "empty"])
    assert code != 0
    assert "train" in capsys.readouterr().err


def test_bad_config_fails_cleanly(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code = run(["train", "--config", bad, "--data", tmp_path, "--out", tmp_path / "o"])
    assert code != 0


def test_missing_data_flag_fails(tmp_path):
    assert run(["train", "--out", tmp_path / "o"]) != 0


def test_ausuc_and_distmat_commands(workspace):
    data_dir, cfg_path, tmp_path = workspace
    out = tmp_path / "out"
    assert run(["run-all", "--config", cfg_path, "--data", data_dir, "--out", out]) == 0
    assert run(["ausuc", "--config", cfg_path, "--data", data_dir, "--out", out]) == 0
    payload = json.loads((out / "ausuc.json").read_text())
    assert "area" in payload["ausuc"]
    assert run(["distmat", "--config", cfg_path, "--data", data_dir, "--out", out]) == 0
    for name in ("a", "z", "x_recon", "a_recon", "x"):
        text = (out / f"distmat_{name}.csv").read_text()
        assert text.startswith("class_id,domain,")


def test_calibration_updates_tau(workspace):
    data_dir, cfg_path, tmp_path = workspace
    out = tmp_path / "out"
    assert run(["train", "--config", cfg_path, "--data", data_dir, "--out", out]) == 0
    assert run(["generate", "--config", cfg_path, "--data", data_dir, "--out", out]) == 0
    assert run(["fit-classifiers", "--config", cfg_path, "--data", data_dir, "--out", out]) == 0
    taus_before = {
        space: json.loads((out / "classifiers" / space / "manifest.json").read_text())["meta"]["tau"]
        for space in ("latent", "recon_visual", "recon_semantic")}
    assert all(t == 1.0 for t in taus_before.values())
    assert run(["calibrate", "--config", cfg_path, "--data", data_dir, "--out", out]) == 0
    taus_after = {
        space: json.loads((out / "classifiers" / space / "manifest.json").read_text())["meta"]["tau"]
        for space in ("latent", "recon_visual", "recon_semantic")}
    assert all(t > 0 for t in taus_after.values())
