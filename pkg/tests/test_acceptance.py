"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines. Criterion 7 needs converted benchmark data and is skipped unless
GZSL_BENCHMARK_DIR points at a directory containing an `awa2` GZB dataset.
"""

import json
import os
import time
from pathlib import Path

import numpy as np
import pytest

from gzslkit import autodiff as ad
from gzslkit.cli import main as cli_main
from gzslkit.dataio import load_gzb, write_gzb
from gzslkit.ensemble import (ClassifierConfig, EnsembleConfig, calibrate_temperature,
                              mean_nll, softmax_with_temperature,
                              stratified_holdout_split, train_softmax_classifier)
from gzslkit.latentgen import (GenConfig, SPACES, LabeledEmbeddingSet, SPACE_LATENT,
                               build_latent_trainset, decode_trainsets)
from gzslkit.metrics import ausuc, evaluate, harmonic_mean
from gzslkit.rng import Rng
from gzslkit.synthetic import make_synthetic_dataset
from gzslkit.vae import (Stage1Config, VaeModel, WeightSchedule, composite_loss,
                         cross_modal_loss, dist_align_loss, train_stage1, vae_loss)

from oracles import (exhaustive_ausuc, finite_difference, graph_kink_distance,
                     max_rel_error)


def report(criterion, detail=""):
    print(f"\nACCEPTANCE {criterion}: PASS {detail}", flush=True)


# --- criterion 1: gradient suite ------------------------------------------------

def test_criterion_1_gradient_suite():
    t0 = time.perf_counter()
    checked, seed, worst = 0, 0, 0.0
    while checked < 20:
        seed += 1
        model = VaeModel(4, 3, z_dim=2, enc_visual_hidden=4, enc_semantic_hidden=4,
                         dec_visual_hidden=4, dec_semantic_hidden=4,
                         rng=Rng(seed), dtype=np.float64)
        rng = Rng(seed + 1000)
        x = rng.uniform(-1, 1, (3, 4), dtype=np.float64)
        a = rng.uniform(-1, 1, (3, 3), dtype=np.float64)
        params = model.params.tensors()

        def total_fn():
            total, _ = composite_loss(model, x, a, Rng(seed + 2000),
                                      beta=0.3, gamma_cm=0.9, gamma_da=0.6)
            return total

        composite = total_fn()
        if graph_kink_distance(composite) < 0.02:
            continue

        losses = {
            "composite": lambda: float(total_fn().value),
            "vae": lambda: float(vae_loss(model, x, a, Rng(seed + 2000), beta=0.3).value),
            "cross_modal": lambda: float(cross_modal_loss(model, x, a).value),
            "dist_align": lambda: float(dist_align_loss(model.encode_visual(x),
                                                        model.encode_semantic(a)).value),
        }
        for name, fn in losses.items():
            model.params.zero_grad()
            if name == "composite":
                loss = total_fn()
            elif name == "vae":
                loss = vae_loss(model, x, a, Rng(seed + 2000), beta=0.3)
            elif name == "cross_modal":
                loss = cross_modal_loss(model, x, a)
            else:
                loss = dist_align_loss(model.encode_visual(x), model.encode_semantic(a))
            ad.backward(loss)
            analytic = [np.zeros_like(p.value) if p.grad is None else p.grad.copy()
                        for p in params]
            numeric = finite_difference(fn, params)
            err = max_rel_error(analytic, numeric)
            worst = max(worst, err)
            assert err <= 1e-3, f"{name} gradient mismatch at seed {seed}: {err}"
        checked += 1
    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0, f"gradient suite took {elapsed:.1f}s"
    report(1, f"(20 restarts, worst rel err {worst:.2e}, {elapsed:.1f}s)")


# --- criterion 2: metric fidelity -------------------------------------------------

# every (seen, unseen, H) triple from the published GZSL results; the H column
# of such tables comes from unrounded accuracies, so recomputing from the
# printed pair carries up to 0.1 of input-rounding drift plus 0.05 of output
# rounding
GZSL_RESULTS_TABLE = [
    # CUB
    ("SJE", "CUB", 59.2, 23.5, 33.6), ("ALE", "CUB", 62.8, 23.7, 34.4),
    ("LATEM", "CUB", 57.3, 15.2, 24.0), ("ESZSL", "CUB", 63.8, 12.6, 21.0),
    ("SYNC", "CUB", 70.9, 11.5, 19.8), ("DEVISE", "CUB", 53.0, 23.8, 32.8),
    ("SAE", "CUB", 18.0, 8.8, 11.8), ("f-CLSWGAN", "CUB", 57.7, 43.7, 49.7),
    ("cycle-WGAN", "CUB", 60.3, 46.0, 52.2), ("CADA-VAE", "CUB", 53.5, 51.6, 52.4),
    ("CMT", "CUB", 49.8, 7.2, 12.6), ("DAZSL", "CUB", 56.9, 47.6, 51.8),
    ("CADA-VAE*", "CUB", 57.2, 48.4, 52.4), ("MCADA-VAE", "CUB", 55.2, 52.7, 54.0),
    # SUN
    ("SJE", "SUN", 30.5, 14.7, 19.8), ("ALE", "SUN", 33.1, 21.8, 26.3),
    ("LATEM", "SUN", 28.8, 14.7, 19.5), ("ESZSL", "SUN", 27.9, 11.0, 15.8),
    ("SYNC", "SUN", 43.3, 7.9, 13.4), ("DEVISE", "SUN", 27.4, 16.9, 20.9),
    ("SAE", "SUN", 54.0, 7.8, 13.6), ("f-CLSWGAN", "SUN", 36.6, 42.6, 39.4),
    ("cycle-WGAN", "SUN", 33.1, 48.3, 39.2), ("CADA-VAE", "SUN", 35.7, 47.2, 40.6),
    ("CMT", "SUN", 21.8, 8.1, 11.8), ("DAZSL", "SUN", 37.2, 45.6, 41.4),
    ("CADA-VAE*", "SUN", 36.8, 45.1, 40.6), ("MCADA-VAE", "SUN", 35.6, 47.4, 40.7),
    # AWA1
    ("SJE", "AWA1", 74.6, 11.3, 19.6), ("ALE", "AWA1", 76.1, 16.8, 27.5),
    ("LATEM", "AWA1", 71.7, 7.3, 13.3), ("ESZSL", "AWA1", 75.6, 6.6, 12.1),
    ("SYNC", "AWA1", 87.3, 8.9, 16.2), ("DEVISE", "AWA1", 68.7, 13.4, 22.4),
    ("SAE", "AWA1", 77.1, 1.8, 3.5), ("f-CLSWGAN", "AWA1", 61.4, 57.9, 59.6),
    ("cycle-WGAN", "AWA1", 63.5, 56.4, 59.7), ("CADA-VAE", "AWA1", 72.8, 57.3, 64.1),
    ("CMT", "AWA1", 87.6, 0.9, 1.8), ("DAZSL", "AWA1", 76.9, 54.7, 63.9),
    ("CADA-VAE*", "AWA1", 76.6, 55.0, 64.1), ("MCADA-VAE", "AWA1", 75.2, 57.3, 65.0),
    # AWA2
    ("SJE", "AWA2", 73.9, 8.0, 14.4), ("ALE", "AWA2", 81.8, 14.0, 23.9),
    ("LATEM", "AWA2", 77.3, 11.5, 20.0), ("ESZSL", "AWA2", 77.8, 5.9, 11.0),
    ("SYNC", "AWA2", 90.5, 10.0, 18.0), ("DEVISE", "AWA2", 74.7, 17.1, 27.8),
    ("SAE", "AWA2", 82.2, 1.1, 2.2), ("f-CLSWGAN", "AWA2", 68.9, 52.1, 59.4),
    ("CADA-VAE", "AWA2", 75.0, 55.8, 63.9), ("CMT", "AWA2", 90.0, 0.5, 1.0),
    ("CADA-VAE*", "AWA2", 75.3, 55.5, 63.9), ("MCADA-VAE", "AWA2", 73.2, 58.5, 65.0),
]

# the printed DAZSL SUN H (41.4) is inconsistent with its own printed pair
# (which yields 40.97) beyond any rounding slack: that entry was carried over
# from its source publication
EXCLUDED_ROWS = {("DAZSL", "SUN")}


def test_criterion_2_metric_fidelity():
    worst = 0.0
    for method, dataset, seen, unseen, printed_h in GZSL_RESULTS_TABLE:
        if (method, dataset) in EXCLUDED_ROWS:
            continue
        h = harmonic_mean(seen, unseen)
        worst = max(worst, abs(h - printed_h))
        assert h == pytest.approx(printed_h, abs=0.15), \
            f"{method}/{dataset}: harmonic_mean({seen}, {unseen}) = {h:.3f} vs printed {printed_h}"
    # the spotlighted pairs
    assert harmonic_mean(55.2, 52.7) == pytest.approx(54.0, abs=0.15)
    assert harmonic_mean(75.2, 57.3) == pytest.approx(65.0, abs=0.15)
    assert harmonic_mean(73.2, 58.5) == pytest.approx(65.0, abs=0.15)
    report(2, f"({len(GZSL_RESULTS_TABLE) - 1} rows, worst |dH| {worst:.3f})")


# --- criterion 3: calibration properties --------------------------------------------

def test_criterion_3_calibration_properties():
    from test_ensemble import _FixedLogitsClassifier

    rng = Rng(99)
    fixtures = 0
    for trial in range(25):
        n = int(rng.integers(20, 120))
        k = int(rng.integers(2, 8))
        scale = float(np.exp(rng.standard_normal((1,), dtype=np.float64)[0]))
        logits = rng.standard_normal((n, k), dtype=np.float64) * scale
        labels = rng.integers(0, k, size=n).astype(np.int64)
        clf = _FixedLogitsClassifier(logits)
        holdout = LabeledEmbeddingSet(SPACE_LATENT, np.zeros((n, 1), dtype=np.float32), labels)

        before = np.argmax(logits, axis=1)
        tau_hat = calibrate_temperature(clf, holdout)
        after = np.argmax(softmax_with_temperature(logits, tau_hat), axis=1)

        assert tau_hat > 0.0
        np.testing.assert_array_equal(before, after)
        assert mean_nll(logits, labels, tau_hat) <= mean_nll(logits, labels, 1.0) + 1e-12
        fixtures += 1
    report(3, f"({fixtures} random fixtures)")


# --- criterion 4: AUSUC oracle equivalence --------------------------------------------

def test_criterion_4_ausuc_oracle_equivalence():
    rng = Rng(2025)
    instances, worst = 0, 0.0
    while instances < 50:
        n_seen_cls = int(rng.integers(1, 4))
        n_unseen_cls = int(rng.integers(1, 5 - n_seen_cls))
        n_cls = n_seen_cls + n_unseen_cls
        n = int(rng.integers(4, 17))
        labels = rng.integers(0, n_cls, size=n).astype(np.int64)
        labels[0] = 0
        labels[1] = n_seen_cls  # both sides populated
        scores = rng.standard_normal((n, n_cls), dtype=np.float64) * 2.5
        got = ausuc(scores, labels, range(n_seen_cls), range(n_seen_cls, n_cls)).area
        want, _ = exhaustive_ausuc(scores, labels, range(n_seen_cls), range(n_seen_cls, n_cls))
        worst = max(worst, abs(got - want))
        assert abs(got - want) <= 1e-6, f"instance {instances}: {got} vs {want}"
        instances += 1
    report(4, f"(50 instances, worst |dA| {worst:.2e})")


# --- criterion 5: synthetic end-to-end ablation ------------------------------------------

SYNTH_STAGE1 = dict(epochs=40, batch_size=50, learning_rate=1e-3, latent_dim=16,
                    enc_visual_hidden=64, enc_semantic_hidden=48,
                    dec_visual_hidden=64, dec_semantic_hidden=32)
SYNTH_SCHEDULES = dict(cm_schedule=WeightSchedule(0.05, 5, 25),
                       da_schedule=WeightSchedule(0.01, 0, 20),
                       kl_schedule=WeightSchedule(0.005, 0, 20))
SYNTH_GEN = dict(per_seen_class=100, per_unseen_class=200)
SYNTH_CLF = dict(epochs=60, learning_rate=0.001, batch_size=64)


def synthetic_pipeline(seed):
    dataset = make_synthetic_dataset(n_seen=8, n_unseen=4, x_dim=32, a_dim=8,
                                     samples_per_class=100, noise=0.3,
                                     unseen_attr_scale=1.5, seed=seed)
    model, _ = train_stage1(dataset, Stage1Config(seed=seed, **SYNTH_STAGE1, **SYNTH_SCHEDULES))
    latents = build_latent_trainset(model, dataset, GenConfig(seed=seed, **SYNTH_GEN))
    recon_x, recon_a = decode_trainsets(model, latents)
    sets = {s.space: s for s in (latents, recon_x, recon_a)}
    train_idx, holdout_idx = stratified_holdout_split(latents.labels, 0.1, seed=seed)
    classifiers = {}
    for space in SPACES:
        clf = train_softmax_classifier(sets[space].subset(train_idx), dataset.n_classes,
                                       ClassifierConfig(seed=seed, **SYNTH_CLF))
        calibrate_temperature(clf, sets[space].subset(holdout_idx))
        classifiers[space] = clf
    h = {}
    for mode in ("ensemble", "tau1", "z-only", "xr-only", "ar-only"):
        h[mode] = evaluate(model, classifiers, dataset, EnsembleConfig(), mode=mode).h_mean
    return h


def test_criterion_5_synthetic_ablation():
    t0 = time.perf_counter()
    h_by_mode = {m: [] for m in ("ensemble", "tau1", "z-only", "xr-only", "ar-only")}
    for seed in range(5):
        for mode, h in synthetic_pipeline(seed).items():
            h_by_mode[mode].append(h)
    means = {m: float(np.mean(v)) for m, v in h_by_mode.items()}
    elapsed = time.perf_counter() - t0

    best_single = max(means["z-only"], means["xr-only"], means["ar-only"])
    assert means["ensemble"] >= means["tau1"], \
        f"calibrated {means['ensemble']:.2f} < tau=1 {means['tau1']:.2f}"
    assert means["ensemble"] >= best_single - 2.0, \
        f"calibrated {means['ensemble']:.2f} < best single {best_single:.2f} - 2.0"
    assert elapsed < 300.0, f"ablation took {elapsed:.0f}s"
    report(5, f"(cal {means['ensemble']:.2f} vs tau1 {means['tau1']:.2f} vs "
              f"best-single {best_single:.2f}; {elapsed:.0f}s)")


# --- criterion 6: end-to-end determinism ----------------------------------------------

def test_criterion_6_run_all_determinism(tmp_path):
    data_dir = tmp_path / "data"
    write_gzb(make_synthetic_dataset(n_seen=4, n_unseen=2, x_dim=8, a_dim=4,
                                     samples_per_class=20, seed=5), data_dir)
    config = {
        "seed": 7,
        "stage1": {"epochs": 4, "batch_size": 16, "learning_rate": 1e-3,
                   "latent_dim": 4, "enc_visual_hidden": 16, "enc_semantic_hidden": 12,
                   "dec_visual_hidden": 16, "dec_semantic_hidden": 8,
                   "cm_schedule": {"rate": 0.05, "start_epoch": 0, "end_epoch": 3},
                   "da_schedule": {"rate": 0.02, "start_epoch": 0, "end_epoch": 3},
                   "kl_schedule": {"rate": 0.01, "start_epoch": 0, "end_epoch": 3}},
        "generate": {"per_seen_class": 10, "per_unseen_class": 15},
        "classifier": {"epochs": 5, "batch_size": 16},
        "eval": {"mode": "ensemble", "with_ausuc": True, "n_bias": 50},
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(config))
    outs = []
    for name in ("o1", "o2"):
        out = tmp_path / name
        code = cli_main(["run-all", "--config", str(cfg_path),
                         "--data", str(data_dir), "--out", str(out)])
        assert code == 0
        outs.append((out / "eval_ensemble.json").read_bytes())
    assert outs[0] == outs[1]
    report(6, f"({len(outs[0])} identical bytes)")


# --- criterion 7 (optional): AWA2 reproduction ------------------------------------------

BENCHMARK_DIR = os.environ.get("GZSL_BENCHMARK_DIR")


@pytest.mark.skipif(not BENCHMARK_DIR or not (Path(BENCHMARK_DIR) / "awa2").exists(),
                    reason="set GZSL_BENCHMARK_DIR to a directory with a converted awa2 dataset")
def test_criterion_7_awa2_reproduction():
    dataset = load_gzb(Path(BENCHMARK_DIR) / "awa2")
    model, _ = train_stage1(dataset, Stage1Config(seed=0))
    latents = build_latent_trainset(model, dataset, GenConfig(seed=0))
    recon_x, recon_a = decode_trainsets(model, latents)
    sets = {s.space: s for s in (latents, recon_x, recon_a)}
    train_idx, holdout_idx = stratified_holdout_split(latents.labels, 0.1, seed=0)
    classifiers = {}
    for space in SPACES:
        clf = train_softmax_classifier(sets[space].subset(train_idx), dataset.n_classes,
                                       ClassifierConfig(seed=0))
        calibrate_temperature(clf, sets[space].subset(holdout_idx))
        classifiers[space] = clf
    rep = evaluate(model, classifiers, dataset, EnsembleConfig(), mode="ensemble",
                   with_ausuc=True)
    assert rep.h_mean == pytest.approx(65.0, abs=2.0)
    assert rep.ausuc.area == pytest.approx(54.9, abs=2.0)
    report(7, f"(H {rep.h_mean:.1f}, AUSUC {rep.ausuc.area:.1f})")
