"""Command-line pipeline: train, generate, fit-classifiers, calibrate,
evaluate, ausuc, distmat, run-all.

Every command reads/writes artifacts under --out and records a run.json
provenance file (effective config, seed, versions, timings). Passing a
previous run.json as --config replays that run.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .dataio import load_gzb
from .ensemble import (ClassifierConfig, EnsembleConfig, calibrate_temperature,
                       load_classifier, save_classifier, stratified_holdout_split,
                       train_softmax_classifier)
from .errors import GzslError
from .latentgen import (GenConfig, SPACES, SPACE_LATENT, build_latent_trainset,
                        decode_trainsets, load_embedding_set, save_embedding_set)
from .metrics import MODES, ausuc, class_distance_matrix, distance_matrix_csv, evaluate
from .vae import Stage1Config, load_model, save_model, train_stage1


@dataclass
class EvalOptions:
    mode: str = "ensemble"
    with_ausuc: bool = False
    n_bias: int = 200
    distmat: bool = False
    distance_metric: str = "l2"
    holdout_fraction: float = 0.1

    def to_dict(self):
        return {"mode": self.mode, "with_ausuc": self.with_ausuc, "n_bias": self.n_bias,
                "distmat": self.distmat, "distance_metric": self.distance_metric,
                "holdout_fraction": self.holdout_fraction}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class RunConfig:
    data: str
    out: str
    seed: int = 0
    stage1: Stage1Config = field(default_factory=Stage1Config)
    generate: GenConfig = field(default_factory=GenConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    eval: EvalOptions = field(default_factory=EvalOptions)

    def to_dict(self):
        return {"data": self.data, "out": self.out, "seed": self.seed,
                "stage1": self.stage1.to_dict(), "generate": self.generate.to_dict(),
                "classifier": self.classifier.to_dict(), "ensemble": self.ensemble.to_dict(),
                "eval": self.eval.to_dict()}


def build_config(args) -> RunConfig:
    """Merge config-file values with command-line overrides."""
    file_cfg: dict = {}
    if args.config:
        try:
            file_cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise SystemExit(f"error: cannot read config {args.config}: {exc}")
        if "config" in file_cfg and "command" in file_cfg:
            file_cfg = file_cfg["config"]  # replay of a previous run.json

    data = args.data or file_cfg.get("data")
    out = args.out or file_cfg.get("out")
    if not data or not out:
        raise SystemExit("error: --data and --out are required (flag or config file)")

    seed = args.seed if args.seed is not None else int(file_cfg.get("seed", 0))

    stage1_values = dict(file_cfg.get("stage1", {}))
    stage1_values.setdefault("seed", seed)
    generate_values = dict(file_cfg.get("generate", {}))
    generate_values.setdefault("seed", seed)
    classifier_values = dict(file_cfg.get("classifier", {}))
    classifier_values.setdefault("seed", seed)
    ensemble_values = dict(file_cfg.get("ensemble", {}))
    eval_values = dict(file_cfg.get("eval", {}))

    if getattr(args, "lambda_x", None) is not None:
        ensemble_values["lambda_x"] = args.lambda_x
    if getattr(args, "lambda_a", None) is not None:
        ensemble_values["lambda_a"] = args.lambda_a
    if getattr(args, "mode", None) is not None:
        eval_values["mode"] = args.mode

    try:
        return RunConfig(
            data=data, out=out, seed=seed,
            stage1=Stage1Config.from_dict(stage1_values),
            generate=GenConfig.from_dict(generate_values),
            classifier=ClassifierConfig.from_dict(classifier_values),
            ensemble=EnsembleConfig.from_dict(ensemble_values),
            eval=EvalOptions.from_dict(eval_values),
        )
    except (TypeError, ValueError, GzslError) as exc:
        raise SystemExit(f"error: bad config: {exc}")


def _write_run_record(cfg: RunConfig, command: str, timings: dict) -> None:
    record = {
        "command": command,
        "config": cfg.to_dict(),
        "versions": {"gzslkit": __version__, "numpy": np.__version__,
                     "python": sys.version.split()[0]},
        "timings": timings,
    }
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "run.json").write_text(json.dumps(record, indent=2, sort_keys=True), encoding="utf-8")


def _require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise SystemExit(f"error: missing artifact {path} (run `gzslkit {hint}` first)")
    return path


def cmd_train(cfg: RunConfig, timings: dict) -> None:
    dataset = load_gzb(cfg.data)
    t0 = time.perf_counter()
    model, log = train_stage1(dataset, cfg.stage1)
    timings["train"] = round(time.perf_counter() - t0, 3)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    save_model(model, out / "model", cfg.stage1)
    (out / "stage1_log.json").write_text(json.dumps(log, indent=2), encoding="utf-8")


def cmd_generate(cfg: RunConfig, timings: dict) -> None:
    dataset = load_gzb(cfg.data)
    model = load_model(_require(Path(cfg.out) / "model", "train"))
    t0 = time.perf_counter()
    latents = build_latent_trainset(model, dataset, cfg.generate)
    recon_x, recon_a = decode_trainsets(model, latents)
    timings["generate"] = round(time.perf_counter() - t0, 3)
    for emb_set in (latents, recon_x, recon_a):
        save_embedding_set(emb_set, Path(cfg.out) / "sets" / emb_set.space)


def cmd_fit_classifiers(cfg: RunConfig, timings: dict) -> None:
    dataset = load_gzb(cfg.data)
    out = Path(cfg.out)
    latents = load_embedding_set(_require(out / "sets" / SPACE_LATENT, "generate"))
    train_idx, holdout_idx = stratified_holdout_split(
        latents.labels, cfg.eval.holdout_fraction, seed=cfg.classifier.seed)
    np.asarray(holdout_idx, dtype="<u4").tofile(out / "holdout_indices.u32")
    t0 = time.perf_counter()
    for space in SPACES:
        emb_set = load_embedding_set(_require(out / "sets" / space, "generate"))
        clf = train_softmax_classifier(emb_set.subset(train_idx), dataset.n_classes, cfg.classifier)
        save_classifier(clf, out / "classifiers" / space)
    timings["fit_classifiers"] = round(time.perf_counter() - t0, 3)


def cmd_calibrate(cfg: RunConfig, timings: dict) -> None:
    out = Path(cfg.out)
    holdout_path = _require(out / "holdout_indices.u32", "fit-classifiers")
    holdout_idx = np.fromfile(holdout_path, dtype="<u4").astype(np.int64)
    t0 = time.perf_counter()
    for space in SPACES:
        emb_set = load_embedding_set(_require(out / "sets" / space, "generate"))
        clf = load_classifier(_require(out / "classifiers" / space, "fit-classifiers"))
        calibrate_temperature(clf, emb_set.subset(holdout_idx))
        save_classifier(clf, out / "classifiers" / space)
    timings["calibrate"] = round(time.perf_counter() - t0, 3)


def _load_eval_inputs(cfg: RunConfig):
    dataset = load_gzb(cfg.data)
    out = Path(cfg.out)
    model = load_model(_require(out / "model", "train"))
    classifiers = {space: load_classifier(_require(out / "classifiers" / space, "fit-classifiers"))
                   for space in SPACES}
    return dataset, model, classifiers


def cmd_evaluate(cfg: RunConfig, timings: dict) -> None:
    dataset, model, classifiers = _load_eval_inputs(cfg)
    t0 = time.perf_counter()
    report = evaluate(model, classifiers, dataset, cfg.ensemble, mode=cfg.eval.mode,
                      with_ausuc=cfg.eval.with_ausuc, n_bias=cfg.eval.n_bias)
    timings["evaluate"] = round(time.perf_counter() - t0, 3)
    out = Path(cfg.out)
    (out / f"eval_{cfg.eval.mode}.json").write_text(report.to_json() + "\n", encoding="utf-8")
    print(f"{'mode':<12} {'seen':>7} {'unseen':>7} {'H':>7}")
    print(f"{report.mode:<12} {report.seen_top1:>7.1f} {report.unseen_top1:>7.1f} {report.h_mean:>7.1f}")
    if report.ausuc is not None:
        print(f"{'ausuc':<12} {report.ausuc.area:>7.1f}")


def cmd_ausuc(cfg: RunConfig, timings: dict) -> None:
    dataset, model, classifiers = _load_eval_inputs(cfg)
    t0 = time.perf_counter()
    report = evaluate(model, classifiers, dataset, cfg.ensemble, mode=cfg.eval.mode,
                      with_ausuc=True, n_bias=cfg.eval.n_bias)
    timings["ausuc"] = round(time.perf_counter() - t0, 3)
    payload = {"mode": report.mode, "ausuc": report.ausuc.to_dict()}
    (Path(cfg.out) / "ausuc.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"AUSUC [{report.mode}]: {report.ausuc.area:.2f}")


def cmd_distmat(cfg: RunConfig, timings: dict) -> None:
    dataset = load_gzb(cfg.data)
    model = load_model(_require(Path(cfg.out) / "model", "train"))
    t0 = time.perf_counter()
    order = np.concatenate([dataset.seen_classes, dataset.unseen_classes])
    attrs = dataset.attributes[order]
    lat = model.encode_semantic(attrs).mu.value
    spaces = {
        "a": attrs,
        "z": lat,
        "x_recon": model.decode_visual(lat).value,
        "a_recon": model.decode_semantic(lat).value,
    }
    out = Path(cfg.out)
    for name, emb in spaces.items():
        matrix = class_distance_matrix(emb, metric=cfg.eval.distance_metric)
        (out / f"distmat_{name}.csv").write_text(
            distance_matrix_csv(matrix, order.tolist(), dataset.seen_classes.tolist()),
            encoding="utf-8")
    # mean training feature per seen class
    pool = dataset.training_pool()
    means = np.stack([dataset.features[pool[dataset.labels[pool] == c]].mean(axis=0)
                      for c in dataset.seen_classes.tolist()])
    matrix = class_distance_matrix(means, metric=cfg.eval.distance_metric)
    (out / "distmat_x.csv").write_text(
        distance_matrix_csv(matrix, dataset.seen_classes.tolist(),
                            dataset.seen_classes.tolist()),
        encoding="utf-8")
    timings["distmat"] = round(time.perf_counter() - t0, 3)


def cmd_run_all(cfg: RunConfig, timings: dict) -> None:
    cmd_train(cfg, timings)
    cmd_generate(cfg, timings)
    cmd_fit_classifiers(cfg, timings)
    cmd_calibrate(cfg, timings)
    cmd_evaluate(cfg, timings)
    if cfg.eval.with_ausuc:
        cmd_ausuc(cfg, timings)
    if cfg.eval.distmat:
        cmd_distmat(cfg, timings)


_COMMANDS = {
    "train": cmd_train,
    "generate": cmd_generate,
    "fit-classifiers": cmd_fit_classifiers,
    "calibrate": cmd_calibrate,
    "evaluate": cmd_evaluate,
    "ausuc": cmd_ausuc,
    "distmat": cmd_distmat,
    "run-all": cmd_run_all,
}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gzslkit",
                                     description="GZSL ensemble training and evaluation pipeline")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file (or a previous run.json)")
        p.add_argument("--data", help="GZB dataset directory")
        p.add_argument("--out", help="output directory for artifacts")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--mode", choices=MODES, default=None)
        p.add_argument("--lambda-x", dest="lambda_x", type=float, default=None)
        p.add_argument("--lambda-a", dest="lambda_a", type=float, default=None)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = build_config(args)
    except SystemExit as exc:
        print(exc, file=sys.stderr)
        return 2
    timings: dict = {}
    try:
        _COMMANDS[args.command](cfg, timings)
    except SystemExit as exc:
        print(exc, file=sys.stderr)
        return 2
    except (GzslError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _write_run_record(cfg, args.command, timings)
    return 0


if __name__ == "__main__":
    sys.exit(main())
