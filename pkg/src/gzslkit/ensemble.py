"""Linear softmax classifiers per embedding space, temperature calibration,
and the averaged multi-space prediction rule.

Each classifier is one linear layer over its space with an output unit per
class (seen and unseen). Calibration fits a single temperature per classifier
by minimizing holdout negative log-likelihood; scaling logits by a positive
temperature never changes the argmax, so accuracy is untouched. The ensemble
score is p_latent + lambda_x * p_recon_visual + lambda_a * p_recon_semantic,
optionally renormalized to a distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import DegenerateTrainingError, DomainError, UsageError
from .latentgen import (SPACE_LATENT, SPACE_RECON_SEMANTIC, SPACE_RECON_VISUAL,
                        SPACES, LabeledEmbeddingSet)
from .optim import Adam, ParameterSet, init_linear
from .rng import Rng
from .tensordir import read_tensor_dir, write_tensor_dir
from .vae import VaeModel


@dataclass
class ClassifierConfig:
    epochs: int = 30
    learning_rate: float = 0.001
    batch_size: int = 64
    seed: int = 0

    def to_dict(self):
        return {"epochs": self.epochs, "learning_rate": self.learning_rate,
                "batch_size": self.batch_size, "seed": self.seed}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class EnsembleConfig:
    lambda_x: float = 1.0
    lambda_a: float = 1.0
    renormalize: bool = True

    def __post_init__(self):
        if self.lambda_x < 0 or self.lambda_a < 0:
            raise UsageError("ensemble weights must be non-negative")

    def to_dict(self):
        return {"lambda_x": self.lambda_x, "lambda_a": self.lambda_a,
                "renormalize": self.renormalize}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


class CalibratedLinearClassifier:
    """Single linear layer over one embedding space plus its temperature."""

    def __init__(self, space: str, weight: np.ndarray, bias: np.ndarray, tau: float = 1.0):
        if space not in SPACES:
            raise UsageError(f"unknown embedding space {space!r}")
        if tau <= 0:
            raise DomainError(f"temperature must be positive, got {tau}")
        self.space = space
        self.weight = np.asarray(weight, dtype=np.float32)   # (d, n_classes)
        self.bias = np.asarray(bias, dtype=np.float32)       # (n_classes,)
        self.tau = float(tau)

    @property
    def n_classes(self) -> int:
        return self.weight.shape[1]

    def logits(self, embeddings: np.ndarray) -> np.ndarray:
        return np.asarray(embeddings, dtype=np.float32) @ self.weight + self.bias

    def predict_proba(self, embeddings: np.ndarray, tau: float | None = None) -> np.ndarray:
        return softmax_with_temperature(self.logits(embeddings), self.tau if tau is None else tau)

    def predict(self, embeddings: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(embeddings), axis=1)


def softmax_with_temperature(logits: np.ndarray, tau: float) -> np.ndarray:
    """Row-wise softmax of logits / tau, max-subtracted for stability."""
    if tau <= 0:
        raise DomainError(f"temperature must be positive, got {tau}")
    z = np.asarray(logits, dtype=np.float64) / tau
    z = np.atleast_2d(z)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)
    return p[0] if np.asarray(logits).ndim == 1 else p


def mean_nll(logits: np.ndarray, labels: np.ndarray, tau: float) -> float:
    """Mean negative log-likelihood of the true labels at temperature tau."""
    if tau <= 0:
        raise DomainError(f"temperature must be positive, got {tau}")
    z = np.asarray(logits, dtype=np.float64) / tau
    z = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    picked = z[np.arange(z.shape[0]), np.asarray(labels)]
    return float(np.mean(log_norm - picked))


def train_softmax_classifier(train_set: LabeledEmbeddingSet, n_classes: int,
                             config: ClassifierConfig) -> CalibratedLinearClassifier:
    """Cross-entropy training of one linear layer with Adam; tau stays 1."""
    if len(train_set) == 0:
        raise DegenerateTrainingError("empty training set")
    if len(np.unique(train_set.labels)) < 2:
        raise DegenerateTrainingError("training set covers a single class")

    d = train_set.embeddings.shape[1]
    rng = Rng(config.seed).derive("classifier", train_set.space)
    params = ParameterSet()
    w, b = init_linear(params, "linear", d, n_classes, rng.derive("init"))
    opt = Adam(params, lr=config.learning_rate)
    shuffle_rng = rng.derive("shuffle")

    n = len(train_set)
    for _ in range(config.epochs):
        perm = shuffle_rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = perm[start:start + config.batch_size]
            x = Tensor(train_set.embeddings[idx])
            loss = ad.softmax_cross_entropy(ad.linear(x, w, b), train_set.labels[idx])
            opt.zero_grad()
            ad.backward(loss)
            opt.step()

    return CalibratedLinearClassifier(train_set.space, w.value, b.value, tau=1.0)


def calibrate_temperature(classifier: CalibratedLinearClassifier,
                          holdout: LabeledEmbeddingSet,
                          log_tau_low: float = math.log(0.05),
                          log_tau_high: float = math.log(20.0),
                          iterations: int = 60) -> float:
    """Golden-section search for the NLL-minimizing temperature on a holdout.

    The classifier's tau is updated in place. The returned temperature never
    has higher holdout NLL than tau = 1, and predictions are unchanged by
    construction (positive scaling preserves the argmax).
    """
    if len(holdout) == 0:
        raise UsageError("calibration holdout is empty")
    if holdout.space != classifier.space:
        raise UsageError(
            f"holdout space {holdout.space!r} != classifier space {classifier.space!r}"
        )
    logits = classifier.logits(holdout.embeddings)
    labels = holdout.labels

    def f(log_tau: float) -> float:
        return mean_nll(logits, labels, math.exp(log_tau))

    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    lo, hi = log_tau_low, log_tau_high
    c = hi - inv_phi * (hi - lo)
    d = lo + inv_phi * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(iterations):
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - inv_phi * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + inv_phi * (hi - lo)
            fd = f(d)
    tau_star = math.exp((lo + hi) / 2.0)

    # the identity temperature is always admissible; keep whichever is better
    if mean_nll(logits, labels, 1.0) <= mean_nll(logits, labels, tau_star):
        tau_star = 1.0
    classifier.tau = tau_star
    return tau_star


def stratified_holdout_split(labels: np.ndarray, fraction: float = 0.1,
                             seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Per-class split into (train_idx, holdout_idx); at least one holdout row
    per class when the class has two or more rows."""
    if not 0.0 < fraction < 1.0:
        raise UsageError(f"holdout fraction must be in (0, 1), got {fraction}")
    rng = Rng(seed).derive("holdout")
    train_idx, holdout_idx = [], []
    for c in np.unique(labels).tolist():
        rows = np.flatnonzero(labels == c)
        if len(rows) < 2:
            train_idx.extend(rows.tolist())
            continue
        k = min(len(rows) - 1, max(1, int(round(fraction * len(rows)))))
        chosen = rows[np.sort(rng.derive(int(c)).choice_without_replacement(len(rows), k))]
        rest = np.setdiff1d(rows, chosen)
        holdout_idx.extend(chosen.tolist())
        train_idx.extend(rest.tolist())
    return np.array(sorted(train_idx), dtype=np.int64), np.array(sorted(holdout_idx), dtype=np.int64)


def embed_test_spaces(model: VaeModel, features: np.ndarray) -> dict[str, np.ndarray]:
    """Deterministic test-time embeddings: z = encoder mean, then both decoders."""
    z = model.embed_visual_mu(features)
    return {
        SPACE_LATENT: z,
        SPACE_RECON_VISUAL: model.decode_visual(z).value,
        SPACE_RECON_SEMANTIC: model.decode_semantic(z).value,
    }


def ensemble_predict(features: np.ndarray, model: VaeModel,
                     classifiers: dict[str, CalibratedLinearClassifier],
                     config: EnsembleConfig,
                     force_tau: float | None = None) -> np.ndarray:
    """Combined class scores for a batch of visual feature vectors.

    Returns one row per sample over the full class set. With renormalize on,
    rows are proper distributions; either way the argmax is the prediction.
    """
    for space in SPACES:
        if space not in classifiers:
            raise UsageError(f"missing classifier for space {space!r}")
    spaces = embed_test_spaces(model, np.atleast_2d(features))
    p_z = classifiers[SPACE_LATENT].predict_proba(spaces[SPACE_LATENT], tau=force_tau)
    p_x = classifiers[SPACE_RECON_VISUAL].predict_proba(spaces[SPACE_RECON_VISUAL], tau=force_tau)
    p_a = classifiers[SPACE_RECON_SEMANTIC].predict_proba(spaces[SPACE_RECON_SEMANTIC], tau=force_tau)
    scores = p_z + config.lambda_x * p_x + config.lambda_a * p_a
    if config.renormalize:
        scores = scores / (1.0 + config.lambda_x + config.lambda_a)
    return scores


def save_classifier(classifier: CalibratedLinearClassifier, path) -> None:
    meta = {"space": classifier.space, "tau": classifier.tau,
            "n_classes": classifier.n_classes}
    write_tensor_dir(path, "classifier", meta,
                     {"weight": classifier.weight, "bias": classifier.bias})


def load_classifier(path) -> CalibratedLinearClassifier:
    meta, arrays = read_tensor_dir(path, kind="classifier")
    return CalibratedLinearClassifier(meta["space"], arrays["weight"],
                                      arrays["bias"], tau=float(meta["tau"]))
