"""Seen/unseen evaluation protocol: per-class top-1 accuracy, harmonic mean,
the area under the seen-unseen accuracy curve, and class distance matrices.

AUSUC sweeps a bias subtracted from every seen-class score. Decision changes
happen only where a sample's best seen and best unseen scores cross, so the
sweep evaluates the midpoint between every pair of adjacent crossing
thresholds (plus a uniform grid for curve density and the two infinite
endpoints); the trapezoidal area over those points is exact, not a
discretization.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dataio import GzslDataset
from .ensemble import CalibratedLinearClassifier, EnsembleConfig, embed_test_spaces, ensemble_predict
from .errors import UsageError
from .latentgen import SPACE_LATENT, SPACE_RECON_SEMANTIC, SPACE_RECON_VISUAL
from .vae import VaeModel

MODES = ("ensemble", "tau1", "z-only", "xr-only", "ar-only")

_DISTANCES = {
    "l2": lambda diff: np.sqrt(np.sum(diff * diff, axis=-1)),
    "l1": lambda diff: np.sum(np.abs(diff), axis=-1),
}


def per_class_top1(predictions, labels, class_set) -> float:
    """Mean over classes of within-class accuracy, in percent.

    Classes from class_set with no samples are excluded from the mean.
    """
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise UsageError(f"predictions shape {predictions.shape} != labels shape {labels.shape}")
    if labels.size == 0:
        raise UsageError("empty evaluation set")
    accs = []
    for c in sorted(int(c) for c in class_set):
        mask = labels == c
        total = int(mask.sum())
        if total == 0:
            continue
        accs.append(float((predictions[mask] == c).sum()) / total)
    if not accs:
        raise UsageError("no class in class_set has any samples")
    return 100.0 * float(np.mean(accs))


def harmonic_mean(seen_acc: float, unseen_acc: float) -> float:
    """2su/(s+u); zero when both accuracies are zero."""
    if seen_acc + unseen_acc == 0:
        return 0.0
    return 2.0 * seen_acc * unseen_acc / (seen_acc + unseen_acc)


@dataclass
class AusucResult:
    area: float                       # percent scale: trapezoid over fractions, x100
    biases: list                      # sweep values, -inf/+inf at the ends
    curve: list                       # (unseen_pct, seen_pct) per bias

    def to_dict(self):
        def enc(b):
            if math.isinf(b):
                return "-inf" if b < 0 else "inf"
            return b
        return {
            "area": self.area,
            "biases": [enc(b) for b in self.biases],
            "curve": [[u, s] for u, s in self.curve],
        }


def _per_class_fraction(ok_thresholds: dict, totals: dict, bias: float, side: str) -> float:
    """Mean class accuracy at one bias from precomputed crossing thresholds."""
    accs = []
    for c, total in totals.items():
        d = ok_thresholds[c]
        if side == "seen":
            # correct while bias <= threshold (ties stay with the seen side)
            correct = int(d.size - np.searchsorted(d, bias, side="left"))
        else:
            # correct once bias strictly exceeds the threshold
            correct = int(np.searchsorted(d, bias, side="left"))
        accs.append(correct / total)
    return float(np.mean(accs)) if accs else 0.0


def ausuc(scores: np.ndarray, labels: np.ndarray, seen_classes, unseen_classes,
          n_bias: int = 200) -> AusucResult:
    """Area under the seen-unseen accuracy curve for precomputed class scores.

    scores has one row per test sample over the full class set (column index
    == class id); labels mixes seen- and unseen-class samples.
    """
    seen = np.asarray(sorted(int(c) for c in seen_classes))
    unseen = np.asarray(sorted(int(c) for c in unseen_classes))
    if seen.size == 0 or unseen.size == 0:
        raise UsageError("both class sets must be non-empty")
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.ndim != 2 or scores.shape[0] != labels.shape[0]:
        raise UsageError(f"scores shape {scores.shape} does not match {labels.shape[0]} labels")
    is_seen_sample = np.isin(labels, seen)
    if not is_seen_sample.any() or is_seen_sample.all():
        raise UsageError("need test samples on both the seen and unseen side")

    # per sample: best column within each side, and the bias where sides cross
    seen_block = scores[:, seen]
    unseen_block = scores[:, unseen]
    best_seen_col = seen[np.argmax(seen_block, axis=1)]
    best_unseen_col = unseen[np.argmax(unseen_block, axis=1)]
    d = seen_block.max(axis=1) - unseen_block.max(axis=1)

    # a seen-labeled sample is correct iff its within-seen argmax is right and
    # bias <= d; an unseen-labeled sample iff its within-unseen argmax is right
    # and bias > d (ties resolve toward the seen side)
    seen_thr: dict[int, np.ndarray] = {}
    seen_tot: dict[int, int] = {}
    unseen_thr: dict[int, np.ndarray] = {}
    unseen_tot: dict[int, int] = {}
    for c in seen.tolist():
        mask = labels == c
        if not mask.any():
            continue
        ok = mask & (best_seen_col == c)
        seen_thr[c] = np.sort(d[ok])
        seen_tot[c] = int(mask.sum())
    for c in unseen.tolist():
        mask = labels == c
        if not mask.any():
            continue
        ok = mask & (best_unseen_col == c)
        unseen_thr[c] = np.sort(d[ok])
        unseen_tot[c] = int(mask.sum())

    gap = float(np.max(np.abs(d))) if d.size else 1.0
    if gap == 0.0:
        gap = 1.0
    grid = np.linspace(-gap, gap, max(n_bias, 2))
    uniq = np.unique(d)
    mids = (uniq[:-1] + uniq[1:]) / 2.0 if uniq.size > 1 else np.empty(0)
    finite_biases = np.unique(np.concatenate([grid, mids]))

    biases: list[float] = [-math.inf]
    curve: list[tuple[float, float]] = []
    seen_max = _per_class_fraction(seen_thr, seen_tot, -np.inf, "seen")
    unseen_max = _per_class_fraction(unseen_thr, unseen_tot, np.inf, "unseen")
    curve.append((0.0, 100.0 * seen_max))
    for b in finite_biases.tolist():
        biases.append(b)
        s = _per_class_fraction(seen_thr, seen_tot, b, "seen")
        u = _per_class_fraction(unseen_thr, unseen_tot, b, "unseen")
        curve.append((100.0 * u, 100.0 * s))
    biases.append(math.inf)
    curve.append((100.0 * unseen_max, 0.0))

    xs = np.array([u for u, _ in curve]) / 100.0
    ys = np.array([s for _, s in curve]) / 100.0
    area = 100.0 * float(np.trapezoid(ys, xs))
    return AusucResult(area=area, biases=biases, curve=curve)


def class_distance_matrix(embeddings: np.ndarray, metric: str = "l2") -> np.ndarray:
    """Symmetric pairwise distance matrix over one embedding per class."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if embeddings.ndim != 2 or embeddings.shape[0] < 2:
        raise UsageError("need at least two class embeddings")
    if metric not in _DISTANCES:
        raise UsageError(f"unknown metric {metric!r}, expected one of {sorted(_DISTANCES)}")
    diff = embeddings[:, None, :] - embeddings[None, :, :]
    matrix = _DISTANCES[metric](diff)
    matrix = (matrix + matrix.T) / 2.0
    np.fill_diagonal(matrix, 0.0)
    return matrix


def distance_matrix_csv(matrix: np.ndarray, class_ids, seen_classes) -> str:
    """CSV with a class-id header row/column and a seen/unseen marker column."""
    seen = {int(c) for c in seen_classes}
    ids = [int(c) for c in class_ids]
    lines = ["class_id,domain," + ",".join(str(c) for c in ids)]
    for i, c in enumerate(ids):
        domain = "seen" if c in seen else "unseen"
        row = ",".join(f"{matrix[i, j]:.6f}" for j in range(len(ids)))
        lines.append(f"{c},{domain},{row}")
    return "\n".join(lines) + "\n"


@dataclass
class EvalReport:
    mode: str
    seen_top1: float
    unseen_top1: float
    h_mean: float
    per_class: dict
    ausuc: Optional[AusucResult] = None

    def to_dict(self):
        return {
            "mode": self.mode,
            "seen_top1": self.seen_top1,
            "unseen_top1": self.unseen_top1,
            "h_mean": self.h_mean,
            "per_class": {str(k): v for k, v in sorted(self.per_class.items())},
            "ausuc": self.ausuc.to_dict() if self.ausuc is not None else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def mode_scores(features: np.ndarray, model: VaeModel,
                classifiers: dict[str, CalibratedLinearClassifier],
                config: EnsembleConfig, mode: str) -> np.ndarray:
    """Class scores for one evaluation mode over a feature batch."""
    if mode not in MODES:
        raise UsageError(f"unknown mode {mode!r}, expected one of {MODES}")
    if mode == "ensemble":
        return ensemble_predict(features, model, classifiers, config)
    if mode == "tau1":
        return ensemble_predict(features, model, classifiers, config, force_tau=1.0)
    space = {"z-only": SPACE_LATENT, "xr-only": SPACE_RECON_VISUAL,
             "ar-only": SPACE_RECON_SEMANTIC}[mode]
    if space not in classifiers:
        raise UsageError(f"missing classifier for space {space!r}")
    embedded = embed_test_spaces(model, np.atleast_2d(features))[space]
    return classifiers[space].predict_proba(embedded)


def evaluate(model: VaeModel, classifiers: dict[str, CalibratedLinearClassifier],
             dataset: GzslDataset, config: EnsembleConfig, mode: str = "ensemble",
             with_ausuc: bool = False, n_bias: int = 200) -> EvalReport:
    """Run the full protocol on the dataset's test splits."""
    if len(dataset.test_seen) == 0 or len(dataset.test_unseen) == 0:
        raise UsageError("both test splits must be non-empty")
    test_idx = np.concatenate([dataset.test_seen, dataset.test_unseen])
    features = dataset.features[test_idx]
    labels = dataset.labels[test_idx]

    scores = mode_scores(features, model, classifiers, config, mode)
    preds = np.argmax(scores, axis=1)

    n_seen = len(dataset.test_seen)
    seen_acc = per_class_top1(preds[:n_seen], labels[:n_seen], dataset.seen_classes)
    unseen_acc = per_class_top1(preds[n_seen:], labels[n_seen:], dataset.unseen_classes)

    per_class = {}
    for c in np.concatenate([dataset.seen_classes, dataset.unseen_classes]).tolist():
        mask = labels == c
        if mask.any():
            per_class[int(c)] = 100.0 * float((preds[mask] == c).sum() / mask.sum())

    record = None
    if with_ausuc:
        record = ausuc(scores, labels, dataset.seen_classes, dataset.unseen_classes, n_bias=n_bias)

    return EvalReport(mode=mode, seen_top1=seen_acc, unseen_top1=unseen_acc,
                      h_mean=harmonic_mean(seen_acc, unseen_acc),
                      per_class=per_class, ausuc=record)
