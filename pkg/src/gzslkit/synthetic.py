"""Synthetic GZSL datasets for demos and end-to-end verification.

Class attribute vectors are drawn at random and mapped through a fixed
nonlinear function to a visual-space mean, so unseen-class features are
predictable from attributes alone: the property a cross-modal model needs.
"""

from __future__ import annotations

import numpy as np

from .dataio import GzslDataset
from .rng import Rng


def make_synthetic_dataset(n_seen: int = 8, n_unseen: int = 4, x_dim: int = 32,
                           a_dim: int = 8, samples_per_class: int = 100,
                           noise: float = 0.3, train_fraction: float = 0.75,
                           unseen_attr_scale: float = 1.0,
                           seed: int = 0, name: str = "synthetic") -> GzslDataset:
    """Build a labeled GZSL dataset with Gaussian classes.

    unseen_attr_scale > 1 pushes unseen-class attribute vectors outside the
    region spanned by the seen classes, putting the cross-modal model in an
    extrapolation regime like the real benchmarks.
    """
    rng = Rng(seed)
    n_classes = n_seen + n_unseen

    attributes = rng.standard_normal((n_classes, a_dim), dtype=np.float64)
    attributes[n_seen:] *= unseen_attr_scale
    w1 = rng.standard_normal((a_dim, 2 * x_dim), dtype=np.float64) / np.sqrt(a_dim)
    w2 = rng.standard_normal((2 * x_dim, x_dim), dtype=np.float64) / np.sqrt(2 * x_dim)
    class_means = np.tanh(attributes @ w1) @ w2

    features = np.zeros((n_classes * samples_per_class, x_dim), dtype=np.float32)
    labels = np.zeros(n_classes * samples_per_class, dtype=np.int64)
    for c in range(n_classes):
        lo = c * samples_per_class
        eps = rng.derive("noise", c).standard_normal((samples_per_class, x_dim), dtype=np.float64)
        features[lo:lo + samples_per_class] = (class_means[c] + noise * eps).astype(np.float32)
        labels[lo:lo + samples_per_class] = c

    train, test_seen, test_unseen = [], [], []
    n_train = int(round(train_fraction * samples_per_class))
    for c in range(n_classes):
        lo = c * samples_per_class
        rows = list(range(lo, lo + samples_per_class))
        if c < n_seen:
            train.extend(rows[:n_train])
            test_seen.extend(rows[n_train:])
        else:
            test_unseen.extend(rows)

    dataset = GzslDataset(
        name=name,
        features=features,
        labels=labels,
        attributes=attributes.astype(np.float32),
        train=np.array(train, dtype=np.int64),
        test_seen=np.array(test_seen, dtype=np.int64),
        test_unseen=np.array(test_unseen, dtype=np.int64),
        seen_classes=np.arange(n_seen, dtype=np.int64),
        unseen_classes=np.arange(n_seen, n_classes, dtype=np.int64),
    )
    dataset.validate()
    return dataset
