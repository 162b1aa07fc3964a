"""Stage-2 training-set construction in the latent and reconstructed spaces.

Seen classes contribute latents sampled from the visual encoder applied to
their real training features; unseen classes contribute latents sampled from
the semantic encoder applied to their class attribute vector. Decoding the
same latents yields row-aligned sets in the reconstructed visual and
reconstructed semantic spaces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .dataio import GzslDataset
from .errors import GenerationError, UsageError
from .rng import Rng
from .tensordir import read_tensor_dir, write_tensor_dir
from .vae import VaeModel

SPACE_LATENT = "latent"
SPACE_RECON_VISUAL = "recon_visual"
SPACE_RECON_SEMANTIC = "recon_semantic"
SPACES = (SPACE_LATENT, SPACE_RECON_VISUAL, SPACE_RECON_SEMANTIC)


@dataclass
class LabeledEmbeddingSet:
    space: str
    embeddings: np.ndarray   # (M, d) float32
    labels: np.ndarray       # (M,) int64

    def __post_init__(self):
        if self.space not in SPACES:
            raise UsageError(f"unknown embedding space {self.space!r}")
        if self.embeddings.shape[0] != self.labels.shape[0]:
            raise UsageError(
                f"{self.embeddings.shape[0]} embeddings vs {self.labels.shape[0]} labels"
            )

    def __len__(self):
        return self.labels.shape[0]

    def subset(self, indices) -> "LabeledEmbeddingSet":
        idx = np.asarray(indices)
        return LabeledEmbeddingSet(self.space, self.embeddings[idx], self.labels[idx])


@dataclass
class GenConfig:
    per_seen_class: int = 200
    per_unseen_class: int = 400
    seed: int = 0

    def __post_init__(self):
        if self.per_seen_class <= 0 or self.per_unseen_class <= 0:
            raise UsageError("per-class sample counts must be positive")

    def to_dict(self):
        return {"per_seen_class": self.per_seen_class,
                "per_unseen_class": self.per_unseen_class, "seed": self.seed}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _sample_latents(model: VaeModel, encode, inputs: np.ndarray, rng: Rng) -> np.ndarray:
    lat = encode(inputs)
    z = ad.gaussian_sample(lat.mu, lat.logvar, rng)
    return z.value


def build_latent_trainset(model: VaeModel, dataset: GzslDataset,
                          config: GenConfig) -> LabeledEmbeddingSet:
    """Balanced labeled latents: per-class counts follow the config exactly."""
    rng = Rng(config.seed)
    pool = dataset.training_pool()
    pool_labels = dataset.labels[pool]

    chunks, labels = [], []
    for c in dataset.seen_classes.tolist():
        rows = pool[pool_labels == c]
        if len(rows) == 0:
            raise GenerationError(f"seen class {c} has no training samples")
        crng = rng.derive("seen", c)
        pick = crng.integers(0, len(rows), size=config.per_seen_class)
        feats = dataset.features[rows[np.asarray(pick)]]
        chunks.append(_sample_latents(model, model.encode_visual, feats, crng))
        labels.append(np.full(config.per_seen_class, c, dtype=np.int64))

    for c in dataset.unseen_classes.tolist():
        crng = rng.derive("unseen", c)
        attr = np.repeat(dataset.attributes[c][None, :], config.per_unseen_class, axis=0)
        chunks.append(_sample_latents(model, model.encode_semantic, attr, crng))
        labels.append(np.full(config.per_unseen_class, c, dtype=np.int64))

    return LabeledEmbeddingSet(SPACE_LATENT, np.concatenate(chunks, axis=0),
                               np.concatenate(labels))


def decode_trainsets(model: VaeModel, latent_set: LabeledEmbeddingSet):
    """Row-aligned reconstructed-visual and reconstructed-semantic sets."""
    if latent_set.space != SPACE_LATENT:
        raise UsageError(f"expected a {SPACE_LATENT!r} set, got {latent_set.space!r}")
    z = latent_set.embeddings
    recon_x = model.decode_visual(z).value
    recon_a = model.decode_semantic(z).value
    return (
        LabeledEmbeddingSet(SPACE_RECON_VISUAL, recon_x, latent_set.labels.copy()),
        LabeledEmbeddingSet(SPACE_RECON_SEMANTIC, recon_a, latent_set.labels.copy()),
    )


def save_embedding_set(emb_set: LabeledEmbeddingSet, path) -> None:
    write_tensor_dir(path, "embedding-set", {"space": emb_set.space},
                     {"embeddings": emb_set.embeddings,
                      "labels": emb_set.labels.astype(np.uint32)})


def load_embedding_set(path) -> LabeledEmbeddingSet:
    meta, arrays = read_tensor_dir(path, kind="embedding-set")
    return LabeledEmbeddingSet(meta["space"], arrays["embeddings"],
                               arrays["labels"].astype(np.int64))
