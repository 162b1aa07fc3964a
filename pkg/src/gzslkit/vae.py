"""Dual variational autoencoder aligning visual features and class attributes.

Two Gaussian encoders map each modality into a shared latent space; two
decoders map back. Stage-1 training minimizes a composite of the per-modality
VAE term, a cross-modal L1 reconstruction term (decode one modality's latent
mean into the other modality), and a distribution-alignment term matching the
per-pair latent means and standard deviations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .dataio import GzslDataset
from .errors import ShapeError, TrainingDivergedError, UsageError
from .optim import Adam, ParameterSet, init_linear
from .rng import Rng
from .tensordir import read_tensor_dir, write_tensor_dir


@dataclass
class LatentGaussian:
    """Batch of diagonal Gaussians: mu and logvar are (n, Z) tensors."""

    mu: Tensor
    logvar: Tensor


@dataclass
class WeightSchedule:
    """Linear warm-up: weight(epoch) = rate * clamp(epoch - start, 0, end - start)."""

    rate: float
    start_epoch: int
    end_epoch: int

    def __post_init__(self):
        if self.start_epoch > self.end_epoch:
            raise UsageError(f"schedule start {self.start_epoch} > end {self.end_epoch}")
        if self.rate < 0:
            raise UsageError(f"schedule rate must be non-negative, got {self.rate}")

    def to_dict(self):
        return {"rate": self.rate, "start_epoch": self.start_epoch, "end_epoch": self.end_epoch}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["rate"]), int(d["start_epoch"]), int(d["end_epoch"]))


def schedule_weight(schedule: WeightSchedule, epoch: int) -> float:
    ramp = min(max(epoch - schedule.start_epoch, 0), schedule.end_epoch - schedule.start_epoch)
    return schedule.rate * ramp


@dataclass
class Stage1Config:
    epochs: int = 100
    batch_size: int = 50
    learning_rate: float = 1.5e-4
    latent_dim: int = 64
    enc_visual_hidden: int = 1560
    enc_semantic_hidden: int = 1450
    dec_visual_hidden: int = 1560
    dec_semantic_hidden: int = 660
    cm_schedule: WeightSchedule = field(default_factory=lambda: WeightSchedule(0.044, 21, 75))
    da_schedule: WeightSchedule = field(default_factory=lambda: WeightSchedule(0.0026, 0, 90))
    kl_schedule: WeightSchedule = field(default_factory=lambda: WeightSchedule(0.0026, 0, 90))
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise UsageError("epochs must be >= 0")
        if self.batch_size < 2:
            raise UsageError("batch size must be >= 2 (alignment needs paired statistics)")

    def to_dict(self):
        d = {k: getattr(self, k) for k in (
            "epochs", "batch_size", "learning_rate", "latent_dim",
            "enc_visual_hidden", "enc_semantic_hidden",
            "dec_visual_hidden", "dec_semantic_hidden", "seed")}
        d["cm_schedule"] = self.cm_schedule.to_dict()
        d["da_schedule"] = self.da_schedule.to_dict()
        d["kl_schedule"] = self.kl_schedule.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        kwargs = dict(d)
        for key in ("cm_schedule", "da_schedule", "kl_schedule"):
            if key in kwargs and isinstance(kwargs[key], dict):
                kwargs[key] = WeightSchedule.from_dict(kwargs[key])
        return cls(**kwargs)


class VaeModel:
    """Two encoder and two decoder MLPs (one hidden layer each) over a shared latent."""

    def __init__(self, x_dim: int, a_dim: int, z_dim: int = 64,
                 enc_visual_hidden: int = 1560, enc_semantic_hidden: int = 1450,
                 dec_visual_hidden: int = 1560, dec_semantic_hidden: int = 660,
                 rng: Optional[Rng] = None, dtype=np.float32):
        rng = rng if rng is not None else Rng(0)
        self.x_dim = x_dim
        self.a_dim = a_dim
        self.z_dim = z_dim
        self.hidden = {
            "enc_visual": enc_visual_hidden,
            "enc_semantic": enc_semantic_hidden,
            "dec_visual": dec_visual_hidden,
            "dec_semantic": dec_semantic_hidden,
        }
        self.dtype = np.dtype(dtype)
        self.params = ParameterSet()
        layouts = [
            ("enc_visual", x_dim, enc_visual_hidden, 2 * z_dim),
            ("enc_semantic", a_dim, enc_semantic_hidden, 2 * z_dim),
            ("dec_visual", z_dim, dec_visual_hidden, x_dim),
            ("dec_semantic", z_dim, dec_semantic_hidden, a_dim),
        ]
        for name, d_in, d_h, d_out in layouts:
            init_linear(self.params, f"{name}.hidden", d_in, d_h, rng.derive(name, "hidden"), dtype=dtype)
            init_linear(self.params, f"{name}.out", d_h, d_out, rng.derive(name, "out"), dtype=dtype)

    def _as_input(self, x, dim: int, what: str) -> Tensor:
        t = x if isinstance(x, Tensor) else Tensor(np.atleast_2d(np.asarray(x)), dtype=self.dtype)
        if t.value.ndim != 2 or t.value.shape[1] != dim:
            raise ShapeError(f"{what} batch must be (n, {dim}), got {t.value.shape}")
        return t

    def _mlp(self, name: str, t: Tensor) -> Tensor:
        p = self.params
        h = ad.linear_forward(t, p[f"{name}.hidden.w"], p[f"{name}.hidden.b"], "relu")
        return ad.linear(h, p[f"{name}.out.w"], p[f"{name}.out.b"])

    def encode_visual(self, x) -> LatentGaussian:
        out = self._mlp("enc_visual", self._as_input(x, self.x_dim, "visual"))
        return LatentGaussian(ad.slice_cols(out, 0, self.z_dim),
                              ad.slice_cols(out, self.z_dim, 2 * self.z_dim))

    def encode_semantic(self, a) -> LatentGaussian:
        out = self._mlp("enc_semantic", self._as_input(a, self.a_dim, "semantic"))
        return LatentGaussian(ad.slice_cols(out, 0, self.z_dim),
                              ad.slice_cols(out, self.z_dim, 2 * self.z_dim))

    def decode_visual(self, z) -> Tensor:
        return self._mlp("dec_visual", self._as_input(z, self.z_dim, "latent"))

    def decode_semantic(self, z) -> Tensor:
        return self._mlp("dec_semantic", self._as_input(z, self.z_dim, "latent"))

    def embed_visual_mu(self, x: np.ndarray) -> np.ndarray:
        """Deterministic test-time embedding: encoder mean, no sampling."""
        return self.encode_visual(x).mu.value


def vae_loss(model: VaeModel, x, a, rng: Rng, beta: float) -> Tensor:
    """Per-modality L1 reconstruction plus beta-weighted KL, batch mean."""
    x_t = model._as_input(x, model.x_dim, "visual")
    a_t = model._as_input(a, model.a_dim, "semantic")
    lat_x = model.encode_visual(x_t)
    lat_a = model.encode_semantic(a_t)
    total = _vae_term(model, lat_x, lat_a, x_t, a_t, rng, beta)
    _check_finite(total, "vae_loss")
    return total


def _vae_term(model, lat_x, lat_a, x_t, a_t, rng, beta) -> Tensor:
    z_x = ad.gaussian_sample(lat_x.mu, lat_x.logvar, rng)
    z_a = ad.gaussian_sample(lat_a.mu, lat_a.logvar, rng)
    terms = [
        ad.l1_recon(model.decode_visual(z_x), x_t.value),
        ad.kl_std_normal(lat_x.mu, lat_x.logvar),
        ad.l1_recon(model.decode_semantic(z_a), a_t.value),
        ad.kl_std_normal(lat_a.mu, lat_a.logvar),
    ]
    return ad.weighted_sum(terms, [1.0, beta, 1.0, beta])


def cross_modal_loss(model: VaeModel, x, a) -> Tensor:
    """L1 error decoding each modality's latent mean into the other modality."""
    x_t = model._as_input(x, model.x_dim, "visual")
    a_t = model._as_input(a, model.a_dim, "semantic")
    lat_x = model.encode_visual(x_t)
    lat_a = model.encode_semantic(a_t)
    total = _cross_modal_term(model, lat_x, lat_a, x_t, a_t)
    _check_finite(total, "cross_modal_loss")
    return total


def _cross_modal_term(model, lat_x, lat_a, x_t, a_t) -> Tensor:
    terms = [
        ad.l1_recon(model.decode_visual(lat_a.mu), x_t.value),
        ad.l1_recon(model.decode_semantic(lat_x.mu), a_t.value),
    ]
    return ad.weighted_sum(terms, [1.0, 1.0])


def dist_align_loss(lat_x: LatentGaussian, lat_a: LatentGaussian) -> Tensor:
    """Squared distance between paired latent means plus paired standard deviations."""
    terms = [
        ad.sum_sq_diff(lat_x.mu, lat_a.mu),
        ad.sum_sq_diff(ad.exp_half(lat_x.logvar), ad.exp_half(lat_a.logvar)),
    ]
    return ad.weighted_sum(terms, [1.0, 1.0])


def composite_loss(model: VaeModel, x, a, rng: Rng, beta: float,
                   gamma_cm: float, gamma_da: float):
    """Full stage-1 objective sharing one encoder pass per modality.

    Returns (total, parts) where parts holds the unweighted term values.
    """
    x_t = model._as_input(x, model.x_dim, "visual")
    a_t = model._as_input(a, model.a_dim, "semantic")
    lat_x = model.encode_visual(x_t)
    lat_a = model.encode_semantic(a_t)
    l_vae = _vae_term(model, lat_x, lat_a, x_t, a_t, rng, beta)
    l_cm = _cross_modal_term(model, lat_x, lat_a, x_t, a_t)
    l_da = dist_align_loss(lat_x, lat_a)
    total = ad.weighted_sum([l_vae, l_cm, l_da], [1.0, gamma_cm, gamma_da])
    parts = {"vae": l_vae.item(), "cm": l_cm.item(), "da": l_da.item()}
    return total, parts


def _check_finite(loss: Tensor, what: str) -> None:
    if not np.isfinite(loss.value):
        raise TrainingDivergedError(f"{what} is non-finite")


def train_stage1(dataset: GzslDataset, config: Stage1Config):
    """Train the dual VAE on the seen-class training pool.

    Returns (model, log); the log holds one record per epoch with the mean of
    each loss term and the scheduled weights in effect.
    """
    rng = Rng(config.seed)
    model = VaeModel(
        dataset.x_dim, dataset.a_dim, z_dim=config.latent_dim,
        enc_visual_hidden=config.enc_visual_hidden,
        enc_semantic_hidden=config.enc_semantic_hidden,
        dec_visual_hidden=config.dec_visual_hidden,
        dec_semantic_hidden=config.dec_semantic_hidden,
        rng=rng.derive("init"),
    )
    opt = Adam(model.params, lr=config.learning_rate)
    pool = dataset.training_pool()
    rng_shuffle = rng.derive("shuffle")
    rng_sample = rng.derive("sample")

    log = []
    for epoch in range(config.epochs):
        beta = schedule_weight(config.kl_schedule, epoch)
        gamma_cm = schedule_weight(config.cm_schedule, epoch)
        gamma_da = schedule_weight(config.da_schedule, epoch)
        perm = rng_shuffle.permutation(len(pool))
        sums = {"vae": 0.0, "cm": 0.0, "da": 0.0, "total": 0.0}
        batches = 0
        for start in range(0, len(pool), config.batch_size):
            idx = pool[perm[start:start + config.batch_size]]
            if len(idx) < 2:
                continue  # alignment terms need at least one pair
            x = dataset.features[idx]
            a = dataset.attributes[dataset.labels[idx]]
            total, parts = composite_loss(model, x, a, rng_sample, beta, gamma_cm, gamma_da)
            if not np.isfinite(total.value):
                raise TrainingDivergedError(f"non-finite loss at epoch {epoch}")
            opt.zero_grad()
            ad.backward(total)
            opt.step()
            for key, value in parts.items():
                sums[key] += value
            sums["total"] += total.item()
            batches += 1
        record = {"epoch": epoch, "beta": beta, "gamma_cm": gamma_cm, "gamma_da": gamma_da}
        for key in ("vae", "cm", "da", "total"):
            record[key] = sums[key] / max(batches, 1)
        log.append(record)
    return model, log


def save_model(model: VaeModel, path, config: Optional[Stage1Config] = None) -> None:
    meta = {
        "x_dim": model.x_dim,
        "a_dim": model.a_dim,
        "z_dim": model.z_dim,
        "hidden": dict(model.hidden),
        "config": config.to_dict() if config is not None else None,
    }
    write_tensor_dir(path, "vae-model", meta, model.params.state_dict())


def load_model(path) -> VaeModel:
    meta, arrays = read_tensor_dir(path, kind="vae-model")
    model = VaeModel(
        int(meta["x_dim"]), int(meta["a_dim"]), z_dim=int(meta["z_dim"]),
        enc_visual_hidden=int(meta["hidden"]["enc_visual"]),
        enc_semantic_hidden=int(meta["hidden"]["enc_semantic"]),
        dec_visual_hidden=int(meta["hidden"]["dec_visual"]),
        dec_semantic_hidden=int(meta["hidden"]["dec_semantic"]),
    )
    model.params.load_state_dict(arrays)
    return model
