"""GZSL toolkit: cross-modal VAE, calibrated multi-space classifier ensemble,
and the seen/unseen evaluation protocol."""

__version__ = "0.1.0"

from .dataio import DatasetSummary, GzslDataset, load_gzb, summarize, write_gzb
from .ensemble import (CalibratedLinearClassifier, ClassifierConfig, EnsembleConfig,
                       calibrate_temperature, ensemble_predict, softmax_with_temperature,
                       stratified_holdout_split, train_softmax_classifier)
from .latentgen import (GenConfig, LabeledEmbeddingSet, build_latent_trainset,
                        decode_trainsets)
from .metrics import (AusucResult, EvalReport, ausuc, class_distance_matrix,
                      evaluate, harmonic_mean, per_class_top1)
from .rng import Rng
from .synthetic import make_synthetic_dataset
from .vae import (LatentGaussian, Stage1Config, VaeModel, WeightSchedule,
                  cross_modal_loss, dist_align_loss, load_model, save_model,
                  schedule_weight, train_stage1, vae_loss)

__all__ = [
    "AusucResult", "CalibratedLinearClassifier", "ClassifierConfig", "DatasetSummary",
    "EnsembleConfig", "EvalReport", "GenConfig", "GzslDataset", "LabeledEmbeddingSet",
    "LatentGaussian", "Rng", "Stage1Config", "VaeModel", "WeightSchedule", "ausuc",
    "build_latent_trainset", "calibrate_temperature", "class_distance_matrix",
    "cross_modal_loss", "decode_trainsets", "dist_align_loss", "ensemble_predict",
    "evaluate", "harmonic_mean", "load_gzb", "load_model", "make_synthetic_dataset",
    "per_class_top1", "save_model", "schedule_weight", "softmax_with_temperature",
    "stratified_holdout_split", "summarize", "train_softmax_classifier",
    "train_stage1", "vae_loss", "write_gzb",
]
