"""Read res101.mat / att_splits.mat pairs in MAT v7 or v7.3 (HDF5) layout.

MATLAB stores arrays column-major, so the two container versions present the
same logical matrix with opposite axis order: scipy.io.loadmat preserves the
MATLAB dims (features are X x N) while h5py sees the HDF5 dims reversed
(N x X). Each read path normalizes to samples-as-rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

_HDF5_MAGIC = b"\x89HDF\r\n\x1a\n"


class FormatError(ValueError):
    """Container is not a readable MAT v7 / v7.3 file."""


@dataclass
class MatBundle:
    """Raw benchmark content, still 1-based, features as N x X rows."""

    features: np.ndarray       # (N, X)
    labels: np.ndarray         # (N,), 1-based class ids
    attributes: np.ndarray     # (C, A)
    trainval_loc: np.ndarray   # 1-based sample indices
    test_seen_loc: np.ndarray
    test_unseen_loc: np.ndarray
    val_loc: Optional[np.ndarray] = None


def sniff_mat_version(path) -> str:
    """Return "v7" or "v73"; anything else is a FormatError."""
    with open(path, "rb") as fh:
        head = fh.read(1024)
    if head[:116].startswith(b"MATLAB 5.0"):
        return "v7"
    # real v7.3 files carry the HDF5 signature after a 512-byte user block;
    # plain HDF5 files carry it at offset 0
    if head[:8] == _HDF5_MAGIC or head[512:520] == _HDF5_MAGIC:
        return "v73"
    raise FormatError(f"{path}: unknown MAT version (neither MATLAB 5.0 nor HDF5)")


def _v7_vars(path) -> dict:
    from scipy.io import loadmat

    return loadmat(path)


def _v73_vars(path) -> dict:
    import h5py

    out = {}
    with h5py.File(path, "r") as fh:
        for key in fh:
            value = fh[key]
            if hasattr(value, "shape"):
                try:
                    out[key] = np.array(value)
                except TypeError:
                    continue  # cell arrays (class names) are not needed
    return out


def _pick(variables: dict, name: str, path) -> np.ndarray:
    if name not in variables:
        raise FormatError(f"{path}: missing variable {name!r}")
    return np.asarray(variables[name])


def _as_index_vector(arr: np.ndarray) -> np.ndarray:
    return np.asarray(arr).ravel().astype(np.int64)


def load_mat_bundle(res101_path, att_splits_path) -> MatBundle:
    res_version = sniff_mat_version(res101_path)
    split_version = sniff_mat_version(att_splits_path)

    res_vars = _v7_vars(res101_path) if res_version == "v7" else _v73_vars(res101_path)
    split_vars = _v7_vars(att_splits_path) if split_version == "v7" else _v73_vars(att_splits_path)

    features = _pick(res_vars, "features", res101_path)
    labels = _as_index_vector(_pick(res_vars, "labels", res101_path))
    if res_version == "v7":
        features = features.T  # MATLAB X x N -> rows per sample
    if features.shape[0] != labels.shape[0]:
        raise FormatError(
            f"{res101_path}: {features.shape[0]} feature rows vs {labels.shape[0]} labels"
        )

    attributes = _pick(split_vars, "att", att_splits_path)
    if split_version == "v7":
        attributes = attributes.T  # MATLAB A x C -> rows per class

    def loc(name, required=True):
        if name not in split_vars:
            if required:
                raise FormatError(f"{att_splits_path}: missing variable {name!r}")
            return None
        return _as_index_vector(split_vars[name])

    return MatBundle(
        features=features,
        labels=labels,
        attributes=attributes,
        trainval_loc=loc("trainval_loc"),
        test_seen_loc=loc("test_seen_loc"),
        test_unseen_loc=loc("test_unseen_loc"),
        val_loc=loc("val_loc", required=False),
    )
