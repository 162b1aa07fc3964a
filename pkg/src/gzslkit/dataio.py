"""The GZB dataset container: features, labels, per-class attributes, splits.

On disk a GZB directory holds `manifest.json` plus headerless little-endian
row-major binaries:

    manifest.json     {version: 1, name, dims: {X, A, C, N},
                       tensors: [{file, dtype: "f32"|"u32", shape}],
                       seen_classes: [u32], unseen_classes: [u32],
                       splits: {train, val?, test_seen, test_unseen},
                       checksums?: {file: crc32-hex}}
    features.f32      N x X visual features
    attributes.f32    C x A class attribute vectors (row index == class id)
    labels.u32        N class ids, 0-based

Split index lists are stored inline in the manifest and are pairwise
disjoint; `val`, when present, is the validation portion of the training
pool (train and val together form the full training sample set).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional

import json

import numpy as np

from .errors import FormatError, ValidationError
from .tensordir import crc32_file, read_array, write_array

_SPLITS = ("train", "val", "test_seen", "test_unseen")


class DatasetSummary(NamedTuple):
    n_seen_classes: int
    n_unseen_classes: int
    n_train: int
    n_test_seen: int
    n_test_unseen: int


@dataclass
class GzslDataset:
    """In-memory dataset with the seen/unseen split contract enforced."""

    name: str
    features: np.ndarray          # (N, X) float32
    labels: np.ndarray            # (N,) int64, 0-based class ids
    attributes: np.ndarray        # (C, A) float32, row per class id
    train: np.ndarray             # sample indices, seen classes only
    test_seen: np.ndarray
    test_unseen: np.ndarray
    seen_classes: np.ndarray      # sorted class ids
    unseen_classes: np.ndarray
    val: Optional[np.ndarray] = field(default=None)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def x_dim(self) -> int:
        return self.features.shape[1]

    @property
    def a_dim(self) -> int:
        return self.attributes.shape[1]

    @property
    def n_classes(self) -> int:
        return self.attributes.shape[0]

    def training_pool(self) -> np.ndarray:
        """All training-sample indices: train plus val when present."""
        if self.val is None or len(self.val) == 0:
            return self.train
        return np.concatenate([self.train, self.val])

    def validate(self) -> None:
        n, c = self.n_samples, self.n_classes
        if self.labels.shape != (n,):
            raise ValidationError(f"labels shape {self.labels.shape} != ({n},)")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= c):
            bad = int(np.argmax((self.labels < 0) | (self.labels >= c)))
            raise ValidationError(f"label {int(self.labels[bad])} at sample {bad} outside [0, {c})")

        seen = set(int(x) for x in self.seen_classes)
        unseen = set(int(x) for x in self.unseen_classes)
        overlap = seen & unseen
        if overlap:
            raise ValidationError(f"seen and unseen class sets overlap: {sorted(overlap)}")
        if seen | unseen != set(range(c)):
            raise ValidationError(
                f"attribute table has {c} rows but seen+unseen classes are {sorted(seen | unseen)}"
            )

        taken: dict[int, str] = {}
        for split_name in _SPLITS:
            idx = getattr(self, split_name)
            if idx is None:
                continue
            for i in np.asarray(idx).tolist():
                if not 0 <= i < n:
                    raise ValidationError(f"{split_name} index {i} outside [0, {n})")
                if i in taken:
                    raise ValidationError(
                        f"index {i} appears in both {taken[i]} and {split_name}"
                    )
                taken[i] = split_name

        for split_name, allowed, domain in (
            ("train", seen, "seen"),
            ("val", seen, "seen"),
            ("test_seen", seen, "seen"),
            ("test_unseen", unseen, "unseen"),
        ):
            idx = getattr(self, split_name)
            if idx is None or len(idx) == 0:
                continue
            lab = self.labels[np.asarray(idx)]
            ok = np.isin(lab, sorted(allowed))
            if not ok.all():
                pos = int(np.argmin(ok))
                raise ValidationError(
                    f"{split_name} index {int(np.asarray(idx)[pos])} has label "
                    f"{int(lab[pos])}, which is not a {domain} class"
                )


def summarize(dataset: GzslDataset) -> DatasetSummary:
    """Class and sample counts; n_train counts the full training pool."""
    n_val = 0 if dataset.val is None else len(dataset.val)
    return DatasetSummary(
        n_seen_classes=len(dataset.seen_classes),
        n_unseen_classes=len(dataset.unseen_classes),
        n_train=len(dataset.train) + n_val,
        n_test_seen=len(dataset.test_seen),
        n_test_unseen=len(dataset.test_unseen),
    )


def _index_array(values) -> np.ndarray:
    return np.asarray(values, dtype=np.int64)


def write_gzb(dataset: GzslDataset, directory) -> None:
    """Validate, then write manifest plus binaries. Nothing is written on failure."""
    dataset.validate()
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    arrays = {
        "features": np.ascontiguousarray(dataset.features, dtype="<f4"),
        "attributes": np.ascontiguousarray(dataset.attributes, dtype="<f4"),
        "labels": np.ascontiguousarray(dataset.labels, dtype="<u4"),
    }
    tensors = []
    checksums = {}
    for name, arr in arrays.items():
        tag = "u32" if arr.dtype.kind == "u" else "f32"
        fname = f"{name}.{tag}"
        write_array(directory / fname, arr)
        tensors.append({"file": fname, "dtype": tag, "shape": list(arr.shape)})
        checksums[fname] = crc32_file(directory / fname)

    splits = {
        "train": dataset.train.tolist(),
        "test_seen": dataset.test_seen.tolist(),
        "test_unseen": dataset.test_unseen.tolist(),
    }
    if dataset.val is not None:
        splits["val"] = dataset.val.tolist()

    manifest = {
        "version": 1,
        "name": dataset.name,
        "dims": {
            "X": dataset.x_dim,
            "A": dataset.a_dim,
            "C": dataset.n_classes,
            "N": dataset.n_samples,
        },
        "tensors": tensors,
        "seen_classes": dataset.seen_classes.tolist(),
        "unseen_classes": dataset.unseen_classes.tolist(),
        "splits": splits,
        "checksums": checksums,
    }
    (directory / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8"
    )


def load_gzb(directory) -> GzslDataset:
    """Load and fully validate a GZB directory."""
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no manifest.json under {directory}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{manifest_path}: invalid JSON ({exc})") from exc

    if manifest.get("version") != 1:
        raise FormatError(f"unsupported GZB version {manifest.get('version')!r}")
    for key in ("name", "dims", "tensors", "seen_classes", "unseen_classes", "splits"):
        if key not in manifest:
            raise FormatError(f"manifest missing required key {key!r}")

    dims = manifest["dims"]
    try:
        x_dim, a_dim, n_classes, n_samples = (int(dims[k]) for k in ("X", "A", "C", "N"))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"manifest dims malformed: {dims!r}") from exc

    entries = {e["file"].rsplit(".", 1)[0]: e for e in manifest["tensors"]}
    for required in ("features", "attributes", "labels"):
        if required not in entries:
            raise FormatError(f"manifest declares no {required!r} tensor")

    checksums = manifest.get("checksums") or {}
    arrays = {}
    for name, entry in entries.items():
        fpath = directory / entry["file"]
        if not fpath.exists():
            raise FileNotFoundError(f"tensor file missing: {fpath}")
        if entry["file"] in checksums:
            actual = crc32_file(fpath)
            if actual != checksums[entry["file"]]:
                raise FormatError(
                    f"{entry['file']}: checksum {actual} != declared {checksums[entry['file']]}"
                )
        arrays[name] = read_array(fpath, entry["dtype"], entry["shape"])

    features, attributes, labels = arrays["features"], arrays["attributes"], arrays["labels"]
    if features.shape != (n_samples, x_dim):
        raise FormatError(f"features shape {features.shape} != dims ({n_samples}, {x_dim})")
    if attributes.shape != (n_classes, a_dim):
        raise FormatError(f"attributes shape {attributes.shape} != dims ({n_classes}, {a_dim})")
    if labels.shape != (n_samples,):
        raise FormatError(f"labels shape {labels.shape} != ({n_samples},)")

    splits = manifest["splits"]
    for required in ("train", "test_seen", "test_unseen"):
        if required not in splits:
            raise FormatError(f"splits missing required list {required!r}")

    dataset = GzslDataset(
        name=str(manifest["name"]),
        features=features.astype(np.float32, copy=False),
        labels=labels.astype(np.int64),
        attributes=attributes.astype(np.float32, copy=False),
        train=_index_array(splits["train"]),
        val=_index_array(splits["val"]) if "val" in splits else None,
        test_seen=_index_array(splits["test_seen"]),
        test_unseen=_index_array(splits["test_unseen"]),
        seen_classes=np.sort(_index_array(manifest["seen_classes"])),
        unseen_classes=np.sort(_index_array(manifest["unseen_classes"])),
    )
    dataset.validate()
    return dataset


def datasets_equal(a: GzslDataset, b: GzslDataset) -> bool:
    """Field-by-field equality; float payloads compared bit-exactly."""
    if a.name != b.name:
        return False
    for attr in ("features", "labels", "attributes", "train", "test_seen",
                 "test_unseen", "seen_classes", "unseen_classes"):
        if not np.array_equal(getattr(a, attr), getattr(b, attr)):
            return False
    if (a.val is None) != (b.val is None):
        return False
    if a.val is not None and not np.array_equal(a.val, b.val):
        return False
    return True
