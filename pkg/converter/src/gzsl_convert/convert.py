"""Build a GZB directory from a MatBundle.

The GZB contract (shared with the training toolkit): `manifest.json` with
keys {version: 1, name, dims: {X, A, C, N}, tensors, seen_classes,
unseen_classes, splits: {train, val?, test_seen, test_unseen}, checksums},
next to headerless little-endian row-major `features.f32`, `attributes.f32`,
`labels.u32`. Split lists are pairwise disjoint; `val` holds the
validation-class samples carved out of the training pool, so train+val
together is the full published training set.
"""

from __future__ import annotations

import json
import zlib
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .reader import FormatError, MatBundle, load_mat_bundle


class ConversionError(ValueError):
    """Bundle content violates the benchmark's sanity bounds."""


class GzbSummary(NamedTuple):
    n_seen_classes: int
    n_unseen_classes: int
    n_train: int
    n_test_seen: int
    n_test_unseen: int


def _check_loc(name: str, loc: np.ndarray, n: int) -> None:
    if loc.size == 0:
        raise ConversionError(f"{name} is empty")
    if loc.min() < 1 or loc.max() > n:
        raise ConversionError(f"{name} has indices outside [1, {n}]")


def bundle_to_arrays(bundle: MatBundle, name: str) -> dict:
    """Validate the bundle and produce the GZB payload (0-based, f32/u32)."""
    n, x_dim = bundle.features.shape
    c, a_dim = bundle.attributes.shape

    labels = bundle.labels
    if labels.min() < 1 or labels.max() > c:
        raise ConversionError(
            f"labels span [{labels.min()}, {labels.max()}], expected within [1, {c}]"
        )

    _check_loc("trainval_loc", bundle.trainval_loc, n)
    _check_loc("test_seen_loc", bundle.test_seen_loc, n)
    _check_loc("test_unseen_loc", bundle.test_unseen_loc, n)

    trainval = set((bundle.trainval_loc - 1).tolist())
    test_seen = (bundle.test_seen_loc - 1).tolist()
    test_unseen = (bundle.test_unseen_loc - 1).tolist()
    test_all = set(test_seen) | set(test_unseen)
    if trainval & test_all:
        raise ConversionError("trainval overlaps the test splits")
    if set(test_seen) & set(test_unseen):
        raise ConversionError("test_seen overlaps test_unseen")

    # the validation samples are a subset of the training pool; keep them as
    # a separate split so train/val/test lists stay pairwise disjoint while
    # train+val still equals the published training set
    if bundle.val_loc is not None:
        _check_loc("val_loc", bundle.val_loc, n)
        val = sorted(set((bundle.val_loc - 1).tolist()) - test_all)
        if not set(val) <= trainval:
            raise ConversionError("val_loc contains samples outside the training pool")
    else:
        val = []
    train = sorted(trainval - set(val))

    labels0 = labels - 1
    pool = train + val
    seen = sorted(set(labels0[pool].tolist()) | set(labels0[test_seen].tolist()))
    unseen = sorted(set(labels0[test_unseen].tolist()))
    if set(seen) & set(unseen):
        raise ConversionError(f"seen and unseen classes overlap: {sorted(set(seen) & set(unseen))}")
    if set(seen) | set(unseen) != set(range(c)):
        raise ConversionError(
            f"attribute table has {c} classes but the splits reference {len(seen) + len(unseen)}"
        )

    splits = {"train": train, "test_seen": test_seen, "test_unseen": test_unseen}
    if val:
        splits["val"] = val
    return {
        "name": name,
        "features": np.ascontiguousarray(bundle.features, dtype="<f4"),
        "attributes": np.ascontiguousarray(bundle.attributes, dtype="<f4"),
        "labels": np.ascontiguousarray(labels0, dtype="<u4"),
        "splits": splits,
        "seen_classes": seen,
        "unseen_classes": unseen,
        "dims": {"X": x_dim, "A": a_dim, "C": c, "N": n},
    }


def write_gzb_dir(payload: dict, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tensors, checksums = [], {}
    for key, tag in (("features", "f32"), ("attributes", "f32"), ("labels", "u32")):
        arr = payload[key]
        fname = f"{key}.{tag}"
        arr.tofile(out_dir / fname)
        tensors.append({"file": fname, "dtype": tag, "shape": list(arr.shape)})
        checksums[fname] = f"{zlib.crc32((out_dir / fname).read_bytes()):08x}"
    manifest = {
        "version": 1,
        "name": payload["name"],
        "dims": payload["dims"],
        "tensors": tensors,
        "seen_classes": payload["seen_classes"],
        "unseen_classes": payload["unseen_classes"],
        "splits": payload["splits"],
        "checksums": checksums,
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8"
    )


def convert(res101_path, att_splits_path, out_dir, name: str | None = None) -> Path:
    """Full conversion; returns the GZB directory path."""
    bundle = load_mat_bundle(res101_path, att_splits_path)
    if name is None:
        name = Path(out_dir).name or "converted"
    payload = bundle_to_arrays(bundle, name)
    write_gzb_dir(payload, out_dir)
    return Path(out_dir)


def summarize_gzb_dir(gzb_dir) -> GzbSummary:
    """Counts straight from a GZB manifest: train counts the full pool."""
    manifest = json.loads((Path(gzb_dir) / "manifest.json").read_text(encoding="utf-8"))
    splits = manifest["splits"]
    return GzbSummary(
        n_seen_classes=len(manifest["seen_classes"]),
        n_unseen_classes=len(manifest["unseen_classes"]),
        n_train=len(splits["train"]) + len(splits.get("val", [])),
        n_test_seen=len(splits["test_seen"]),
        n_test_unseen=len(splits["test_unseen"]),
    )
