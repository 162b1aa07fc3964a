"""Raw little-endian tensor files plus a generic manifest-described directory.

Used for model/classifier checkpoints and generated-set dumps. The dataset
container in `dataio` shares the same primitives but pins its own manifest
schema.
"""

from __future__ import annotations

import json
import zlib
from pathlib import Path

import numpy as np

from .errors import FormatError

_DTYPES = {"f32": np.dtype("<f4"), "u32": np.dtype("<u4")}


def dtype_tag(arr: np.ndarray) -> str:
    if arr.dtype.kind == "f":
        return "f32"
    if arr.dtype.kind in "iu":
        return "u32"
    raise FormatError(f"unsupported array dtype {arr.dtype}")


def write_array(path: Path, arr: np.ndarray) -> None:
    tag = dtype_tag(arr)
    np.ascontiguousarray(arr, dtype=_DTYPES[tag]).tofile(path)


def read_array(path: Path, tag: str, shape) -> np.ndarray:
    if tag not in _DTYPES:
        raise FormatError(f"unknown tensor dtype {tag!r} in manifest")
    dtype = _DTYPES[tag]
    shape = tuple(int(s) for s in shape)
    expected = int(np.prod(shape)) * dtype.itemsize
    actual = path.stat().st_size
    if actual != expected:
        raise FormatError(
            f"{path.name}: declared shape {shape} needs {expected} bytes, file has {actual}"
        )
    return np.fromfile(path, dtype=dtype).reshape(shape)


def crc32_file(path: Path) -> str:
    crc = 0
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            crc = zlib.crc32(chunk, crc)
    return f"{crc:08x}"


def write_tensor_dir(path, kind: str, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    tensors = []
    for name, arr in arrays.items():
        tag = dtype_tag(arr)
        fname = f"{name}.{tag}"
        write_array(path / fname, arr)
        tensors.append({"file": fname, "dtype": tag, "shape": list(arr.shape)})
    manifest = {"version": 1, "kind": kind, "meta": meta, "tensors": tensors}
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")


def read_tensor_dir(path, kind: str | None = None) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no manifest.json under {path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{manifest_path}: invalid JSON ({exc})") from exc
    if kind is not None and manifest.get("kind") != kind:
        raise FormatError(f"{path}: expected kind {kind!r}, found {manifest.get('kind')!r}")
    arrays = {}
    for entry in manifest.get("tensors", []):
        name = entry["file"].rsplit(".", 1)[0]
        arrays[name] = read_array(path / entry["file"], entry["dtype"], entry["shape"])
    return manifest.get("meta", {}), arrays
