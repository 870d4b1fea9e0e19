"""Checkpoint directory format: manifest.json + a single binary blob.

The manifest maps parameter names to shape, dtype ("f64") and byte offset
into the blob; values are little-endian float64 in manifest (sorted-name)
order. Round trips are bit-exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .tensor import Tensor


def save_arrays(dir_path, named: dict[str, np.ndarray], bin_name: str = "params.bin") -> None:
    dir_path = Path(dir_path)
    dir_path.mkdir(parents=True, exist_ok=True)
    names = sorted(named)
    manifest = {"dtype": "f64", "bin": bin_name, "params": {}}
    offset = 0
    blobs = []
    for name in names:
        arr = np.ascontiguousarray(np.asarray(named[name], dtype=np.float64))
        manifest["params"][name] = {
            "shape": list(arr.shape),
            "dtype": "f64",
            "offset": offset,
        }
        raw = arr.astype("<f8").tobytes()
        offset += len(raw)
        blobs.append(raw)
    with open(dir_path / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
        f.write("\n")
    with open(dir_path / bin_name, "wb") as f:
        f.write(b"".join(blobs))


def load_arrays(dir_path) -> dict[str, np.ndarray]:
    dir_path = Path(dir_path)
    with open(dir_path / "manifest.json") as f:
        manifest = json.load(f)
    raw = (dir_path / manifest["bin"]).read_bytes()
    out = {}
    for name, meta in manifest["params"].items():
        shape = tuple(meta["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=meta["offset"])
        out[name] = arr.reshape(shape).astype(np.float64)
    return out


def save_params(dir_path, params: dict[str, Tensor], bin_name: str = "params.bin") -> None:
    save_arrays(dir_path, {k: v.data for k, v in params.items()}, bin_name)


def load_params_into(dir_path, params: dict[str, Tensor], subset: str | None = None,
                     strict: bool = True) -> list[str]:
    """Copy stored arrays into matching tensors of ``params``.

    ``subset`` restricts loading to names with that dotted prefix. Returns
    the names loaded; raises on shape mismatches, listing every offender.
    """
    stored = load_arrays(dir_path)
    loaded = []
    mismatched = []
    for name, arr in stored.items():
        if subset is not None and not (name == subset or name.startswith(subset + ".")):
            continue
        if name not in params:
            if strict:
                mismatched.append(f"{name}: not present in target model")
            continue
        if params[name].data.shape != arr.shape:
            mismatched.append(
                f"{name}: checkpoint {arr.shape} vs model {params[name].data.shape}"
            )
            continue
        params[name].data[...] = arr
        loaded.append(name)
    if mismatched:
        raise ValueError("checkpoint/model mismatch:\n  " + "\n  ".join(mismatched))
    return loaded
