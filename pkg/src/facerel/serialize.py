"""A small self-describing binary container: JSON header plus raw arrays.

Layout: 8-byte magic, little-endian uint64 header length, UTF-8 JSON header,
then the raw bytes of each array in the header's listed order.  The header
carries a format version, a container kind, caller metadata, and the name /
shape / dtype of every array.  Writing the same content twice produces
byte-identical files: the header is dumped with sorted keys and arrays are
stored in sorted-name order, little-endian, C-contiguous.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"FACEREL1"
FORMAT_VERSION = 1

_ALLOWED_DTYPES = {"<f8", "<f4", "<i8"}


def save_container(path, kind: str, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    entries = []
    blobs = []
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        if arr.dtype == np.float64:
            code = "<f8"
        elif arr.dtype == np.float32:
            code = "<f4"
        elif arr.dtype == np.int64:
            code = "<i8"
        else:
            raise ValueError(f"array {name!r} has unsupported dtype {arr.dtype}")
        arr = arr.astype(np.dtype(code), copy=False)
        entries.append({"name": name, "shape": list(arr.shape), "dtype": code})
        blobs.append(arr.tobytes(order="C"))

    header = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "meta": meta,
        "arrays": entries,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(header_bytes)))
        f.write(header_bytes)
        for blob in blobs:
            f.write(blob)


def load_container(path) -> tuple[str, dict, dict[str, np.ndarray]]:
    path = Path(path)
    with open(path, "rb") as f:
        magic = f.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"{path}: not a facerel container (bad magic)")
        (header_len,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(header_len).decode("utf-8"))
        if header.get("format_version") != FORMAT_VERSION:
            raise ValueError(
                f"{path}: unsupported container format version {header.get('format_version')}"
            )
        arrays = {}
        for entry in header["arrays"]:
            if entry["dtype"] not in _ALLOWED_DTYPES:
                raise ValueError(f"{path}: unsupported dtype {entry['dtype']}")
            count = int(np.prod(entry["shape"])) if entry["shape"] else 1
            dt = np.dtype(entry["dtype"])
            raw = f.read(count * dt.itemsize)
            if len(raw) != count * dt.itemsize:
                raise ValueError(f"{path}: truncated array data for {entry['name']!r}")
            arrays[entry["name"]] = np.frombuffer(raw, dtype=dt).reshape(entry["shape"]).copy()
    return header["kind"], header["meta"], arrays
