"""Checkpoint files: a trunk architecture plus every named parameter.

Save -> load round-trips are bit-exact, and saving unchanged content twice
yields byte-identical files (see ``serialize``).  The parameter insertion
order is recorded so a reloaded set iterates exactly like the original.
"""

from __future__ import annotations

import numpy as np

from .net import NetworkSpec
from .serialize import load_container, save_container
from .tensor import ParameterSet, Tensor


def save_checkpoint(path, spec: NetworkSpec, params: ParameterSet, extra: dict | None = None):
    meta = {
        "network": spec.to_dict(),
        "param_order": params.names(),
        "extra": extra or {},
    }
    arrays = {name: t.data for name, t in params.items()}
    save_container(path, "checkpoint", meta, arrays)


def load_checkpoint(path) -> tuple[NetworkSpec, ParameterSet, dict]:
    kind, meta, arrays = load_container(path)
    if kind != "checkpoint":
        raise ValueError(f"{path}: container holds {kind!r}, not a checkpoint")
    spec = NetworkSpec.from_dict(meta["network"])
    params = ParameterSet()
    for name in meta["param_order"]:
        if name not in arrays:
            raise ValueError(f"{path}: parameter {name!r} listed but missing")
        data = arrays[name]
        params.add(name, Tensor(data, np.zeros_like(data)))
    return spec, params, meta.get("extra", {})
