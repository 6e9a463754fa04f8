"""Network assembly: layer descriptions, parameter initialization, and the
forward/backward walk through a conv/pool/LRN/FC trunk.

A trunk maps a face image (plus, optionally, a bridging descriptor) to a flat
feature vector.  The descriptor joins the data path exactly once, concatenated
to the flattened conv features at the input of the first fully-connected
layer.  Zeroing the descriptor reduces the trunk to its image-only variant
without changing any parameter shape.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .ops import (
    conv_backward,
    conv_forward,
    fc_backward,
    fc_forward,
    lrn_backward,
    lrn_forward,
    maxpool_backward,
    maxpool_forward,
    relu,
    relu_backward,
)
from .tensor import ParameterSet, Tensor

LAYER_KINDS = ("conv", "maxpool", "lrn", "fc", "relu")


@dataclass(frozen=True)
class LayerSpec:
    """One trunk layer; which fields apply depends on ``kind``."""

    kind: str
    kernel: int | None = None
    filters: int | None = None
    out_dim: int | None = None
    stride: int = 1
    lrn_n: int | None = None
    lrn_k: float | None = None
    lrn_alpha: float | None = None
    lrn_beta: float | None = None

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.kind == "conv":
            if not (self.kernel and self.kernel >= 1 and self.filters and self.filters >= 1):
                raise ValueError("conv layer needs kernel >= 1 and filters >= 1")
        elif self.kind == "maxpool":
            if not (self.kernel and self.kernel >= 1):
                raise ValueError("maxpool layer needs kernel >= 1")
        elif self.kind == "fc":
            if not (self.out_dim and self.out_dim >= 1):
                raise ValueError("fc layer needs out_dim >= 1")
        elif self.kind == "lrn":
            if self.lrn_n is None or self.lrn_n < 1:
                raise ValueError("lrn layer needs window depth n >= 1")
            if self.lrn_k is None or self.lrn_alpha is None or self.lrn_beta is None:
                raise ValueError("lrn layer needs k, alpha, beta")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        for key in ("kernel", "filters", "out_dim", "lrn_n", "lrn_k", "lrn_alpha", "lrn_beta"):
            v = getattr(self, key)
            if v is not None:
                d[key] = v
        if self.stride != 1:
            d["stride"] = self.stride
        return d

    @staticmethod
    def from_dict(d: dict) -> "LayerSpec":
        return LayerSpec(**d)


def conv_spec(kernel: int, filters: int, stride: int = 1) -> LayerSpec:
    return LayerSpec("conv", kernel=kernel, filters=filters, stride=stride)


def pool_spec(kernel: int, stride: int) -> LayerSpec:
    return LayerSpec("maxpool", kernel=kernel, stride=stride)


def lrn_spec(n: int = 5, k: float = 2.0, alpha: float = 1e-4, beta: float = 0.75) -> LayerSpec:
    return LayerSpec("lrn", lrn_n=n, lrn_k=k, lrn_alpha=alpha, lrn_beta=beta)


def fc_spec(out_dim: int) -> LayerSpec:
    return LayerSpec("fc", out_dim=out_dim)


def relu_spec() -> LayerSpec:
    return LayerSpec("relu")


@dataclass(frozen=True)
class NetworkSpec:
    """A trunk architecture: input geometry, layer stack, descriptor width."""

    input_shape: tuple[int, int, int]
    layers: tuple[LayerSpec, ...]
    bridge_dim: int = 0

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(v) for v in self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))
        if len(self.input_shape) != 3 or any(v < 1 for v in self.input_shape):
            raise ValueError(f"input_shape must be (C,H,W) of positive ints, got {self.input_shape}")
        if self.bridge_dim < 0:
            raise ValueError("bridge_dim must be >= 0")
        self.trace()  # validates feasibility

    def trace(self) -> list[tuple[int, ...]]:
        """Shape after every layer; raises if any layer cannot be placed."""
        shapes: list[tuple[int, ...]] = []
        cur: tuple[int, ...] = self.input_shape
        seen_fc = False
        for idx, layer in enumerate(self.layers):
            where = f"layer {idx} ({layer.kind})"
            if layer.kind in ("conv", "maxpool", "lrn") and len(cur) != 3:
                raise ValueError(f"{where}: requires a spatial (C,H,W) input, have {cur}")
            if layer.kind == "conv":
                c, h, w = cur
                if h < layer.kernel or w < layer.kernel:
                    raise ValueError(f"{where}: kernel {layer.kernel} does not fit {h}x{w}")
                cur = (
                    layer.filters,
                    (h - layer.kernel) // layer.stride + 1,
                    (w - layer.kernel) // layer.stride + 1,
                )
            elif layer.kind == "maxpool":
                c, h, w = cur
                if h < layer.kernel or w < layer.kernel:
                    raise ValueError(f"{where}: kernel {layer.kernel} does not fit {h}x{w}")
                cur = (
                    c,
                    (h - layer.kernel) // layer.stride + 1,
                    (w - layer.kernel) // layer.stride + 1,
                )
            elif layer.kind == "fc":
                if not seen_fc and len(cur) == 3:
                    flat = cur[0] * cur[1] * cur[2] + self.bridge_dim
                else:
                    flat = cur[-1]
                cur = (layer.out_dim,)
                seen_fc = True
            # lrn and relu keep the shape
            shapes.append(cur)
        if self.bridge_dim > 0 and not seen_fc:
            raise ValueError("a trunk with a bridge descriptor needs at least one fc layer")
        return shapes

    @property
    def feature_dim(self) -> int:
        last = self.trace()[-1]
        if len(last) != 1:
            raise ValueError("trunk must end in a flat feature vector (fc stack)")
        return last[0]

    def layer_names(self) -> list[str]:
        """Per-layer names; parameterized layers get conv1.., fc1.. labels."""
        counts = {"conv": 0, "fc": 0}
        names = []
        for layer in self.layers:
            if layer.kind in counts:
                counts[layer.kind] += 1
                names.append(f"{layer.kind}{counts[layer.kind]}")
            else:
                names.append(layer.kind)
        return names

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        shapes: dict[str, tuple[int, ...]] = {}
        cur: tuple[int, ...] = self.input_shape
        seen_fc = False
        for layer, name in zip(self.layers, self.layer_names()):
            if layer.kind == "conv":
                shapes[f"{name}.w"] = (layer.filters, cur[0], layer.kernel, layer.kernel)
                shapes[f"{name}.b"] = (layer.filters,)
            elif layer.kind == "fc":
                if not seen_fc and len(cur) == 3:
                    d_in = cur[0] * cur[1] * cur[2] + self.bridge_dim
                else:
                    d_in = cur[-1]
                shapes[f"{name}.w"] = (d_in, layer.out_dim)
                shapes[f"{name}.b"] = (layer.out_dim,)
            cur = _advance_shape(cur, layer, self.bridge_dim, seen_fc)
            seen_fc = seen_fc or layer.kind == "fc"
        return shapes

    def to_dict(self) -> dict:
        return {
            "input_shape": list(self.input_shape),
            "bridge_dim": self.bridge_dim,
            "layers": [layer.to_dict() for layer in self.layers],
        }

    @staticmethod
    def from_dict(d: dict) -> "NetworkSpec":
        return NetworkSpec(
            input_shape=tuple(d["input_shape"]),
            layers=tuple(LayerSpec.from_dict(ld) for ld in d["layers"]),
            bridge_dim=int(d.get("bridge_dim", 0)),
        )


def _advance_shape(cur, layer: LayerSpec, bridge_dim: int, seen_fc: bool):
    if layer.kind == "conv":
        return (
            layer.filters,
            (cur[1] - layer.kernel) // layer.stride + 1,
            (cur[2] - layer.kernel) // layer.stride + 1,
        )
    if layer.kind == "maxpool":
        return (
            cur[0],
            (cur[1] - layer.kernel) // layer.stride + 1,
            (cur[2] - layer.kernel) // layer.stride + 1,
        )
    if layer.kind == "fc":
        return (layer.out_dim,)
    return cur


def init_trunk_params(
    spec: NetworkSpec, rng: np.random.Generator, prefix: str = "trunk."
) -> ParameterSet:
    """He-scaled Gaussian weights, zero biases, all with grad slots."""
    params = ParameterSet()
    for name, shape in spec.param_shapes().items():
        if name.endswith(".b"):
            data = np.zeros(shape)
        else:
            fan_in = int(np.prod(shape[:-1])) if len(shape) == 2 else int(np.prod(shape[1:]))
            data = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
        params.add(prefix + name, Tensor(data, np.zeros(shape)))
    return params


@dataclass
class TrunkCache:
    """Per-layer contexts from one forward pass, for the matching backward."""

    entries: list[tuple[str, Any]] = field(default_factory=list)
    conv_shape_at_flatten: tuple[int, ...] | None = None
    bridge_batched: bool = False


def trunk_forward(
    spec: NetworkSpec,
    params: ParameterSet,
    image: np.ndarray,
    h: np.ndarray | None = None,
    prefix: str = "trunk.",
) -> tuple[np.ndarray, TrunkCache]:
    """Run the trunk on one image or a batch; returns (features, cache).

    ``h`` is the bridging descriptor (already standardized); it is mandatory
    when the spec declares ``bridge_dim > 0`` and must have that length.
    """
    image = np.asarray(image, dtype=np.float64)
    batched = image.ndim == 4
    img_shape = image.shape[1:] if batched else image.shape
    if tuple(img_shape) != spec.input_shape:
        raise ValueError(
            f"input geometry {tuple(img_shape)} does not match trunk input {spec.input_shape}"
        )
    if spec.bridge_dim > 0:
        if h is None:
            raise ValueError("this trunk expects a bridge descriptor input")
        h = np.asarray(h, dtype=np.float64)
        if h.shape[-1] != spec.bridge_dim:
            raise ValueError(
                f"bridge descriptor length {h.shape[-1]} does not match "
                f"configured bridge_dim {spec.bridge_dim}"
            )
        if batched and (h.ndim != 2 or h.shape[0] != image.shape[0]):
            raise ValueError("batched input needs one descriptor row per image")
        if not batched and h.ndim != 1:
            raise ValueError("single-image input needs a flat descriptor")

    cache = TrunkCache()
    cur = image
    seen_fc = False
    for layer, name in zip(spec.layers, spec.layer_names()):
        if layer.kind == "conv":
            cur, ctx = conv_forward(cur, params[f"{prefix}{name}.w"].data,
                                    params[f"{prefix}{name}.b"].data, layer.stride)
            cache.entries.append(("conv:" + name, ctx))
        elif layer.kind == "maxpool":
            pool_in = cur
            cur, argmax = maxpool_forward(cur, layer.kernel, layer.stride)
            cache.entries.append(("maxpool", (argmax, pool_in)))
        elif layer.kind == "lrn":
            cur, ctx = lrn_forward(cur, layer.lrn_n, layer.lrn_k, layer.lrn_alpha, layer.lrn_beta)
            cache.entries.append(("lrn", ctx))
        elif layer.kind == "relu":
            cache.entries.append(("relu", cur))
            cur = relu(cur)
        elif layer.kind == "fc":
            if not seen_fc and cur.ndim in (3, 4):
                cache.conv_shape_at_flatten = cur.shape
                flat = cur.reshape(cur.shape[0], -1) if batched else cur.reshape(-1)
                if spec.bridge_dim > 0:
                    cache.bridge_batched = batched
                    flat = np.concatenate([flat, h], axis=-1)
                cur = flat
                injected = spec.bridge_dim > 0
            else:
                injected = False
            cur, ctx = fc_forward(cur, params[f"{prefix}{name}.w"].data,
                                  params[f"{prefix}{name}.b"].data)
            cache.entries.append(("fc:" + name, (ctx, injected)))
            seen_fc = True
    return cur, cache


def trunk_backward(
    spec: NetworkSpec,
    params: ParameterSet,
    cache: TrunkCache,
    upstream: np.ndarray,
    prefix: str = "trunk.",
) -> tuple[np.ndarray, np.ndarray | None]:
    """Accumulate parameter grads; returns (d_image, d_descriptor)."""
    grad = np.asarray(upstream)
    d_h = None
    first_fc_entry = None
    for i, (tag, payload) in enumerate(cache.entries):
        if tag.startswith("fc:"):
            first_fc_entry = i
            break

    for i in range(len(cache.entries) - 1, -1, -1):
        tag, payload = cache.entries[i]
        if tag.startswith("conv:"):
            name = tag.split(":", 1)[1]
            grad, dw, db = conv_backward(payload, grad)
            params[f"{prefix}{name}.w"].accumulate_grad(dw)
            params[f"{prefix}{name}.b"].accumulate_grad(db)
        elif tag == "maxpool":
            argmax, _ = payload
            grad = maxpool_backward(argmax, grad)
        elif tag == "lrn":
            grad = lrn_backward(payload, grad)
        elif tag == "relu":
            grad = relu_backward(payload, grad)
        elif tag.startswith("fc:"):
            name = tag.split(":", 1)[1]
            ctx, injected = payload
            grad, dw, db = fc_backward(ctx, grad)
            params[f"{prefix}{name}.w"].accumulate_grad(dw)
            params[f"{prefix}{name}.b"].accumulate_grad(db)
            if i == first_fc_entry and cache.conv_shape_at_flatten is not None:
                if injected:
                    d_h = grad[..., -spec.bridge_dim:]
                    grad = grad[..., : -spec.bridge_dim]
                grad = grad.reshape(cache.conv_shape_at_flatten)
    return grad, d_h


def min_kink_margin(cache: TrunkCache) -> float:
    """Distance of the forward pass from its nearest non-smooth point.

    The minimum over all ReLU pre-activations of ``|x|`` and over all pooling
    windows of the gap between the top two values.  Finite-difference probes
    are only trustworthy when this margin comfortably exceeds the probe step.
    """
    margin = np.inf
    for tag, payload in cache.entries:
        if tag == "relu":
            margin = min(margin, float(np.min(np.abs(payload))))
        elif tag == "maxpool":
            argmax, pool_in = payload
            x4 = pool_in if pool_in.ndim == 4 else pool_in[None]
            k, s = argmax.kernel, argmax.stride
            n, c, h, w = x4.shape
            ho = (h - k) // s + 1
            wo = (w - k) // s + 1
            parts = [
                x4[:, :, dy : dy + ho * s : s, dx : dx + wo * s : s]
                for dy in range(k)
                for dx in range(k)
            ]
            stack = np.stack(parts, axis=-1)
            if stack.shape[-1] >= 2:
                top2 = np.sort(stack, axis=-1)[..., -2:]
                gap = top2[..., 1] - top2[..., 0]
                # Windows whose top two entries are exactly 0 are upstream
                # ReLU clips, frozen in a neighborhood; the ReLU margin
                # already guards against them flipping sign.
                frozen = (gap == 0.0) & (top2[..., 1] == 0.0)
                live = gap[~frozen]
                if live.size:
                    margin = min(margin, float(np.min(live)))
    return margin
