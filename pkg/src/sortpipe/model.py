"""Student network: config schema, shape inference, weights, float inference.

The network is a plain feed-forward stack of conv2d / maxpool / relu / dense /
flatten / softmax stages over an H x W x C image. Convolution is
cross-correlation (no kernel flip), stride 1, "same" zero padding. All float
arithmetic is 32-bit IEEE; tensors are channels-last (H, W, C) and flatten is
row-major over (H, W, C).

A trailing softmax stage marks where probabilities are produced downstream;
the forward pass itself always returns pre-softmax logits (use `softmax()` on
them explicitly).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import SchemaError, ShapeError, WeightFormatError

WEIGHT_MAGIC = b"SNN1"

LAYER_KINDS = ("conv2d", "maxpool", "relu", "dense", "flatten", "softmax")

# Stages that do real per-pixel work on the datapath (everything except the
# pure markers relu/flatten/softmax). Used for layer counting and by the
# hardware model.
COMPUTE_KINDS = ("conv2d", "maxpool", "dense")

_DIM_LIMIT = 2**31


@dataclass(frozen=True)
class TensorShape:
    """Height x width x channels, all >= 1."""

    h: int
    w: int
    c: int

    def __post_init__(self):
        for name, v in (("h", self.h), ("w", self.w), ("c", self.c)):
            if not isinstance(v, int) or v < 1:
                raise SchemaError(f"shape field {name} must be a positive integer, got {v!r}")
            if v >= _DIM_LIMIT:
                raise ShapeError(f"dimension overflow: {name}={v}")

    @property
    def size(self) -> int:
        return self.h * self.w * self.c

    def __str__(self) -> str:
        return f"{self.h}x{self.w}x{self.c}"


@dataclass(frozen=True)
class LayerSpec:
    """One stage of the network.

    kind-specific fields: conv2d uses (out_channels, kernel, bias), maxpool
    uses window (stride = window), dense uses (out_features, bias). Padding is
    always "same" and conv stride always 1.
    """

    kind: str
    name: str
    out_channels: int = 0
    kernel: int = 0
    window: int = 0
    out_features: int = 0
    bias: bool = True

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise SchemaError(f"unknown layer kind {self.kind!r}")
        if self.kind == "conv2d":
            if self.out_channels < 1:
                raise SchemaError(f"{self.name}: out_channels must be >= 1")
            if self.kernel < 1 or self.kernel % 2 == 0:
                raise SchemaError(f"{self.name}: conv kernel side must be odd, got {self.kernel}")
        elif self.kind == "maxpool":
            if self.window < 2:
                raise SchemaError(f"{self.name}: pool window must be >= 2")
        elif self.kind == "dense":
            if self.out_features < 1:
                raise SchemaError(f"{self.name}: out_features must be >= 1")

    @property
    def parameterized(self) -> bool:
        return self.kind in ("conv2d", "dense")


@dataclass(frozen=True)
class ModelConfig:
    """Named layer stack with a declared input shape and class count."""

    name: str
    input_shape: TensorShape
    layers: tuple[LayerSpec, ...]
    num_classes: int

    def __post_init__(self):
        if self.num_classes < 2:
            raise SchemaError("num_classes must be >= 2")
        names = [l.name for l in self.layers]
        if len(set(names)) != len(names):
            raise SchemaError("layer names must be unique")
        flat_seen = False
        for l in self.layers:
            if l.kind == "flatten":
                if flat_seen:
                    raise SchemaError("flatten may appear at most once")
                flat_seen = True

    def layer(self, name: str) -> LayerSpec:
        for l in self.layers:
            if l.name == name:
                return l
        raise KeyError(name)

    @property
    def compute_layers(self) -> tuple[LayerSpec, ...]:
        return tuple(l for l in self.layers if l.kind in COMPUTE_KINDS)

    @property
    def parameterized_layers(self) -> tuple[LayerSpec, ...]:
        return tuple(l for l in self.layers if l.parameterized)


class WeightSet:
    """Per-layer real tensors in config order.

    Conv kernels are (out, in, ky, kx), dense weights (out, in), bias vectors
    (out,). Stored as float32.
    """

    def __init__(self, tensors: dict[str, tuple[np.ndarray, np.ndarray | None]]):
        self.tensors = tensors

    def kernel(self, name: str) -> np.ndarray:
        return self.tensors[name][0]

    def bias(self, name: str) -> np.ndarray | None:
        return self.tensors[name][1]

    def total_params(self) -> int:
        n = 0
        for w, b in self.tensors.values():
            n += w.size + (b.size if b is not None else 0)
        return n


def parse_model_config(text: str | bytes | dict) -> ModelConfig:
    """Parse and validate a model document (JSON text or already-loaded dict)."""
    if isinstance(text, (str, bytes)):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise SchemaError(f"model document is not valid JSON: {e}") from e
    else:
        doc = text
    if not isinstance(doc, dict):
        raise SchemaError("model document must be a JSON object")
    for key in ("name", "input", "num_classes", "layers"):
        if key not in doc:
            raise SchemaError(f"model document missing field {key!r}")
    inp = doc["input"]
    if not isinstance(inp, dict) or set(inp) != {"h", "w", "c"}:
        raise SchemaError("input must be an object with fields h, w, c")
    input_shape = TensorShape(inp["h"], inp["w"], inp["c"])
    if not isinstance(doc["layers"], list):
        raise SchemaError("layers must be a list")

    layers = []
    counts: dict[str, int] = {}
    for i, entry in enumerate(doc["layers"]):
        if not isinstance(entry, dict) or "kind" not in entry:
            raise SchemaError(f"layer {i}: each layer entry must be an object with a 'kind'")
        kind = entry["kind"]
        if kind not in LAYER_KINDS:
            raise SchemaError(f"layer {i}: unknown layer kind {kind!r}")
        counts[kind] = counts.get(kind, 0) + 1
        name = entry.get("name", f"{kind}{counts[kind]}")
        if kind == "conv2d":
            if entry.get("padding", "same") != "same":
                raise SchemaError(f"{name}: only 'same' padding is supported")
            if entry.get("stride", 1) != 1:
                raise SchemaError(f"{name}: only stride 1 is supported")
            spec = LayerSpec(kind, name, out_channels=entry.get("out_channels", 0),
                             kernel=entry.get("kernel", 3), bias=bool(entry.get("bias", True)))
        elif kind == "maxpool":
            spec = LayerSpec(kind, name, window=entry.get("window", 2))
        elif kind == "dense":
            spec = LayerSpec(kind, name, out_features=entry.get("out_features", 0),
                             bias=bool(entry.get("bias", True)))
        else:
            spec = LayerSpec(kind, name)
        layers.append(spec)

    config = ModelConfig(name=str(doc["name"]), input_shape=input_shape,
                         layers=tuple(layers), num_classes=int(doc["num_classes"]))
    shapes = infer_shapes(config)  # may raise ShapeError
    final = shapes[-1] if shapes else config.input_shape
    if (final.h, final.w, final.c) != (1, 1, config.num_classes):
        raise ShapeError(
            f"final shape {final} does not match 1x1x{config.num_classes}")
    return config


def infer_shapes(config: ModelConfig) -> list[TensorShape]:
    """Output shape of every layer, in order.

    Same-padding conv preserves H x W; maxpool requires H and W to divide
    evenly by the window; flatten collapses to 1 x 1 x (H*W*C); dense needs an
    already-flat (1 x 1 x n) input.
    """
    shapes = []
    cur = config.input_shape
    for l in config.layers:
        if l.kind == "conv2d":
            cur = TensorShape(cur.h, cur.w, l.out_channels)
        elif l.kind == "maxpool":
            if cur.h % l.window or cur.w % l.window:
                raise ShapeError(
                    f"{l.name}: pool window {l.window} does not divide {cur.h}x{cur.w}")
            cur = TensorShape(cur.h // l.window, cur.w // l.window, cur.c)
        elif l.kind == "flatten":
            if cur.size >= _DIM_LIMIT:
                raise ShapeError(f"{l.name}: dimension overflow")
            cur = TensorShape(1, 1, cur.size)
        elif l.kind == "dense":
            if cur.h != 1 or cur.w != 1:
                raise ShapeError(f"{l.name}: dense before flatten (input shape {cur})")
            cur = TensorShape(1, 1, l.out_features)
        # relu / softmax keep the shape
        shapes.append(cur)
    return shapes


def layer_param_count(layer: LayerSpec, in_shape: TensorShape) -> int:
    """Parameter count of a single layer given its input shape."""
    if layer.kind == "conv2d":
        return layer.out_channels * (in_shape.c * layer.kernel**2 + (1 if layer.bias else 0))
    if layer.kind == "dense":
        return layer.out_features * (in_shape.c + (1 if layer.bias else 0))
    return 0


def param_count(config: ModelConfig) -> int:
    """Total learnable parameters (conv kernels + dense weights + biases)."""
    total = 0
    cur = config.input_shape
    for l, out in zip(config.layers, infer_shapes(config)):
        total += layer_param_count(l, cur)
        cur = out
    return total


def _tensor_dims(config: ModelConfig) -> list[tuple[str, tuple[int, ...], bool]]:
    """(layer name, kernel shape, has bias) per parameterized layer, in order."""
    dims = []
    cur = config.input_shape
    for l, out in zip(config.layers, infer_shapes(config)):
        if l.kind == "conv2d":
            dims.append((l.name, (l.out_channels, cur.c, l.kernel, l.kernel), l.bias))
        elif l.kind == "dense":
            dims.append((l.name, (l.out_features, cur.c), l.bias))
        cur = out
    return dims


def save_weights(config: ModelConfig, weights: WeightSet) -> bytes:
    """Serialize to the weight file format: magic, uint32 count, float32 LE values."""
    parts = []
    n = 0
    for name, shape, has_bias in _tensor_dims(config):
        w, b = weights.tensors[name]
        if tuple(w.shape) != shape:
            raise WeightFormatError(f"{name}: tensor shape {w.shape} != expected {shape}")
        parts.append(np.ascontiguousarray(w, dtype="<f4").tobytes())
        n += w.size
        if has_bias:
            if b is None:
                raise WeightFormatError(f"{name}: missing bias")
            parts.append(np.ascontiguousarray(b, dtype="<f4").tobytes())
            n += b.size
    return WEIGHT_MAGIC + struct.pack("<I", n) + b"".join(parts)


def load_weights(config: ModelConfig, blob: bytes) -> WeightSet:
    """Parse a weight file and split it into per-layer tensors."""
    if len(blob) < 8 or blob[:4] != WEIGHT_MAGIC:
        raise WeightFormatError("magic mismatch: not a weight file")
    (n,) = struct.unpack("<I", blob[4:8])
    expected = param_count(config)
    if n != expected:
        raise WeightFormatError(f"length mismatch: header says {n}, config needs {expected}")
    if len(blob) != 8 + 4 * n:
        raise WeightFormatError(
            f"length mismatch: file has {(len(blob) - 8) // 4} values, header says {n}")
    vec = np.frombuffer(blob, dtype="<f4", offset=8)
    if not np.all(np.isfinite(vec)):
        raise WeightFormatError("non-finite weight")

    tensors: dict[str, tuple[np.ndarray, np.ndarray | None]] = {}
    pos = 0
    for name, shape, has_bias in _tensor_dims(config):
        size = int(np.prod(shape))
        w = vec[pos:pos + size].reshape(shape).copy()
        pos += size
        b = None
        if has_bias:
            b = vec[pos:pos + shape[0]].copy()
            pos += shape[0]
        tensors[name] = (w, b)
    return WeightSet(tensors)


def random_weights(config: ModelConfig, rng: np.random.Generator) -> WeightSet:
    """Uniform fan-in-scaled weights, U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
    tensors: dict[str, tuple[np.ndarray, np.ndarray | None]] = {}
    for name, shape, has_bias in _tensor_dims(config):
        fan_in = int(np.prod(shape[1:])) if len(shape) > 2 else shape[1]
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=shape).astype(np.float32)
        b = rng.uniform(-bound, bound, size=shape[0]).astype(np.float32) if has_bias else None
        tensors[name] = (w, b)
    return WeightSet(tensors)


def load_image(config: ModelConfig, blob: bytes) -> np.ndarray:
    """Raw float32 LE row-major H x W x C image, dims from the config."""
    s = config.input_shape
    if len(blob) != 4 * s.size:
        raise ShapeError(f"image file has {len(blob)} bytes, expected {4 * s.size} for {s}")
    img = np.frombuffer(blob, dtype="<f4").reshape(s.h, s.w, s.c)
    if not np.all(np.isfinite(img)):
        raise ShapeError("non-finite input")
    return img.copy()


def save_image(image: np.ndarray) -> bytes:
    return np.ascontiguousarray(image, dtype="<f4").tobytes()


def _conv_same(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray | None) -> np.ndarray:
    h, w, _ = x.shape
    cout, _, k, _ = kernel.shape
    p = k // 2
    xp = np.pad(x, ((p, p), (p, p), (0, 0)))
    out = np.zeros((h, w, cout), dtype=np.float32)
    for dy in range(k):
        for dx in range(k):
            # (h, w, cin) @ (cin, cout), accumulated per kernel tap
            out += xp[dy:dy + h, dx:dx + w, :] @ kernel[:, :, dy, dx].T
    if bias is not None:
        out += bias
    return out


def _maxpool(x: np.ndarray, win: int) -> np.ndarray:
    h, w, c = x.shape
    if h % win or w % win:
        raise ShapeError(f"pool window {win} does not divide {h}x{w}")
    return x.reshape(h // win, win, w // win, win, c).max(axis=(1, 3))


def forward_float(config: ModelConfig, weights: WeightSet, image: np.ndarray) -> np.ndarray:
    """Float32 forward pass; returns pre-softmax logits of length num_classes."""
    s = config.input_shape
    if image.shape != (s.h, s.w, s.c):
        raise ShapeError(f"image shape {image.shape} != model input {s}")
    if not np.all(np.isfinite(image)):
        raise ShapeError("non-finite input")
    x = np.asarray(image, dtype=np.float32)
    for l in config.layers:
        if l.kind == "conv2d":
            x = _conv_same(x, weights.kernel(l.name), weights.bias(l.name))
        elif l.kind == "maxpool":
            x = _maxpool(x, l.window)
        elif l.kind == "relu":
            x = np.maximum(x, np.float32(0))
        elif l.kind == "flatten":
            x = x.reshape(1, 1, -1)
        elif l.kind == "dense":
            if x.shape[0] != 1 or x.shape[1] != 1:
                raise ShapeError(f"{l.name}: dense before flatten")
            v = x.reshape(-1)
            w = weights.kernel(l.name)
            b = weights.bias(l.name)
            v = w @ v + (b if b is not None else np.float32(0))
            x = v.reshape(1, 1, -1).astype(np.float32)
        # softmax stage: marker only, forward returns logits
    return x.reshape(-1)


def softmax(logits) -> np.ndarray:
    """Numerically stable softmax (max subtraction); components sum to 1."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()
