"""Fixed-point quantization emulation for weights and activations.

Values are signed fixed point: `total_bits` wide with `integer_bits` to the
left of the binary point (sign included), so the step is 2^-(total-integer)
and the range [-2^(I-1), 2^(I-1) - step]. Quantization rounds half to even
onto the step grid, then saturates.

The fixed forward path mirrors a streaming hardware datapath: weights and the
input are quantized once, every multiply-accumulate runs in an accumulator
that keeps full product precision but saturates at the layer's activation
range widened by `acc_headroom` integer bits, and each layer's output is
re-quantized to that layer's activation format. The emulation is exact (the
float64 carrier holds every intermediate without rounding) whenever
weight fractional bits + activation fractional bits + log2(terms) <= 53,
which covers all hardware-realistic plans.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import SchemaError, ShapeError
from .model import ModelConfig, WeightSet, infer_shapes

DEFAULT_ACC_HEADROOM = 6


@dataclass(frozen=True)
class QuantFormat:
    """Signed fixed-point format (total bits, integer bits incl. sign)."""

    total_bits: int
    integer_bits: int

    def __post_init__(self):
        if not 2 <= self.total_bits <= 32:
            raise SchemaError(f"total_bits must be in 2..32, got {self.total_bits}")
        if not 1 <= self.integer_bits <= self.total_bits:
            raise SchemaError(
                f"integer_bits must be in 1..{self.total_bits}, got {self.integer_bits}")

    @property
    def frac_bits(self) -> int:
        return self.total_bits - self.integer_bits

    @property
    def step(self) -> float:
        return 2.0 ** -self.frac_bits

    @property
    def min_value(self) -> float:
        return -(2.0 ** (self.integer_bits - 1))

    @property
    def max_value(self) -> float:
        return 2.0 ** (self.integer_bits - 1) - self.step

    # integer code bounds
    @property
    def min_code(self) -> int:
        return -(1 << (self.total_bits - 1))

    @property
    def max_code(self) -> int:
        return (1 << (self.total_bits - 1)) - 1

    def contains(self, v: float) -> bool:
        """Is v exactly representable in this format?"""
        code = v / self.step
        return code == np.floor(code) and self.min_code <= code <= self.max_code


def encode(x, fmt: QuantFormat) -> np.ndarray:
    """Round-half-even to integer codes, saturating to the format range."""
    codes = np.rint(np.asarray(x, dtype=np.float64) / fmt.step)
    return np.clip(codes, fmt.min_code, fmt.max_code)


def decode(codes, fmt: QuantFormat) -> np.ndarray:
    return np.asarray(codes, dtype=np.float64) * fmt.step


def quantize_array(x, fmt: QuantFormat) -> np.ndarray:
    return decode(encode(x, fmt), fmt)


def quantize_value(x: float, fmt: QuantFormat) -> float:
    """Nearest representable value (ties to even), saturating out-of-range."""
    return float(quantize_array(np.float64(x), fmt))


@dataclass
class QuantPlan:
    """Per-layer weight/activation formats with a default fallback."""

    weight_formats: dict[str, QuantFormat] = field(default_factory=dict)
    act_formats: dict[str, QuantFormat] = field(default_factory=dict)
    default_weight: QuantFormat | None = None
    default_act: QuantFormat | None = None
    acc_headroom: int = DEFAULT_ACC_HEADROOM

    def weight_format(self, layer_name: str) -> QuantFormat:
        fmt = self.weight_formats.get(layer_name, self.default_weight)
        if fmt is None:
            raise SchemaError(f"quant plan has no weight format for layer {layer_name!r}")
        return fmt

    def act_format(self, layer_name: str) -> QuantFormat:
        fmt = self.act_formats.get(layer_name, self.default_act)
        if fmt is None:
            raise SchemaError(f"quant plan has no activation format for layer {layer_name!r}")
        return fmt


def uniform_plan(weight_fmt: QuantFormat, act_fmt: QuantFormat,
                 acc_headroom: int = DEFAULT_ACC_HEADROOM) -> QuantPlan:
    return QuantPlan(default_weight=weight_fmt, default_act=act_fmt,
                     acc_headroom=acc_headroom)


def parse_quant_plan(text: str | bytes | dict) -> QuantPlan:
    """Plan document: {layer: {w: [total,int], a: [total,int]}, default: {...},
    acc_headroom: n}."""
    if isinstance(text, (str, bytes)):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise SchemaError(f"quant plan is not valid JSON: {e}") from e
    else:
        doc = text
    if not isinstance(doc, dict):
        raise SchemaError("quant plan must be a JSON object")

    def parse_fmt(pair, where):
        if (not isinstance(pair, (list, tuple)) or len(pair) != 2
                or not all(isinstance(v, int) for v in pair)):
            raise SchemaError(f"{where}: format must be [total_bits, integer_bits]")
        return QuantFormat(pair[0], pair[1])

    plan = QuantPlan()
    for key, entry in doc.items():
        if key == "acc_headroom":
            if not isinstance(entry, int) or entry < 0:
                raise SchemaError("acc_headroom must be a non-negative integer")
            plan.acc_headroom = entry
            continue
        if not isinstance(entry, dict):
            raise SchemaError(f"plan entry {key!r} must be an object")
        wfmt = parse_fmt(entry["w"], key) if "w" in entry else None
        afmt = parse_fmt(entry["a"], key) if "a" in entry else None
        if key == "default":
            plan.default_weight, plan.default_act = wfmt, afmt
        else:
            if wfmt is not None:
                plan.weight_formats[key] = wfmt
            if afmt is not None:
                plan.act_formats[key] = afmt
    return plan


class QuantizedWeightSet:
    """Integer-coded tensors plus their formats; decodes to reals exactly."""

    def __init__(self, codes: dict[str, tuple[np.ndarray, np.ndarray | None]],
                 formats: dict[str, QuantFormat]):
        self.codes = codes
        self.formats = formats

    def kernel(self, name: str) -> np.ndarray:
        return decode(self.codes[name][0], self.formats[name])

    def bias(self, name: str) -> np.ndarray | None:
        b = self.codes[name][1]
        if b is None:
            return None
        return decode(b, self.formats[name])


def quantize_weights(weights: WeightSet, plan: QuantPlan) -> QuantizedWeightSet:
    """Element-wise quantization of every parameterized layer's tensors."""
    codes = {}
    formats = {}
    for name, (w, b) in weights.tensors.items():
        fmt = plan.weight_format(name)  # raises on missing entry
        codes[name] = (encode(w, fmt), encode(b, fmt) if b is not None else None)
        formats[name] = fmt
    return QuantizedWeightSet(codes, formats)


def _acc_bounds(act_fmt: QuantFormat, headroom: int, product_frac_bits: int):
    # activation range widened by `headroom` integer bits, at full product
    # resolution
    span = 2.0 ** (act_fmt.integer_bits + headroom - 1)
    return -span, span - 2.0 ** -product_frac_bits


def _accumulate_sat(products: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Row-wise left-to-right sum with the running total clamped to [lo, hi]
    after every add. Vectorized fast path for rows that never clip."""
    c = np.cumsum(products, axis=1)
    ok = (c.max(axis=1) <= hi) & (c.min(axis=1) >= lo)
    out = c[:, -1].copy()
    for i in np.nonzero(~ok)[0]:
        acc = 0.0
        for p in products[i]:
            acc = acc + p
            if acc > hi:
                acc = hi
            elif acc < lo:
                acc = lo
        out[i] = acc
    return out


def _conv_fixed(x, kernel, bias, act_fmt, w_fmt, headroom):
    h, w, cin = x.shape
    cout, _, k, _ = kernel.shape
    p = k // 2
    xp = np.pad(x, ((p, p), (p, p), (0, 0)))
    # windows: (h, w, cin, k, k) -> term order (ky, kx, cin) per output pixel
    win = sliding_window_view(xp, (k, k), axis=(0, 1))
    patches = win.transpose(0, 1, 3, 4, 2).reshape(h * w, k * k * cin)
    lo, hi = _acc_bounds(act_fmt, headroom, w_fmt.frac_bits + act_fmt.frac_bits)
    out = np.empty((h * w, cout))
    for oc in range(cout):
        krow = kernel[oc].transpose(1, 2, 0).reshape(-1)  # (ky, kx, cin)
        products = patches * krow
        if bias is not None:
            products = np.concatenate(
                [products, np.full((h * w, 1), bias[oc])], axis=1)
        out[:, oc] = _accumulate_sat(products, lo, hi)
    return quantize_array(out.reshape(h, w, cout), act_fmt)


def _dense_fixed(v, weight, bias, act_fmt, w_fmt, headroom):
    lo, hi = _acc_bounds(act_fmt, headroom, w_fmt.frac_bits + act_fmt.frac_bits)
    products = weight * v[None, :]
    if bias is not None:
        products = np.concatenate([products, bias[:, None]], axis=1)
    return quantize_array(_accumulate_sat(products, lo, hi), act_fmt)


def forward_fixed(config: ModelConfig, qweights: QuantizedWeightSet,
                  image: np.ndarray, plan: QuantPlan) -> np.ndarray:
    """Fixed-point forward pass; returns the final layer's decoded logits."""
    s = config.input_shape
    if image.shape != (s.h, s.w, s.c):
        raise ShapeError(f"image shape {image.shape} != model input {s}")
    first = config.layers[0].name if config.layers else None
    x = np.asarray(image, dtype=np.float64)
    if first is not None:
        x = quantize_array(x, plan.act_format(first))
    for l in config.layers:
        if l.kind == "conv2d":
            x = _conv_fixed(x, qweights.kernel(l.name), qweights.bias(l.name),
                            plan.act_format(l.name), qweights.formats[l.name],
                            plan.acc_headroom)
        elif l.kind == "maxpool":
            h, w, c = x.shape
            if h % l.window or w % l.window:
                raise ShapeError(f"{l.name}: pool window does not divide {h}x{w}")
            x = x.reshape(h // l.window, l.window, w // l.window, l.window, c).max(axis=(1, 3))
            x = quantize_array(x, plan.act_format(l.name))
        elif l.kind == "relu":
            x = quantize_array(np.maximum(x, 0.0), plan.act_format(l.name))
        elif l.kind == "flatten":
            x = x.reshape(1, 1, -1)
        elif l.kind == "dense":
            if x.shape[0] != 1 or x.shape[1] != 1:
                raise ShapeError(f"{l.name}: dense before flatten")
            v = _dense_fixed(x.reshape(-1), qweights.kernel(l.name), qweights.bias(l.name),
                             plan.act_format(l.name), qweights.formats[l.name],
                             plan.acc_headroom)
            x = v.reshape(1, 1, -1)
        # softmax stage: marker only, same as the float path
    return x.reshape(-1)


def agreement_rate(config: ModelConfig, weights: WeightSet, plan: QuantPlan,
                   inputs) -> float:
    """Fraction of inputs whose argmax class matches between the float and
    fixed paths (argmax ties resolve to the lower index in both)."""
    from .model import forward_float

    images = list(inputs)
    if not images:
        raise SchemaError("agreement_rate: empty input set")
    qweights = quantize_weights(weights, plan)
    agree = 0
    for img in images:
        a = int(np.argmax(forward_float(config, weights, img)))
        b = int(np.argmax(forward_fixed(config, qweights, img, plan)))
        agree += a == b
    return agree / len(images)
