"""Analytic FPGA resource / latency model driven by per-layer reuse factors.

The reuse factor R of a layer is the number of multiply operations that share
one physical multiplier, so a layer needing `mults` products per output cycle
instantiates ceil(mults / R) multipliers and accepts a new input every R
cycles. Layers stream concurrently (dataflow), so steady-state network
latency is dominated by the slowest layer's iteration count plus the one-off
pipeline fill of every stage.

Cost constants below are deliberately crude, order-of-magnitude mappings
(documented in HwModelParams); the model targets relative orderings and
trends, not absolute post-synthesis counts.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

from .errors import SchemaError
from .model import LayerSpec, ModelConfig, TensorShape, infer_shapes, layer_param_count
from .quantize import QuantFormat, QuantPlan


@dataclass(frozen=True)
class HwModelParams:
    """Tunable cost constants of the analytic model."""

    # products wider than this many operand bits (w + a) go to hard DSPs
    dsp_lut_threshold: int = 10
    # LUT cost of one fabric multiplier: ceil(w_bits * a_bits / 2)
    lut_mult_divisor: int = 2
    # sliding-window control: lut = 40*k*C_in + 8*W_in, ff = 2*lut
    conv_ctrl_lut_per_tap: int = 40
    conv_ctrl_lut_per_col: int = 8
    dense_ctrl_lut: int = 200
    pool_ctrl_lut_per_col: int = 4
    relu_ctrl_lut: int = 16
    softmax_ctrl_lut: int = 32
    ff_per_ctrl_lut: int = 2
    bram36_bits: int = 36864


DEFAULT_PARAMS = HwModelParams()


@dataclass(frozen=True)
class LayerHwConfig:
    """Per-layer knobs: reuse factor plus the formats from the quant plan."""

    reuse_factor: int
    weight_fmt: QuantFormat
    act_fmt: QuantFormat

    def __post_init__(self):
        if self.reuse_factor < 1:
            raise SchemaError(f"reuse factor must be >= 1, got {self.reuse_factor}")


@dataclass(frozen=True)
class DeviceBudget:
    name: str
    dsp: int
    lut: int
    ff: int
    bram36: int
    max_clock_mhz: float

    def __post_init__(self):
        for f in ("dsp", "lut", "ff", "bram36", "max_clock_mhz"):
            if getattr(self, f) <= 0:
                raise SchemaError(f"device {f} must be positive")


def parse_device(text: str | bytes | dict) -> DeviceBudget:
    doc = json.loads(text) if isinstance(text, (str, bytes)) else text
    try:
        return DeviceBudget(name=str(doc["name"]), dsp=int(doc["dsp"]), lut=int(doc["lut"]),
                            ff=int(doc["ff"]), bram36=int(doc["bram36"]),
                            max_clock_mhz=float(doc["max_clock_mhz"]))
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"bad device file: {e}") from e


@dataclass(frozen=True)
class HwPlan:
    """Clock, calibration scalar, and the per-layer reuse factors."""

    clock_mhz: float
    reuse: dict[str, int]
    calibration: float = 1.0

    def __post_init__(self):
        if self.clock_mhz <= 0:
            raise SchemaError("clock_mhz must be positive")
        if self.calibration <= 0:
            raise SchemaError("calibration must be positive")
        for name, r in self.reuse.items():
            if not isinstance(r, int) or r < 1:
                raise SchemaError(f"reuse factor for {name!r} must be an integer >= 1")


def parse_hw_plan(text: str | bytes | dict) -> HwPlan:
    doc = json.loads(text) if isinstance(text, (str, bytes)) else text
    if not isinstance(doc, dict) or "layers" not in doc:
        raise SchemaError("hardware plan must be an object with a 'layers' field")
    reuse = {}
    for name, entry in doc["layers"].items():
        if not isinstance(entry, dict) or "reuse" not in entry:
            raise SchemaError(f"hardware plan layer {name!r} must carry a 'reuse' field")
        reuse[name] = entry["reuse"]
    return HwPlan(clock_mhz=float(doc.get("clock_mhz", 250.0)), reuse=reuse,
                  calibration=float(doc.get("calibration", 1.0)))


@dataclass
class LayerEstimate:
    name: str
    kind: str
    reuse: int              # effective (clamped) reuse factor
    multipliers: int
    dsp: int
    lut: int
    ff: int
    bram36: int
    ii_cycles: int
    iteration_cycles: int
    fill_cycles: int


@dataclass
class NetworkEstimate:
    layers: list[LayerEstimate]
    clock_mhz: float
    calibration: float
    dsp: int = 0
    lut: int = 0
    ff: int = 0
    bram36: int = 0
    latency_cycles: float = 0.0
    latency_us: float = 0.0
    ii_cycles: int = 0          # throughput-limiting initiation interval
    throughput_fps: float = 0.0
    bottleneck: str = ""

    def resource(self, kind: str) -> int:
        return getattr(self, kind)


@dataclass
class BudgetReport:
    utilization: dict[str, float]
    passed: bool
    limiting: str
    note: str = "network IP only; camera-protocol IP is not included"


@dataclass
class ParetoPoint:
    reuse: int
    latency_us: float
    utilization: dict[str, float]


@dataclass
class MulticlassScaling:
    base_classes: int
    new_classes: int
    added_neurons: int
    base_final_params: int
    new_final_params: int
    param_factor: float
    multiplier_factor: float


def layer_workload(layer: LayerSpec, in_shape: TensorShape,
                   out_shape: TensorShape) -> tuple[int, int]:
    """(multiplies per output cycle, iteration count) of one layer."""
    if layer.kind == "conv2d":
        return (layer.kernel**2 * in_shape.c * layer.out_channels,
                out_shape.h * out_shape.w)
    if layer.kind == "dense":
        return (in_shape.c * layer.out_features, 1)
    if layer.kind in ("maxpool", "relu"):
        return (0, in_shape.h * in_shape.w)
    return (0, 0)  # flatten / softmax: wiring only


def _fill_cycles(layer: LayerSpec, in_shape: TensorShape) -> int:
    if layer.kind == "conv2d":
        # line buffer: k rows plus window alignment
        return layer.kernel * in_shape.w + layer.kernel
    if layer.kind == "dense":
        # adder tree depth plus pipeline registers
        return math.ceil(math.log2(max(in_shape.c, 2))) + 3
    if layer.kind == "maxpool":
        return in_shape.w
    if layer.kind == "relu":
        return 1
    return 0


def estimate_layer(layer: LayerSpec, in_shape: TensorShape, out_shape: TensorShape,
                   hw: LayerHwConfig, params: HwModelParams = DEFAULT_PARAMS) -> LayerEstimate:
    """Resource and cycle estimate of one layer at a given reuse factor."""
    mults, iterations = layer_workload(layer, in_shape, out_shape)
    r = min(hw.reuse_factor, mults) if mults > 0 else 1

    multipliers = math.ceil(mults / r) if mults else 0
    w_bits = hw.weight_fmt.total_bits
    a_bits = hw.act_fmt.total_bits
    dsp = lut = 0
    if multipliers:
        if w_bits + a_bits > params.dsp_lut_threshold:
            dsp = multipliers
        else:
            lut = multipliers * math.ceil(w_bits * a_bits / params.lut_mult_divisor)

    if layer.kind == "conv2d":
        lut += params.conv_ctrl_lut_per_tap * layer.kernel * in_shape.c \
            + params.conv_ctrl_lut_per_col * in_shape.w
    elif layer.kind == "dense":
        lut += params.dense_ctrl_lut
    elif layer.kind == "maxpool":
        lut += params.pool_ctrl_lut_per_col * in_shape.w
    elif layer.kind == "relu":
        lut += params.relu_ctrl_lut
    elif layer.kind == "softmax":
        lut += params.softmax_ctrl_lut
    ff = params.ff_per_ctrl_lut * lut

    bram = 0
    if layer.parameterized:
        bram += math.ceil(layer_param_count(layer, in_shape) * w_bits / params.bram36_bits)
    if layer.kind == "conv2d":
        bram += layer.kernel * math.ceil(in_shape.w * in_shape.c * a_bits / params.bram36_bits)

    return LayerEstimate(name=layer.name, kind=layer.kind, reuse=r,
                         multipliers=multipliers, dsp=dsp, lut=lut, ff=ff, bram36=bram,
                         ii_cycles=r, iteration_cycles=iterations * r,
                         fill_cycles=_fill_cycles(layer, in_shape))


def estimate_network(config: ModelConfig, plan: QuantPlan, hw_plan: HwPlan,
                     params: HwModelParams = DEFAULT_PARAMS) -> NetworkEstimate:
    """Whole-network estimate: dataflow-overlapped steady-state bottleneck plus
    the sum of per-stage pipeline fills."""
    shapes = infer_shapes(config)
    est = NetworkEstimate(layers=[], clock_mhz=hw_plan.clock_mhz,
                          calibration=hw_plan.calibration)
    cur = config.input_shape
    for layer, out in zip(config.layers, shapes):
        if layer.parameterized and layer.name not in hw_plan.reuse:
            raise SchemaError(f"hardware plan missing reuse factor for layer {layer.name!r}")
        r = hw_plan.reuse.get(layer.name, 1)
        cfg = LayerHwConfig(reuse_factor=r,
                            weight_fmt=plan.weight_format(layer.name) if layer.parameterized
                            else plan.act_format(layer.name),
                            act_fmt=plan.act_format(layer.name))
        le = estimate_layer(layer, cur, out, cfg, params)
        est.layers.append(le)
        cur = out

    est.dsp = sum(l.dsp for l in est.layers)
    est.lut = sum(l.lut for l in est.layers)
    est.ff = sum(l.ff for l in est.layers)
    est.bram36 = sum(l.bram36 for l in est.layers)
    if est.layers:
        worst = max(est.layers, key=lambda l: l.iteration_cycles)
        est.bottleneck = worst.name
        est.ii_cycles = worst.iteration_cycles
    fills = sum(l.fill_cycles for l in est.layers)
    est.latency_cycles = hw_plan.calibration * (est.ii_cycles + fills)
    est.latency_us = est.latency_cycles / hw_plan.clock_mhz
    if est.ii_cycles:
        est.throughput_fps = hw_plan.clock_mhz * 1e6 / est.ii_cycles
    return est


RESOURCE_KINDS = ("dsp", "lut", "ff", "bram36")


def utilization(est: NetworkEstimate, device: DeviceBudget) -> dict[str, float]:
    return {k: est.resource(k) / getattr(device, k) for k in RESOURCE_KINDS}


def check_budget(est: NetworkEstimate, device: DeviceBudget) -> BudgetReport:
    """Fail iff any resource utilization exceeds 1.0; name the tightest one."""
    util = utilization(est, device)
    limiting = max(util, key=util.get)
    return BudgetReport(utilization=util, passed=all(u <= 1.0 for u in util.values()),
                        limiting=limiting)


def pareto_sweep(config: ModelConfig, plan: QuantPlan, reuse_set, clock_mhz: float,
                 device: DeviceBudget, calibration: float = 1.0,
                 params: HwModelParams = DEFAULT_PARAMS) -> list[ParetoPoint]:
    """Latency / utilization trade-off for a uniform reuse factor applied to
    every multiplier-bearing layer (clamped per layer; others stay at R=1)."""
    rs = sorted(set(int(r) for r in reuse_set))
    if not rs:
        raise SchemaError("pareto sweep needs a non-empty reuse set")
    if rs[0] < 1:
        raise SchemaError("reuse factors must be >= 1")
    points = []
    for r in rs:
        reuse = {l.name: r for l in config.parameterized_layers}
        est = estimate_network(config, plan,
                               HwPlan(clock_mhz=clock_mhz, reuse=reuse, calibration=calibration),
                               params)
        points.append(ParetoPoint(reuse=r, latency_us=est.latency_us,
                                  utilization=utilization(est, device)))
    return points


def multiclass_scaling(config: ModelConfig, new_num_classes: int) -> MulticlassScaling:
    """Growth of the final dense layer when the class count changes."""
    if new_num_classes < 2:
        raise SchemaError("new_num_classes must be >= 2")
    dense_layers = [l for l in config.layers if l.kind == "dense"]
    if not dense_layers:
        raise SchemaError("model has no dense layer to scale")
    final = dense_layers[-1]
    shapes = infer_shapes(config)
    idx = config.layers.index(final)
    in_shape = shapes[idx - 1] if idx else config.input_shape

    base_params = layer_param_count(final, in_shape)
    new_layer = replace(final, out_features=new_num_classes)
    new_params = layer_param_count(new_layer, in_shape)
    base_mults = in_shape.c * final.out_features
    new_mults = in_shape.c * new_num_classes
    return MulticlassScaling(
        base_classes=final.out_features, new_classes=new_num_classes,
        added_neurons=new_num_classes - final.out_features,
        base_final_params=base_params, new_final_params=new_params,
        param_factor=new_params / base_params,
        multiplier_factor=new_mults / base_mults)
