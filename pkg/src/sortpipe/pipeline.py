"""Detection-to-sorting-trigger timeline model and pipelined frame-stream
simulator.

The timeline has four stages, all in microseconds: camera exposure, the
trigger-to-inference offset (which fully contains the exposure), inference,
and result writeout. End-to-end trigger latency is offset + inference +
writeout; the exposure-relative figure subtracts the exposure from the
offset. Sustained throughput is set by the slowest stage initiation
interval, not by the latency sum, because stages overlap across frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .errors import RateError, SchemaError

STAGES = ("exposure", "trigger_to_inference", "inference", "writeout")

# default inference initiation interval: the engine accepts a new frame
# before the previous one drains, sustaining 81 kfps
DEFAULT_INFERENCE_II_US = 1e6 / 81000.0


@dataclass(frozen=True)
class PipelineStages:
    """Stage durations plus optional per-stage initiation-interval overrides.

    A stage with no override uses its duration as its initiation interval.
    The default override set models the internally pipelined inference
    engine; pass ``ii_us={}`` for strictly sequential stages.
    """

    exposure_us: float = 2.0
    trigger_to_inference_us: float = 10.0
    inference_us: float = 14.5
    writeout_us: float = 0.2
    ii_us: Mapping[str, float] = field(
        default_factory=lambda: {"inference": DEFAULT_INFERENCE_II_US})

    def __post_init__(self):
        for name in STAGES:
            d = self.duration(name)
            if not math.isfinite(d) or d < 0:
                raise SchemaError(f"stage {name!r} duration must be finite and >= 0")
        if self.exposure_us > self.trigger_to_inference_us:
            raise SchemaError("exposure must fit inside the trigger-to-inference offset")
        for name, ii in self.ii_us.items():
            if name not in STAGES:
                raise SchemaError(f"unknown stage {name!r} in initiation intervals")
            if not math.isfinite(ii) or ii <= 0:
                raise SchemaError(f"initiation interval for {name!r} must be positive")

    def duration(self, name: str) -> float:
        if name not in STAGES:
            raise SchemaError(f"unknown stage {name!r}")
        return getattr(self, f"{name}_us")

    def initiation_interval(self, name: str) -> float:
        return self.ii_us.get(name, self.duration(name))

    def initiation_intervals(self) -> dict[str, float]:
        return {name: self.initiation_interval(name) for name in STAGES}

    def bottleneck_stage(self) -> str:
        iis = self.initiation_intervals()
        return max(iis, key=iis.get)


def parse_stages(text: str | bytes | dict) -> PipelineStages:
    import json
    doc = json.loads(text) if isinstance(text, (str, bytes)) else text
    if not isinstance(doc, dict):
        raise SchemaError("stages document must be an object")
    known = {f"{s}_us" for s in STAGES} | {"ii_us"}
    extra = set(doc) - known
    if extra:
        raise SchemaError(f"unknown stage fields: {sorted(extra)}")
    kwargs = {}
    for s in STAGES:
        key = f"{s}_us"
        if key in doc:
            kwargs[key] = float(doc[key])
    if "ii_us" in doc:
        if not isinstance(doc["ii_us"], dict):
            raise SchemaError("ii_us must be an object of stage -> microseconds")
        kwargs["ii_us"] = {k: float(v) for k, v in doc["ii_us"].items()}
    return PipelineStages(**kwargs)


def total_latency(stages, *rest) -> float:
    """Trigger-edge to sorting-signal latency in microseconds.

    Accepts a PipelineStages, or the four stage durations positionally
    (exposure, trigger-to-inference, inference, writeout).
    """
    if rest:
        stages = PipelineStages(stages, *rest, ii_us={})
    return stages.trigger_to_inference_us + stages.inference_us + stages.writeout_us


def after_exposure_latency(stages, *rest) -> float:
    """Exposure-end to inference-end latency in microseconds."""
    if rest:
        stages = PipelineStages(stages, *rest, ii_us={})
    return (stages.trigger_to_inference_us - stages.exposure_us) + stages.inference_us


def throughput_fps(stages: PipelineStages) -> float:
    """Sustained frame rate: reciprocal of the slowest stage interval."""
    worst = max(stages.initiation_interval(s) for s in STAGES)
    if worst <= 0:
        raise RateError("all stage initiation intervals are zero")
    return 1e6 / worst


@dataclass(frozen=True)
class FrameEvents:
    frame: int
    trigger_us: float
    exposure_end_us: float
    inference_start_us: float
    inference_end_us: float
    writeout_end_us: float

    EVENT_NAMES = ("trigger", "exposure_end", "inference_start",
                   "inference_end", "writeout_end")

    def items(self) -> list[tuple[str, float]]:
        return [(name, getattr(self, f"{name}_us")) for name in self.EVENT_NAMES]


@dataclass(frozen=True)
class FrameTrace:
    stages: PipelineStages
    frames: tuple[FrameEvents, ...]


def simulate_stream(stages: PipelineStages, n_frames: int,
                    frame_period_us: float) -> FrameTrace:
    """Event timestamps for a periodic frame stream.

    Frame k triggers at k * period. The period must sustain the pipeline:
    anything below the slowest stage initiation interval is rejected.
    """
    if n_frames < 0:
        raise SchemaError("n_frames must be >= 0")
    if n_frames and frame_period_us <= 0:
        raise SchemaError("frame period must be positive")
    if n_frames > 1:
        bottleneck = stages.bottleneck_stage()
        worst = stages.initiation_interval(bottleneck)
        if frame_period_us < worst:
            raise RateError(
                f"rate exceeds pipeline capacity: period {frame_period_us:.6g} us "
                f"is below stage {bottleneck!r} initiation interval {worst:.6g} us")
    frames = []
    for k in range(n_frames):
        t0 = k * frame_period_us
        start = t0 + stages.trigger_to_inference_us
        end = start + stages.inference_us
        frames.append(FrameEvents(
            frame=k, trigger_us=t0,
            exposure_end_us=t0 + stages.exposure_us,
            inference_start_us=start, inference_end_us=end,
            writeout_end_us=end + stages.writeout_us))
    return FrameTrace(stages=stages, frames=tuple(frames))


def render_trace(trace: FrameTrace) -> list[tuple[float, int]]:
    """Square wave that is high while inference runs: (time_us, level) edges."""
    samples = []
    for f in trace.frames:
        samples.append((f.inference_start_us, 1))
        samples.append((f.inference_end_us, 0))
    return samples


def pulses_non_overlapping(trace: FrameTrace) -> bool:
    for prev, nxt in zip(trace.frames, trace.frames[1:]):
        if nxt.inference_start_us < prev.inference_end_us:
            return False
    return True


def trace_csv(trace: FrameTrace) -> str:
    lines = ["frame,event,time_us"]
    for f in trace.frames:
        for name, t in f.items():
            lines.append(f"{f.frame},{name},{t:.6g}")
    return "\n".join(lines) + "\n"


def waveform_csv(samples: list[tuple[float, int]]) -> str:
    lines = ["time_us,level"]
    for t, level in samples:
        lines.append(f"{t:.6g},{level}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ComparisonRow:
    name: str
    latency_us: float
    speedup: float          # this platform's latency over the fastest one
    speedup_floor: int

    @property
    def display(self) -> str:
        return f"{self.speedup:.3g}×"


@dataclass(frozen=True)
class PlatformComparison:
    baseline: str           # fastest platform
    rows: tuple[ComparisonRow, ...]


def compare_platforms(latencies: Mapping[str, float]) -> PlatformComparison:
    """Slowdown of every platform relative to the fastest entry."""
    if len(latencies) < 2:
        raise SchemaError("need at least two platforms to compare")
    for name, us in latencies.items():
        if not math.isfinite(us) or us <= 0:
            raise SchemaError(f"non-positive latency for {name!r}")
    best = min(latencies, key=latencies.get)
    rows = tuple(
        ComparisonRow(name=name, latency_us=us, speedup=us / latencies[best],
                      speedup_floor=math.floor(us / latencies[best]))
        for name, us in latencies.items())
    return PlatformComparison(baseline=best, rows=rows)


@dataclass(frozen=True)
class SortingContext:
    """Physical budget the trigger must beat: actuation window and, when
    known, the cell's transit time past the sorting junction."""

    actuation_window_us: float = 1000.0
    cell_transit_us: Optional[float] = None
    frame_rate_fps: Optional[float] = None

    def __post_init__(self):
        if self.actuation_window_us <= 0:
            raise SchemaError("actuation window must be positive")
        if self.cell_transit_us is not None and self.cell_transit_us <= 0:
            raise SchemaError("cell transit time must be positive")
        if self.frame_rate_fps is not None and self.frame_rate_fps <= 0:
            raise SchemaError("frame rate must be positive")


@dataclass(frozen=True)
class FeasibilityReport:
    total_us: float         # latency including the comparator
    limit_us: float
    limit_source: str       # "actuation_window" or "cell_transit"
    margin_us: float
    passed: bool


def sorting_feasibility(total_latency_us: float, ctx: SortingContext = SortingContext(),
                        comparator_overhead_us: float = 0.1) -> FeasibilityReport:
    """Pass iff the trigger (plus the confidence comparator) lands inside
    both the actuation window and the cell transit time."""
    if total_latency_us < 0 or comparator_overhead_us < 0:
        raise SchemaError("latencies must be >= 0")
    bounds = {"actuation_window": ctx.actuation_window_us}
    if ctx.cell_transit_us is not None:
        bounds["cell_transit"] = ctx.cell_transit_us
    source = min(bounds, key=bounds.get)
    limit = bounds[source]
    total = total_latency_us + comparator_overhead_us
    return FeasibilityReport(total_us=total, limit_us=limit, limit_source=source,
                             margin_us=limit - total, passed=total <= limit)
