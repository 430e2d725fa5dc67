"""Request/response models for the HTTP service.

Structured documents (model, quant plan, hardware plan, stages) travel as
plain JSON objects; binary blobs (weight files, raw images) travel base64
encoded; prediction logs travel as CSV text in the primary log format.
"""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel


class LayerShape(BaseModel):
    name: str
    kind: str
    shape: str
    params: int


class DescribeRequest(BaseModel):
    model: dict


class DescribeResponse(BaseModel):
    name: str
    input: str
    classes: int
    params: int
    layers: list[LayerShape]


class InferRequest(BaseModel):
    model: dict
    weights_b64: str
    image_b64: str
    quant: Optional[dict] = None


class InferResponse(BaseModel):
    path: str
    logits: list[float]
    probs: list[float]
    predicted: int


class AgreementRequest(BaseModel):
    model: dict
    weights_b64: str
    quant: dict
    images_b64: Optional[list[str]] = None
    random_count: Optional[int] = None
    seed: int = 0


class AgreementResponse(BaseModel):
    inputs: int
    agreement: float


class LayerEstimateOut(BaseModel):
    name: str
    kind: str
    reuse: int
    multipliers: int
    dsp: int
    lut: int
    ff: int
    bram36: int
    ii_cycles: int
    iteration_cycles: int
    fill_cycles: int


class EstimateRequest(BaseModel):
    model: dict
    quant: dict
    hw: dict
    device: str | dict    # packaged device name or an inline device document


class EstimateResponse(BaseModel):
    layers: list[LayerEstimateOut]
    dsp: int
    lut: int
    ff: int
    bram36: int
    clock_mhz: float
    latency_cycles: float
    latency_us: float
    bottleneck: str
    throughput_fps: float
    utilization: dict[str, float]
    limiting: str
    passed: bool
    note: str


class ParetoRequest(BaseModel):
    model: dict
    quant: dict
    device: str | dict
    reuse: list[int]
    clock_mhz: float = 250.0
    calibration: float = 1.0


class ParetoPointOut(BaseModel):
    reuse: int
    latency_us: float
    utilization: dict[str, float]


class ParetoResponse(BaseModel):
    points: list[ParetoPointOut]


class StagesIn(BaseModel):
    exposure_us: float = 2.0
    trigger_to_inference_us: float = 10.0
    inference_us: float = 14.5
    writeout_us: float = 0.2
    ii_us: Optional[dict[str, float]] = None   # None keeps the library default


class TimingRequest(BaseModel):
    stages: StagesIn = StagesIn()


class TimingResponse(BaseModel):
    total_latency_us: float
    after_exposure_us: float
    throughput_fps: float
    bottleneck_stage: str


class SimulateRequest(BaseModel):
    stages: StagesIn = StagesIn()
    frames: int
    period_us: float


class FrameEventsOut(BaseModel):
    frame: int
    trigger_us: float
    exposure_end_us: float
    inference_start_us: float
    inference_end_us: float
    writeout_end_us: float


class SimulateResponse(BaseModel):
    frames: list[FrameEventsOut]
    non_overlapping: bool


class CompareRequest(BaseModel):
    latencies: dict[str, float]


class CompareRowOut(BaseModel):
    name: str
    latency_us: float
    speedup: float
    speedup_floor: int
    display: str


class CompareResponse(BaseModel):
    baseline: str
    rows: list[CompareRowOut]


class FeasibleRequest(BaseModel):
    stages: StagesIn = StagesIn()
    window_us: float = 1000.0
    transit_us: Optional[float] = None
    comparator_us: float = 0.1


class FeasibleResponse(BaseModel):
    latency_us: float
    total_us: float
    limit_us: float
    limit_source: str
    margin_us: float
    passed: bool


class CalibrateRequest(BaseModel):
    log_csv: str
    bins: int = 5
    fit_temperature: bool = False


class BinOut(BaseModel):
    bin: int
    lo: float
    hi: float
    count: int
    conf: float
    acc: float


class CalibrateResponse(BaseModel):
    bins: list[BinOut]
    ece: float
    mce: float
    temperature: Optional[float] = None
    nll_before: Optional[float] = None
    nll_after: Optional[float] = None
    boundary: Optional[bool] = None


class RejectRequest(BaseModel):
    log_csv: str
    thresholds: Optional[list[float]] = None


class RejectRowOut(BaseModel):
    threshold: float
    condition: str
    total: int
    accepted: int
    coverage: float
    acc_accepted: Optional[float] = None
    false_route: Optional[float] = None


class RejectResponse(BaseModel):
    rows: list[RejectRowOut]
