"""HTTP service wrapping the core library, one endpoint per capability."""

from __future__ import annotations

import base64
import binascii
import json

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import calibration, hw, model, pipeline, quantize, resources
from ..errors import SortpipeError
from . import schemas


def _fail(exc: Exception) -> HTTPException:
    return HTTPException(status_code=422, detail=str(exc))


def _b64(data: str) -> bytes:
    try:
        return base64.b64decode(data, validate=True)
    except (binascii.Error, ValueError) as e:
        raise _fail(e) from e


def _stages(doc: schemas.StagesIn) -> pipeline.PipelineStages:
    kwargs = doc.model_dump(exclude_none=True)
    return pipeline.PipelineStages(**kwargs)


def _device(spec: str | dict) -> hw.DeviceBudget:
    if isinstance(spec, str):
        return hw.parse_device(resources.find_device_file(spec))
    return hw.parse_device(spec)


def create_app() -> FastAPI:
    app = FastAPI(title="sortpipe", version="0.1.0",
                  description="Fixed-point CNN inference emulation, FPGA "
                              "resource/latency estimation, sorting-pipeline "
                              "timing, and calibration analytics.")

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.get("/reference/model")
    def reference_model() -> dict:
        return json.loads(resources.reference_model_text())

    @app.get("/reference/quant")
    def reference_quant() -> dict:
        return json.loads(resources.default_quant_plan_text())

    @app.get("/reference/hw")
    def reference_hw() -> dict:
        return json.loads(resources.reference_hw_plan_text())

    @app.get("/reference/stages")
    def reference_stages() -> dict:
        return json.loads(resources.default_stages_text())

    @app.post("/model/describe", response_model=schemas.DescribeResponse)
    def describe(req: schemas.DescribeRequest):
        try:
            config = model.parse_model_config(req.model)
            shapes = model.infer_shapes(config)
            layers = []
            cur = config.input_shape
            for layer, out in zip(config.layers, shapes):
                layers.append(schemas.LayerShape(
                    name=layer.name, kind=layer.kind, shape=str(out),
                    params=model.layer_param_count(layer, cur)))
                cur = out
            return schemas.DescribeResponse(
                name=config.name, input=str(config.input_shape),
                classes=config.num_classes, params=model.param_count(config),
                layers=layers)
        except SortpipeError as e:
            raise _fail(e) from e

    @app.post("/model/infer", response_model=schemas.InferResponse)
    def infer(req: schemas.InferRequest):
        try:
            config = model.parse_model_config(req.model)
            weights = model.load_weights(config, _b64(req.weights_b64))
            image = model.load_image(config, _b64(req.image_b64))
            if req.quant is not None:
                plan = quantize.parse_quant_plan(req.quant)
                logits = quantize.forward_fixed(
                    config, quantize.quantize_weights(weights, plan), image, plan)
                path = "fixed"
            else:
                logits = model.forward_float(config, weights, image)
                path = "float"
            probs = model.softmax(logits)
            return schemas.InferResponse(
                path=path, logits=[float(v) for v in logits],
                probs=[float(v) for v in probs], predicted=int(np.argmax(logits)))
        except SortpipeError as e:
            raise _fail(e) from e

    @app.post("/quant/agreement", response_model=schemas.AgreementResponse)
    def agreement(req: schemas.AgreementRequest):
        try:
            config = model.parse_model_config(req.model)
            weights = model.load_weights(config, _b64(req.weights_b64))
            plan = quantize.parse_quant_plan(req.quant)
            if req.images_b64:
                images = [model.load_image(config, _b64(b)) for b in req.images_b64]
            elif req.random_count:
                shape = config.input_shape
                rng = np.random.default_rng(req.seed)
                images = [rng.random((shape.h, shape.w, shape.c), dtype=np.float32)
                          for _ in range(req.random_count)]
            else:
                raise HTTPException(status_code=422,
                                    detail="provide images_b64 or random_count")
            rate = quantize.agreement_rate(config, weights, plan, images)
            return schemas.AgreementResponse(inputs=len(images), agreement=rate)
        except SortpipeError as e:
            raise _fail(e) from e

    @app.post("/hw/estimate", response_model=schemas.EstimateResponse)
    def estimate(req: schemas.EstimateRequest):
        try:
            config = model.parse_model_config(req.model)
            plan = quantize.parse_quant_plan(req.quant)
            hw_plan = hw.parse_hw_plan(req.hw)
            device = _device(req.device)
            est = hw.estimate_network(config, plan, hw_plan)
            report = hw.check_budget(est, device)
            return schemas.EstimateResponse(
                layers=[schemas.LayerEstimateOut(**vars(le)) for le in est.layers],
                dsp=est.dsp, lut=est.lut, ff=est.ff, bram36=est.bram36,
                clock_mhz=est.clock_mhz, latency_cycles=est.latency_cycles,
                latency_us=est.latency_us, bottleneck=est.bottleneck,
                throughput_fps=est.throughput_fps,
                utilization=report.utilization, limiting=report.limiting,
                passed=report.passed, note=report.note)
        except SortpipeError as e:
            raise _fail(e) from e

    @app.post("/hw/pareto", response_model=schemas.ParetoResponse)
    def pareto(req: schemas.ParetoRequest):
        try:
            config = model.parse_model_config(req.model)
            plan = quantize.parse_quant_plan(req.quant)
            device = _device(req.device)
            points = hw.pareto_sweep(config, plan, req.reuse, req.clock_mhz,
                                     device, req.calibration)
            return schemas.ParetoResponse(points=[
                schemas.ParetoPointOut(reuse=p.reuse, latency_us=p.latency_us,
                                       utilization=p.utilization)
                for p in points])
        except SortpipeError as e:
            raise _fail(e) from e

    @app.post("/pipeline/timing", response_model=schemas.TimingResponse)
    def timing(req: schemas.TimingRequest):
        try:
            stages = _stages(req.stages)
            return schemas.TimingResponse(
                total_latency_us=pipeline.total_latency(stages),
                after_exposure_us=pipeline.after_exposure_latency(stages),
                throughput_fps=pipeline.throughput_fps(stages),
                bottleneck_stage=stages.bottleneck_stage())
        except SortpipeError as e:
            raise _fail(e) from e

    @app.post("/pipeline/simulate", response_model=schemas.SimulateResponse)
    def simulate(req: schemas.SimulateRequest):
        try:
            stages = _stages(req.stages)
            tr = pipeline.simulate_stream(stages, req.frames, req.period_us)
            return schemas.SimulateResponse(
                frames=[schemas.FrameEventsOut(**vars(f)) for f in tr.frames],
                non_overlapping=pipeline.pulses_non_overlapping(tr))
        except SortpipeError as e:
            raise _fail(e) from e

    @app.post("/pipeline/compare", response_model=schemas.CompareResponse)
    def compare(req: schemas.CompareRequest):
        try:
            cmp = pipeline.compare_platforms(req.latencies)
            return schemas.CompareResponse(baseline=cmp.baseline, rows=[
                schemas.CompareRowOut(name=r.name, latency_us=r.latency_us,
                                      speedup=r.speedup,
                                      speedup_floor=r.speedup_floor,
                                      display=r.display)
                for r in cmp.rows])
        except SortpipeError as e:
            raise _fail(e) from e

    @app.post("/pipeline/feasible", response_model=schemas.FeasibleResponse)
    def feasible(req: schemas.FeasibleRequest):
        try:
            stages = _stages(req.stages)
            total = pipeline.total_latency(stages)
            ctx = pipeline.SortingContext(actuation_window_us=req.window_us,
                                          cell_transit_us=req.transit_us)
            rep = pipeline.sorting_feasibility(total, ctx, req.comparator_us)
            return schemas.FeasibleResponse(
                latency_us=total, total_us=rep.total_us, limit_us=rep.limit_us,
                limit_source=rep.limit_source, margin_us=rep.margin_us,
                passed=rep.passed)
        except SortpipeError as e:
            raise _fail(e) from e

    @app.post("/calibration/report", response_model=schemas.CalibrateResponse)
    def calibrate(req: schemas.CalibrateRequest):
        try:
            log = calibration.parse_prediction_log(req.log_csv)
            fit = calibration.fit_temperature(log) if req.fit_temperature else None
            bins = calibration.reliability_bins(log, req.bins)
            out = schemas.CalibrateResponse(
                bins=[schemas.BinOut(bin=i, lo=b.lower, hi=b.upper,
                                     count=b.count, conf=b.mean_confidence,
                                     acc=b.accuracy)
                      for i, b in enumerate(bins, start=1)],
                ece=calibration.ece(bins), mce=calibration.mce(bins))
            if fit is not None:
                out.temperature = fit.temperature
                out.nll_before = fit.nll_before
                out.nll_after = fit.nll_after
                out.boundary = fit.boundary
            return out
        except SortpipeError as e:
            raise _fail(e) from e

    @app.post("/calibration/reject", response_model=schemas.RejectResponse)
    def reject(req: schemas.RejectRequest):
        try:
            log = calibration.parse_prediction_log(req.log_csv)
            ts = req.thresholds if req.thresholds else calibration.DEFAULT_THRESHOLDS
            rows = calibration.rejection_sweep(log, ts)
            return schemas.RejectResponse(rows=[
                schemas.RejectRowOut(threshold=r.threshold, condition=r.condition,
                                     total=r.total, accepted=r.accepted,
                                     coverage=r.coverage,
                                     acc_accepted=r.accuracy_accepted,
                                     false_route=r.false_route_rate)
                for r in rows])
        except SortpipeError as e:
            raise _fail(e) from e

    return app


app = create_app()
