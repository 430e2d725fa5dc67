"""Acceptance gate: one test per headline claim, one pass/fail line each.

Every expected value here was computed independently before the library was
written (hand arithmetic or the brute-force oracles in oracles.py); nothing
is copied back from library output.
"""

import json
import math
import time

import numpy as np

import sortpipe as sp
from conftest import assert_matches_oracle, random_log, run_cli
from sortpipe import calibration as cal
from sortpipe import hw, pipeline, quantize, resources


def check(name, ok, detail=""):
    tag = "PASS" if ok else "FAIL"
    line = f"[{tag}] {name}" + (f": {detail}" if detail else "")
    print(line)
    assert ok, line


def _ref_config():
    return sp.parse_model_config(resources.reference_model_text())


def _plan(w, a, headroom=6):
    doc = {"default": {"w": list(w), "a": list(a)}, "acc_headroom": headroom}
    return sp.parse_quant_plan(json.dumps(doc))


def test_parameter_count():
    res = run_cli("describe", "--model", "student2")
    ok = res.returncode == 0 and "params: 5682" in res.stdout
    check("parameter count", ok, "describe reports params: 5682")


def test_compression_ratio():
    percent = 5682 / 28_000_000 * 100.0
    ok = round(percent, 2) == 0.02
    check("compression ratio", ok, f"{percent:.4f}% rounds to 0.02%")


def test_timing_budget():
    total = pipeline.total_latency(2.0, 10.0, 14.5, 0.2)
    after = pipeline.after_exposure_latency(2.0, 10.0, 14.5, 0.2)
    ok = total == 24.7 and after == 22.5
    check("timing budget", ok, f"total {total} us, after-exposure {after} us")


def test_throughput_arithmetic():
    stages = pipeline.PipelineStages()
    fps = pipeline.throughput_fps(stages)
    within = abs(fps - 81000.0) / 81000.0 <= 1e-3
    trace = pipeline.simulate_stream(stages, 3, 20.0)
    clean = pipeline.pulses_non_overlapping(trace)
    check("throughput arithmetic", within and clean,
          f"{fps} fps, 20 us pulses non-overlapping = {clean}")


def test_platform_comparison():
    cmp = pipeline.compare_platforms({"fpga": 14.5, "gpu": 325.0, "cpu": 183.0})
    rows = {r.name: r for r in cmp.rows}
    ok = (cmp.baseline == "fpga"
          and rows["gpu"].display == "22.4×" and rows["gpu"].speedup_floor == 22
          and rows["cpu"].display == "12.6×" and rows["cpu"].speedup_floor == 12)
    check("platform comparison", ok,
          f"gpu {rows['gpu'].display} ({rows['gpu'].speedup_floor}x), "
          f"cpu {rows['cpu'].display} ({rows['cpu'].speedup_floor}x)")


def test_pareto_monotonicity():
    config = _ref_config()
    plan = sp.parse_quant_plan(resources.default_quant_plan_text())
    device = sp.parse_device(resources.find_device_file("ku035"))
    reuse = [2 ** k for k in range(1, 11)]
    points = hw.pareto_sweep(config, plan, reuse, 250.0, device)
    lats = [p.latency_us for p in points]
    lat_ok = all(b >= a for a, b in zip(lats, lats[1:]))
    util_ok = all(
        all(points[i + 1].utilization[k] <= points[i].utilization[k]
            for k in ("dsp", "lut", "ff", "bram36"))
        for i in range(len(points) - 1))
    check("pareto monotonicity", lat_ok and util_ok,
          f"latency {lats[0]:.3f}..{lats[-1]:.3f} us over R=2..1024")


def _reference_estimate():
    config = _ref_config()
    plan = sp.parse_quant_plan(resources.default_quant_plan_text())
    hw_plan = sp.parse_hw_plan(resources.reference_hw_plan_text())
    return hw.estimate_network(config, plan, hw_plan)


def test_resource_ordering():
    est = _reference_estimate()
    by_name = {le.name: le for le in est.layers}
    conv_lut = sum(le.lut for le in est.layers if le.kind == "conv2d")
    dense_lut = sum(le.lut for le in est.layers if le.kind == "dense")
    ok = (by_name["conv2"].dsp > by_name["conv1"].dsp and conv_lut > dense_lut)
    check("resource ordering", ok,
          f"conv2 dsp {by_name['conv2'].dsp} > conv1 dsp {by_name['conv1'].dsp}; "
          f"conv lut {conv_lut} > dense lut {dense_lut}")


def test_latency_band():
    est = _reference_estimate()
    ok = est.clock_mhz == 250.0 and 7.25 <= est.latency_us <= 21.75
    check("latency band", ok,
          f"{est.latency_us:.3f} us at {est.clock_mhz:g} MHz in [7.25, 21.75]")


def test_quantization_fidelity():
    t0 = time.monotonic()
    config = _ref_config()
    weights = sp.random_weights(config, np.random.default_rng(12345))
    rng = np.random.default_rng(67890)
    images = [rng.random((48, 48, 1), dtype=np.float32) for _ in range(1000)]
    wide = quantize.agreement_rate(config, weights, _plan((32, 16), (32, 16)),
                                   images)
    narrow = quantize.agreement_rate(config, weights, _plan((16, 6), (16, 6)),
                                     images)
    elapsed = time.monotonic() - t0
    ok = wide == 1.0 and narrow >= 0.99 and elapsed < 30.0
    check("quantization fidelity", ok,
          f"wide {wide}, narrow {narrow}, {elapsed:.1f} s")


def test_calibration_oracle():
    t0 = time.monotonic()
    rng = np.random.default_rng(1234)
    for i in range(100):
        n_rows = int(rng.integers(1, 201))
        n_classes = int(rng.integers(2, 5))
        log = random_log(rng, n_rows, n_classes, with_conditions=bool(i % 2))
        assert_matches_oracle(log)
    elapsed = time.monotonic() - t0
    check("calibration oracle", elapsed < 30.0,
          f"100 logs match brute force exactly, {elapsed:.1f} s")


def test_rejection_invariants():
    rng = np.random.default_rng(77)
    ok = True
    for _ in range(25):
        log = random_log(rng, int(rng.integers(5, 120)), 2)
        rows = [r for r in cal.rejection_sweep(log) if r.condition == "overall"]
        at_half = [r for r in rows if r.threshold == 0.50]
        ok = ok and at_half and at_half[0].coverage == 1.0
        covs = [r.coverage for r in rows]
        ok = ok and all(b <= a for a, b in zip(covs, covs[1:]))
        ok = ok and all(r.false_route_rate == 1.0 - r.accuracy_accepted
                        for r in rows if r.accuracy_accepted is not None)
    check("rejection invariants", bool(ok),
          "coverage(0.50)=1 on binary logs; coverage monotone; "
          "false_route = 1 - acc_accepted")


def test_temperature_fitting():
    rows = []
    for c, n in ((0.6, 10), (0.7, 10), (0.8, 10), (0.9, 10)):
        z = math.log(c / (1.0 - c)) * 2.0
        k = round(c * n)
        for i in range(n):
            rows.append(cal.PredictionRow(logits=(z, 0.0),
                                          label=0 if i < k else 1))
    log = cal.PredictionLog(num_classes=2, rows=tuple(rows))
    fit = cal.fit_temperature(log)
    ok = abs(fit.temperature - 2.0) <= 0.05 and fit.nll_after <= fit.nll_before
    check("temperature fitting", ok,
          f"T = {fit.temperature:.4f}, nll {fit.nll_before:.4f} -> "
          f"{fit.nll_after:.4f}")
