"""Deterministic command-line interface over the library's file formats.

Exit codes: 0 success, 1 input/usage error, 2 infeasible result (budget or
timing verdict fails). All numeric report fields use 6-significant-digit
formatting so reruns are byte-identical.
"""

from __future__ import annotations

import os
import sys

import click
import numpy as np

from . import calibration, hw, model, pipeline, quantize, resources
from .errors import SchemaError, SortpipeError


class Infeasible(Exception):
    """Verdict failure; the report has already been printed."""


def g6(x: float) -> str:
    return f"{x:.6g}"


_PACKAGED = {
    "model": {"student2": resources.reference_model_text,
              "reference": resources.reference_model_text},
    "quant": {"default": resources.default_quant_plan_text},
    "hw": {"reference": resources.reference_hw_plan_text,
           "default": resources.reference_hw_plan_text},
    "stages": {"default": resources.default_stages_text},
}


def _read_doc(value: str, kind: str) -> str:
    """A path on disk, or the name of a packaged document ("student2",
    "default", "reference")."""
    if os.path.isfile(value):
        with open(value) as fh:
            return fh.read()
    key = value[:-5] if value.endswith(".json") else value
    named = _PACKAGED[kind]
    if key in named:
        return named[key]()
    raise SchemaError(f"{kind} document not found: {value}")


def _read_bytes(path: str) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def _load_model(value: str) -> model.ModelConfig:
    return model.parse_model_config(_read_doc(value, "model"))


def _load_plan(value: str) -> quantize.QuantPlan:
    return quantize.parse_quant_plan(_read_doc(value, "quant"))


def _load_stages(value: str) -> pipeline.PipelineStages:
    return pipeline.parse_stages(_read_doc(value, "stages"))


def _load_device(value: str) -> hw.DeviceBudget:
    return hw.parse_device(resources.find_device_file(value))


def _parse_int_list(text: str, what: str) -> list[int]:
    try:
        values = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise SchemaError(f"bad {what} list: {text!r}") from None
    if not values:
        raise SchemaError(f"empty {what} list")
    return values


def _parse_float_list(text: str, what: str) -> list[float]:
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise SchemaError(f"bad {what} list: {text!r}") from None
    if not values:
        raise SchemaError(f"empty {what} list")
    return values


@click.group()
def cli():
    """Model description, fixed-point inference, hardware estimation,
    pipeline timing, and calibration analytics."""


@cli.command()
@click.option("--model", "model_doc", required=True, help="model JSON (path or packaged name)")
def describe(model_doc):
    """Print parameter count and per-layer output shapes."""
    config = _load_model(model_doc)
    shapes = model.infer_shapes(config)
    click.echo(f"model: {config.name}")
    click.echo(f"input: {config.input_shape}")
    click.echo(f"classes: {config.num_classes}")
    click.echo(f"params: {model.param_count(config)}")
    click.echo("layers:")
    cur = config.input_shape
    for layer, out in zip(config.layers, shapes):
        n = model.layer_param_count(layer, cur)
        click.echo(f"  {layer.name} {layer.kind} -> {out} params {n}")
        cur = out


@cli.command()
@click.option("--model", "model_doc", required=True)
@click.option("--weights", "weights_path", required=True, type=click.Path())
@click.option("--image", "image_path", required=True, type=click.Path())
@click.option("--quant", "quant_doc", default=None,
              help="quant plan JSON; runs the fixed-point path when given")
def infer(model_doc, weights_path, image_path, quant_doc):
    """Run one image through the float (or fixed-point) network."""
    config = _load_model(model_doc)
    weights = model.load_weights(config, _read_bytes(weights_path))
    image = model.load_image(config, _read_bytes(image_path))
    if quant_doc is not None:
        plan = _load_plan(quant_doc)
        qweights = quantize.quantize_weights(weights, plan)
        logits = quantize.forward_fixed(config, qweights, image, plan)
        click.echo("path: fixed")
    else:
        logits = model.forward_float(config, weights, image)
        click.echo("path: float")
    probs = model.softmax(logits)
    click.echo("logits: " + " ".join(g6(v) for v in logits))
    click.echo("probs: " + " ".join(g6(v) for v in probs))
    click.echo(f"class: {int(np.argmax(logits))}")


@cli.command("quant-eval")
@click.option("--model", "model_doc", required=True)
@click.option("--weights", "weights_path", required=True, type=click.Path())
@click.option("--quant", "quant_doc", required=True)
@click.option("--inputs", "inputs_dir", default=None, type=click.Path(),
              help="directory of raw image files")
@click.option("--random", "n_random", default=None, type=int,
              help="evaluate on N seeded random images instead of --inputs")
@click.option("--seed", default=0, type=int, show_default=True)
def quant_eval(model_doc, weights_path, quant_doc, inputs_dir, n_random, seed):
    """Argmax agreement between the fixed-point and float paths."""
    config = _load_model(model_doc)
    weights = model.load_weights(config, _read_bytes(weights_path))
    plan = _load_plan(quant_doc)
    if inputs_dir is not None:
        names = sorted(n for n in os.listdir(inputs_dir)
                       if not n.startswith(".")
                       and os.path.isfile(os.path.join(inputs_dir, n)))
        if not names:
            raise SchemaError(f"no image files in {inputs_dir}")
        images = [model.load_image(config, _read_bytes(os.path.join(inputs_dir, n)))
                  for n in names]
    elif n_random is not None:
        if n_random < 1:
            raise SchemaError("--random must be >= 1")
        shape = config.input_shape
        rng = np.random.default_rng(seed)
        images = [rng.random((shape.h, shape.w, shape.c), dtype=np.float32)
                  for _ in range(n_random)]
    else:
        raise SchemaError("provide --inputs DIR or --random N")
    rate = quantize.agreement_rate(config, weights, plan, images)
    click.echo(f"inputs: {len(images)}")
    click.echo(f"agreement: {g6(rate)}")


@cli.command()
@click.option("--model", "model_doc", required=True)
@click.option("--hw", "hw_doc", required=True, help="hardware plan JSON")
@click.option("--quant", "quant_doc", required=True)
@click.option("--device", "device_doc", required=True,
              help="device JSON (path, $SORTPIPE_DEVICE_DIR entry, or packaged name)")
def estimate(model_doc, hw_doc, quant_doc, device_doc):
    """Per-layer resource and latency estimate plus a device budget check.

    Exits 2 when the design does not fit the device.
    """
    config = _load_model(model_doc)
    plan = _load_plan(quant_doc)
    hw_plan = hw.parse_hw_plan(_read_doc(hw_doc, "hw"))
    device = _load_device(device_doc)
    est = hw.estimate_network(config, plan, hw_plan)
    report = hw.check_budget(est, device)
    click.echo("layers:")
    click.echo("  name kind reuse multipliers dsp lut ff bram36 iteration_cycles fill_cycles")
    for le in est.layers:
        click.echo(f"  {le.name} {le.kind} {le.reuse} {le.multipliers} {le.dsp} "
                   f"{le.lut} {le.ff} {le.bram36} {le.iteration_cycles} {le.fill_cycles}")
    click.echo(f"totals: dsp {est.dsp} lut {est.lut} ff {est.ff} bram36 {est.bram36}")
    click.echo(f"clock_mhz: {g6(est.clock_mhz)}")
    click.echo(f"latency_cycles: {g6(est.latency_cycles)}")
    click.echo(f"latency_us: {g6(est.latency_us)}")
    click.echo(f"bottleneck: {est.bottleneck}")
    click.echo(f"throughput_fps: {g6(est.throughput_fps)}")
    util = " ".join(f"{k} {g6(v)}" for k, v in report.utilization.items())
    click.echo(f"utilization: {util}")
    click.echo(f"limiting: {report.limiting}")
    click.echo(f"note: {report.note}")
    click.echo(f"budget: {'PASS' if report.passed else 'FAIL'} ({device.name})")
    if not report.passed:
        raise Infeasible


@cli.command()
@click.option("--model", "model_doc", required=True)
@click.option("--quant", "quant_doc", required=True)
@click.option("--device", "device_doc", required=True)
@click.option("--reuse", "reuse_list", required=True,
              help="comma-separated reuse factors, e.g. 2,4,8")
@click.option("--clock-mhz", default=250.0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def pareto(model_doc, quant_doc, device_doc, reuse_list, clock_mhz, out_path):
    """Sweep a uniform reuse factor and write the latency/utilization CSV."""
    config = _load_model(model_doc)
    plan = _load_plan(quant_doc)
    device = _load_device(device_doc)
    reuse = _parse_int_list(reuse_list, "reuse")
    points = hw.pareto_sweep(config, plan, reuse, clock_mhz, device)
    lines = ["reuse,latency_us,dsp_util,lut_util,ff_util,bram_util"]
    for p in points:
        u = p.utilization
        lines.append(f"{p.reuse},{g6(p.latency_us)},{g6(u['dsp'])},"
                     f"{g6(u['lut'])},{g6(u['ff'])},{g6(u['bram36'])}")
    with open(out_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    click.echo(f"wrote {len(points)} points to {out_path}")


@cli.command()
@click.option("--stages", "stages_doc", required=True)
@click.option("--frames", required=True, type=int)
@click.option("--period-us", "period_us", required=True, type=float)
@click.option("--out", "out_path", required=True, type=click.Path())
def simulate(stages_doc, frames, period_us, out_path):
    """Simulate a periodic frame stream and write the event CSV."""
    stages = _load_stages(stages_doc)
    trace = pipeline.simulate_stream(stages, frames, period_us)
    with open(out_path, "w") as fh:
        fh.write(pipeline.trace_csv(trace))
    click.echo(f"wrote {len(trace.frames)} frames to {out_path}")


@cli.command()
@click.option("--stages", "stages_doc", required=True)
@click.option("--frames", default=1, show_default=True, type=int)
@click.option("--period-us", "period_us", default=20.0, show_default=True, type=float)
@click.option("--out", "out_path", required=True, type=click.Path())
def trace(stages_doc, frames, period_us, out_path):
    """Write the inference-activity square wave as a CSV."""
    stages = _load_stages(stages_doc)
    tr = pipeline.simulate_stream(stages, frames, period_us)
    with open(out_path, "w") as fh:
        fh.write(pipeline.waveform_csv(pipeline.render_trace(tr)))
    click.echo(f"wrote {2 * len(tr.frames)} edges to {out_path}")


@cli.command()
@click.option("--latency", "latencies", multiple=True, required=True,
              help="name=microseconds; repeat per platform")
def compare(latencies):
    """Slowdown of each platform versus the fastest entry."""
    table = {}
    for item in latencies:
        name, sep, value = item.partition("=")
        if not sep or not name:
            raise SchemaError(f"bad --latency entry {item!r}; expected name=us")
        try:
            table[name] = float(value)
        except ValueError:
            raise SchemaError(f"bad latency value in {item!r}") from None
    cmp = pipeline.compare_platforms(table)
    base = cmp.rows[[r.name for r in cmp.rows].index(cmp.baseline)]
    click.echo(f"baseline: {cmp.baseline} {g6(base.latency_us)} us")
    for row in cmp.rows:
        if row.name == cmp.baseline:
            continue
        click.echo(f"{row.name}: {g6(row.latency_us)} us {row.display} "
                   f"({row.speedup_floor}×)")


@cli.command()
@click.option("--stages", "stages_doc", required=True)
@click.option("--window-us", "window_us", required=True, type=float)
@click.option("--transit-us", "transit_us", default=None, type=float)
@click.option("--comparator-us", "comparator_us", default=0.1, show_default=True, type=float)
def feasible(stages_doc, window_us, transit_us, comparator_us):
    """Check the sorting-trigger latency against the actuation budget.

    Exits 2 when the budget is missed.
    """
    stages = _load_stages(stages_doc)
    total = pipeline.total_latency(stages)
    ctx = pipeline.SortingContext(actuation_window_us=window_us,
                                  cell_transit_us=transit_us)
    rep = pipeline.sorting_feasibility(total, ctx, comparator_us)
    click.echo(f"latency_us: {g6(total)}")
    click.echo(f"total_us: {g6(rep.total_us)}")
    click.echo(f"limit_us: {g6(rep.limit_us)} ({rep.limit_source})")
    click.echo(f"margin_us: {g6(rep.margin_us)}")
    click.echo(f"verdict: {'PASS' if rep.passed else 'FAIL'}")
    if not rep.passed:
        raise Infeasible


@cli.command()
@click.option("--log", "log_path", required=True, type=click.Path())
@click.option("--bins", "n_bins", default=5, show_default=True, type=int)
@click.option("--fit-temperature", "fit_t", is_flag=True)
def calibrate(log_path, n_bins, fit_t):
    """Reliability bins with the ece,mce,temperature summary line."""
    log = calibration.load_prediction_log(log_path)
    fit = calibration.fit_temperature(log) if fit_t else None
    bins = calibration.reliability_bins(log, n_bins)
    text = calibration.bins_csv(bins, calibration.ece(bins), calibration.mce(bins),
                                fit.temperature if fit else None)
    click.echo(text, nl=False)
    if fit is not None and fit.boundary:
        click.echo(f"note: boundary solution at T = {g6(fit.temperature)}", err=True)


@cli.command()
@click.option("--log", "log_path", required=True, type=click.Path())
@click.option("--thresholds", "thresholds", default=None,
              help="comma-separated confidence thresholds")
def reject(log_path, thresholds):
    """Confidence-threshold rejection sweep as CSV."""
    log = calibration.load_prediction_log(log_path)
    ts = (_parse_float_list(thresholds, "threshold") if thresholds is not None
          else calibration.DEFAULT_THRESHOLDS)
    rows = calibration.rejection_sweep(log, ts)
    click.echo(calibration.rejection_csv(rows), nl=False)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.ClickException as e:
        click.echo(f"error: {e.format_message()}", err=True)
        return 1
    except click.exceptions.Abort:
        return 1
    except Infeasible:
        return 2
    except SortpipeError as e:
        click.echo(f"error: {e}", err=True)
        return 1
    except OSError as e:
        click.echo(f"error: {e}", err=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
