"""End-to-end command-line tests via subprocess; every report must be
byte-identical across reruns."""

import json
import os

import numpy as np
import pytest

import sortpipe as sp
from conftest import run_cli
from sortpipe import calibration as cal
from sortpipe import pipeline, resources

HAND_CSV = "logit_0,logit_1,label\n2,0,0\n0,1,0\n3,0,0\n0,3,1\n"
COND_CSV = ("logit_0,logit_1,label,condition\n"
            "2,0,0,clean\n0,1,0,clean\n3,0,0,shift\n0,3,1,shift\n")


@pytest.fixture(scope="module")
def artifacts(tmp_path_factory):
    """Weights and one image on disk, shared by the inference commands."""
    root = tmp_path_factory.mktemp("cli")
    config = sp.parse_model_config(resources.reference_model_text())
    weights = sp.random_weights(config, np.random.default_rng(12345))
    wpath = root / "weights.bin"
    wpath.write_bytes(sp.save_weights(config, weights))
    rng = np.random.default_rng(99)
    image = rng.random((48, 48, 1), dtype=np.float32)
    ipath = root / "image.raw"
    ipath.write_bytes(sp.save_image(image))
    return {"root": root, "weights": str(wpath), "image": str(ipath)}


# --- describe -------------------------------------------------------------

def test_describe_packaged_model():
    res = run_cli("describe", "--model", "student2")
    assert res.returncode == 0
    assert "params: 5682" in res.stdout
    assert "classes: 2" in res.stdout
    assert res.stdout.count("conv") >= 2


def test_describe_missing_doc():
    res = run_cli("describe", "--model", "no-such-model")
    assert res.returncode == 1
    assert "not found" in res.stderr


def test_missing_required_option():
    res = run_cli("describe")
    assert res.returncode == 1
    assert "error:" in res.stderr


def test_unknown_subcommand():
    res = run_cli("frobnicate")
    assert res.returncode == 1


# --- infer ----------------------------------------------------------------

def test_infer_float_and_rerun(artifacts):
    args = ("infer", "--model", "student2",
            "--weights", artifacts["weights"], "--image", artifacts["image"])
    res = run_cli(*args)
    assert res.returncode == 0
    assert "path: float" in res.stdout
    assert "class:" in res.stdout
    again = run_cli(*args)
    assert again.stdout == res.stdout


def test_infer_fixed(artifacts):
    res = run_cli("infer", "--model", "student2",
                  "--weights", artifacts["weights"],
                  "--image", artifacts["image"], "--quant", "default")
    assert res.returncode == 0
    assert "path: fixed" in res.stdout
    again = run_cli("infer", "--model", "student2",
                    "--weights", artifacts["weights"],
                    "--image", artifacts["image"], "--quant", "default")
    assert again.stdout == res.stdout


def test_infer_missing_weights_file(artifacts):
    res = run_cli("infer", "--model", "student2",
                  "--weights", str(artifacts["root"] / "nope.bin"),
                  "--image", artifacts["image"])
    assert res.returncode == 1
    assert "error:" in res.stderr


# --- quant-eval -----------------------------------------------------------

def test_quant_eval_random(artifacts):
    args = ("quant-eval", "--model", "student2",
            "--weights", artifacts["weights"], "--quant", "default",
            "--random", "20", "--seed", "3")
    res = run_cli(*args)
    assert res.returncode == 0
    assert "inputs: 20" in res.stdout
    assert "agreement: " in res.stdout
    assert run_cli(*args).stdout == res.stdout


def test_quant_eval_inputs_dir(artifacts, tmp_path):
    rng = np.random.default_rng(5)
    for i in range(3):
        img = rng.random((48, 48, 1), dtype=np.float32)
        (tmp_path / f"img{i}.raw").write_bytes(sp.save_image(img))
    res = run_cli("quant-eval", "--model", "student2",
                  "--weights", artifacts["weights"], "--quant", "default",
                  "--inputs", str(tmp_path))
    assert res.returncode == 0
    assert "inputs: 3" in res.stdout


def test_quant_eval_needs_source(artifacts):
    res = run_cli("quant-eval", "--model", "student2",
                  "--weights", artifacts["weights"], "--quant", "default")
    assert res.returncode == 1
    assert "--inputs" in res.stderr


# --- estimate -------------------------------------------------------------

def test_estimate_reference_fits():
    res = run_cli("estimate", "--model", "student2", "--hw", "reference",
                  "--quant", "default", "--device", "ku035")
    assert res.returncode == 0
    assert "budget: PASS (ku035)" in res.stdout
    assert "limiting: dsp" in res.stdout
    assert "totals: dsp 277 " in res.stdout


def test_estimate_tiny_device_fails(tmp_path):
    dev = {"name": "tiny", "dsp": 10, "lut": 1000, "ff": 1000,
           "bram36": 2, "max_clock_mhz": 300.0}
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(dev))
    res = run_cli("estimate", "--model", "student2", "--hw", "reference",
                  "--quant", "default", "--device", str(path))
    assert res.returncode == 2
    assert "budget: FAIL (tiny)" in res.stdout


def test_estimate_device_dir_env(tmp_path):
    packaged = resources.find_device_file("ku035")
    (tmp_path / "lab1.json").write_text(packaged)
    env = dict(os.environ, SORTPIPE_DEVICE_DIR=str(tmp_path))
    res = run_cli("estimate", "--model", "student2", "--hw", "reference",
                  "--quant", "default", "--device", "lab1", env=env)
    assert res.returncode == 0
    assert "budget: PASS" in res.stdout


# --- pareto ---------------------------------------------------------------

def test_pareto_csv(tmp_path):
    out = tmp_path / "pareto.csv"
    res = run_cli("pareto", "--model", "student2", "--quant", "default",
                  "--device", "ku035", "--reuse", "2,4,8",
                  "--out", str(out))
    assert res.returncode == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "reuse,latency_us,dsp_util,lut_util,ff_util,bram_util"
    assert len(lines) == 4
    assert [ln.split(",")[0] for ln in lines[1:]] == ["2", "4", "8"]
    out2 = tmp_path / "pareto2.csv"
    run_cli("pareto", "--model", "student2", "--quant", "default",
            "--device", "ku035", "--reuse", "2,4,8", "--out", str(out2))
    assert out2.read_text() == out.read_text()


def test_pareto_bad_reuse_list(tmp_path):
    res = run_cli("pareto", "--model", "student2", "--quant", "default",
                  "--device", "ku035", "--reuse", "2,x",
                  "--out", str(tmp_path / "p.csv"))
    assert res.returncode == 1


# --- simulate / trace -----------------------------------------------------

def test_simulate_csv(tmp_path):
    out = tmp_path / "events.csv"
    res = run_cli("simulate", "--stages", "default", "--frames", "3",
                  "--period-us", "20", "--out", str(out))
    assert res.returncode == 0
    stages = pipeline.parse_stages(resources.default_stages_text())
    expected = pipeline.trace_csv(pipeline.simulate_stream(stages, 3, 20.0))
    assert out.read_text() == expected


def test_simulate_too_fast(tmp_path):
    res = run_cli("simulate", "--stages", "default", "--frames", "2",
                  "--period-us", "12", "--out", str(tmp_path / "e.csv"))
    assert res.returncode == 1
    assert "inference" in res.stderr


def test_trace_waveform(tmp_path):
    out = tmp_path / "wave.csv"
    res = run_cli("trace", "--stages", "default", "--out", str(out))
    assert res.returncode == 0
    assert out.read_text() == "time_us,level\n10,1\n24.5,0\n"


# --- compare --------------------------------------------------------------

def test_compare_three_platforms():
    res = run_cli("compare", "--latency", "fpga=14.5",
                  "--latency", "gpu=325", "--latency", "cpu=183")
    assert res.returncode == 0
    assert res.stdout == ("baseline: fpga 14.5 us\n"
                          "gpu: 325 us 22.4× (22×)\n"
                          "cpu: 183 us 12.6× (12×)\n")


def test_compare_bad_entry():
    res = run_cli("compare", "--latency", "gpu")
    assert res.returncode == 1
    assert "name=us" in res.stderr


# --- feasible -------------------------------------------------------------

def test_feasible_pass():
    res = run_cli("feasible", "--stages", "default", "--window-us", "1000")
    assert res.returncode == 0
    assert "verdict: PASS" in res.stdout
    assert "margin_us: 975.2" in res.stdout


def test_feasible_transit_fail():
    res = run_cli("feasible", "--stages", "default", "--window-us", "1000",
                  "--transit-us", "18")
    assert res.returncode == 2
    assert "verdict: FAIL" in res.stdout
    assert "(cell_transit)" in res.stdout


# --- calibrate / reject ---------------------------------------------------

def test_calibrate_report(tmp_path):
    path = tmp_path / "log.csv"
    path.write_text(HAND_CSV)
    res = run_cli("calibrate", "--log", str(path))
    assert res.returncode == 0
    log = cal.parse_prediction_log(HAND_CSV)
    bins = cal.reliability_bins(log, 5)
    assert res.stdout == cal.bins_csv(bins, cal.ece(bins), cal.mce(bins))


def test_calibrate_with_temperature(tmp_path):
    path = tmp_path / "log.csv"
    path.write_text(HAND_CSV)
    res = run_cli("calibrate", "--log", str(path), "--fit-temperature")
    assert res.returncode == 0
    summary = res.stdout.strip().splitlines()[-1]
    assert summary.count(",") == 2
    assert summary.split(",")[2] != ""


def test_calibrate_missing_file(tmp_path):
    res = run_cli("calibrate", "--log", str(tmp_path / "none.csv"))
    assert res.returncode == 1
    assert "error:" in res.stderr


def test_reject_default_thresholds(tmp_path):
    path = tmp_path / "log.csv"
    path.write_text(HAND_CSV)
    res = run_cli("reject", "--log", str(path))
    assert res.returncode == 0
    log = cal.parse_prediction_log(HAND_CSV)
    expected = cal.rejection_csv(cal.rejection_sweep(log))
    assert res.stdout == expected
    assert res.stdout.startswith("threshold,coverage,")


def test_reject_with_conditions(tmp_path):
    path = tmp_path / "log.csv"
    path.write_text(COND_CSV)
    res = run_cli("reject", "--log", str(path), "--thresholds", "0.5,0.9")
    assert res.returncode == 0
    header = res.stdout.splitlines()[0]
    assert header.endswith(",condition")
    assert any(",clean" in ln for ln in res.stdout.splitlines()[1:])


def test_reject_empty_log(tmp_path):
    path = tmp_path / "log.csv"
    path.write_text("logit_0,logit_1,label\n")
    res = run_cli("reject", "--log", str(path))
    assert res.returncode == 1
    assert "empty log" in res.stderr
