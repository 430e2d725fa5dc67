import subprocess
import sys

import numpy as np
import pytest

import sortpipe as sp
from sortpipe import calibration, resources


@pytest.fixture(scope="session")
def ref_config():
    return sp.parse_model_config(resources.reference_model_text())


@pytest.fixture(scope="session")
def default_plan():
    return sp.parse_quant_plan(resources.default_quant_plan_text())


@pytest.fixture(scope="session")
def ref_hw_plan():
    return sp.parse_hw_plan(resources.reference_hw_plan_text())


@pytest.fixture(scope="session")
def ku035():
    return sp.parse_device(resources.find_device_file("ku035"))


@pytest.fixture(scope="session")
def ref_weights(ref_config):
    return sp.random_weights(ref_config, np.random.default_rng(12345))


def run_cli(*args, env=None, cwd=None):
    return subprocess.run([sys.executable, "-m", "sortpipe", *args],
                          capture_output=True, text=True, env=env, cwd=cwd)


def random_log(rng, n_rows, n_classes=2, with_conditions=False):
    """Random prediction log; logits scaled so confidences spread over bins."""
    rows = []
    conditions = ("clean", "shift")
    for i in range(n_rows):
        logits = tuple(float(v) for v in rng.normal(0.0, 2.0, size=n_classes))
        label = int(rng.integers(n_classes))
        cond = conditions[int(rng.integers(2))] if with_conditions else "unspecified"
        rows.append(calibration.PredictionRow(logits=logits, label=label,
                                              condition=cond))
    return calibration.PredictionLog(num_classes=n_classes, rows=tuple(rows))


def log_to_tuples(log):
    return [(row.logits, row.label, row.condition) for row in log.rows]


def assert_matches_oracle(log, n_bins=5, thresholds=calibration.DEFAULT_THRESHOLDS):
    """Bit-exact comparison of binning, ece/mce, and the rejection sweep
    against the brute-force enumeration in tests/oracles.py."""
    import oracles

    rows = log_to_tuples(log)
    bins = calibration.reliability_bins(log, n_bins)
    for b, (count, conf, acc) in zip(bins, oracles.bin_stats(rows, n_bins)):
        assert b.count == count
        assert b.mean_confidence == conf
        assert b.accuracy == acc
    assert calibration.ece(bins) == oracles.ece(rows, n_bins)
    assert calibration.mce(bins) == oracles.mce(rows, n_bins)
    for r in calibration.rejection_sweep(log, thresholds):
        subset = rows if r.condition == "overall" \
            else [x for x in rows if x[2] == r.condition]
        cov, acc, fr = oracles.reject_point(subset, r.threshold)
        assert r.coverage == cov
        assert r.accuracy_accepted == acc
        assert r.false_route_rate == fr
