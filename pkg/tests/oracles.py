"""Independent brute-force reference implementations the tests check against.

These deliberately re-derive results by direct enumeration (filter, count,
divide) instead of sharing code with the library. Where a test demands
bit-exact equality, the arithmetic here keeps the same left-to-right,
row-order accumulation discipline the library documents; everything else
about the structure is independent.
"""

from __future__ import annotations

import math

import numpy as np


# --- scalar probability helpers -------------------------------------------

def softmax(logits):
    m = logits[0]
    for x in logits[1:]:
        if x > m:
            m = x
    exps = [math.exp(x - m) for x in logits]
    s = 0.0
    for e in exps:
        s += e
    return [e / s for e in exps]


def predicted_class(logits):
    best = 0
    for i in range(1, len(logits)):
        if logits[i] > logits[best]:
            best = i
    return best


def confidence(logits):
    p = softmax(logits)
    return p[predicted_class(p)]


# --- calibration by direct enumeration ------------------------------------
# rows are (logits tuple, label, condition) triples

def bin_of(conf, n_bins):
    idx = math.ceil(conf * n_bins)
    if idx < 1:
        idx = 1
    if idx > n_bins:
        idx = n_bins
    return idx


def bin_stats(rows, n_bins=5):
    """Per bin: (count, mean confidence, accuracy); empty bins give zeros."""
    stats = []
    for b in range(1, n_bins + 1):
        members = [r for r in rows if bin_of(confidence(r[0]), n_bins) == b]
        count = len(members)
        conf_sum = 0.0
        for r in members:
            conf_sum += confidence(r[0])
        n_correct = 0
        for r in members:
            if predicted_class(r[0]) == r[1]:
                n_correct += 1
        stats.append((count,
                      conf_sum / count if count else 0.0,
                      n_correct / count if count else 0.0))
    return stats


def ece(rows, n_bins=5):
    stats = bin_stats(rows, n_bins)
    n = len(rows)
    total = 0.0
    for count, conf, acc in stats:
        if count:
            total += (count / n) * abs(acc - conf)
    return total


def mce(rows, n_bins=5):
    worst = None
    for count, conf, acc in bin_stats(rows, n_bins):
        if count:
            gap = abs(acc - conf)
            if worst is None or gap > worst:
                worst = gap
    return worst


def reject_point(rows, threshold):
    """(coverage, accuracy over accepted or None, false-route or None)."""
    accepted = [r for r in rows if confidence(r[0]) >= threshold]
    coverage = len(accepted) / len(rows) if rows else 0.0
    if not accepted:
        return coverage, None, None
    n_correct = 0
    for r in accepted:
        if predicted_class(r[0]) == r[1]:
            n_correct += 1
    acc = n_correct / len(accepted)
    return coverage, acc, 1.0 - acc


def nll(rows, temperature=1.0):
    total = 0.0
    for logits, label, _ in rows:
        scaled = [x / temperature for x in logits]
        probs = softmax(scaled)
        total += -math.log(probs[label])
    return total / len(rows)


# --- dense / conv / pool by triple loop ------------------------------------

def conv2d_same(x, kernel, bias):
    """x: HxWxCin, kernel: (out, in, ky, kx), zero padding, stride 1."""
    h, w, cin = x.shape
    cout, _, k, _ = kernel.shape
    pad = k // 2
    out = np.zeros((h, w, cout), dtype=np.float64)
    for oy in range(h):
        for ox in range(w):
            for oc in range(cout):
                acc = 0.0 if bias is None else float(bias[oc])
                for ky in range(k):
                    for kx in range(k):
                        iy, ix = oy + ky - pad, ox + kx - pad
                        if 0 <= iy < h and 0 <= ix < w:
                            for ic in range(cin):
                                acc += float(x[iy, ix, ic]) * float(kernel[oc, ic, ky, kx])
                out[oy, ox, oc] = acc
    return out


def maxpool(x, win):
    h, w, c = x.shape
    out = np.zeros((h // win, w // win, c), dtype=np.float64)
    for oy in range(h // win):
        for ox in range(w // win):
            for ch in range(c):
                block = [float(x[oy * win + dy, ox * win + dx, ch])
                         for dy in range(win) for dx in range(win)]
                out[oy, ox, ch] = max(block)
    return out


def dense(v, weight, bias):
    n_out, n_in = weight.shape
    out = np.zeros(n_out, dtype=np.float64)
    for o in range(n_out):
        acc = 0.0 if bias is None else float(bias[o])
        for i in range(n_in):
            acc += float(weight[o, i]) * float(v[i])
        out[o] = acc
    return out


# --- misc -----------------------------------------------------------------

def ceil_div_by_counting(mults, r):
    """Number of size-r groups needed to cover `mults` items."""
    groups = 0
    left = mults
    while left > 0:
        left -= r
        groups += 1
    return groups
