"""Reliability binning, expected/maximum calibration error, temperature
scaling, and confidence-threshold rejection sweeps over prediction logs.

All arithmetic here is deliberately scalar Python, accumulated left to
right in row order. Reports must be reproducible bit-for-bit against a
naive enumeration, so no vectorized reductions (whose summation order
differs) are used. Logs are small; speed is irrelevant.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

from .errors import LogFormatError, SchemaError

CONDITIONS = ("clean", "shift", "unspecified")
DEFAULT_THRESHOLDS = (0.50, 0.70, 0.80, 0.85, 0.90, 0.95, 0.99)
TEMPERATURE_RANGE = (0.05, 20.0)


def softmax_probs(logits: Sequence[float]) -> list[float]:
    """Max-subtracted softmax, scalar arithmetic, left-to-right sums."""
    m = logits[0]
    for x in logits[1:]:
        if x > m:
            m = x
    exps = [math.exp(x - m) for x in logits]
    total = 0.0
    for e in exps:
        total += e
    return [e / total for e in exps]


def argmax_index(values: Sequence[float]) -> int:
    """Index of the maximum; ties break toward the lower index."""
    best = 0
    for i in range(1, len(values)):
        if values[i] > values[best]:
            best = i
    return best


@dataclass(frozen=True)
class PredictionRow:
    logits: tuple[float, ...]
    label: int
    condition: str = "unspecified"

    @property
    def predicted(self) -> int:
        return argmax_index(self.logits)

    @property
    def confidence(self) -> float:
        probs = softmax_probs(self.logits)
        return probs[argmax_index(probs)]

    @property
    def correct(self) -> bool:
        return self.predicted == self.label


@dataclass(frozen=True)
class PredictionLog:
    num_classes: int
    rows: tuple[PredictionRow, ...]

    def __post_init__(self):
        if self.num_classes < 2:
            raise LogFormatError("log needs at least 2 classes")
        for i, row in enumerate(self.rows):
            if len(row.logits) != self.num_classes:
                raise LogFormatError(f"row {i}: expected {self.num_classes} logits")
            if not all(math.isfinite(x) for x in row.logits):
                raise LogFormatError(f"row {i}: non-finite logit")
            if not 0 <= row.label < self.num_classes:
                raise LogFormatError(f"row {i}: label out of range")

    def __len__(self) -> int:
        return len(self.rows)

    def conditions(self) -> list[str]:
        present = {row.condition for row in self.rows}
        return [c for c in CONDITIONS if c in present] \
            + sorted(present - set(CONDITIONS))

    def subset(self, condition: str) -> "PredictionLog":
        return PredictionLog(self.num_classes,
                             tuple(r for r in self.rows if r.condition == condition))


def parse_prediction_log(text: str) -> PredictionLog:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise LogFormatError("empty log") from None
    header = [h.strip() for h in header]
    n = 0
    while n < len(header) and header[n] == f"logit_{n}":
        n += 1
    if n < 2:
        raise LogFormatError("header must start with logit_0,logit_1,...")
    tail = header[n:]
    if tail not in (["label"], ["label", "condition"]):
        raise LogFormatError("header must end with label[,condition]")
    has_condition = len(tail) == 2
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        if not rec or (len(rec) == 1 and not rec[0].strip()):
            continue
        if len(rec) != len(header):
            raise LogFormatError(f"line {lineno}: expected {len(header)} fields, got {len(rec)}")
        try:
            logits = tuple(float(v) for v in rec[:n])
        except ValueError:
            raise LogFormatError(f"line {lineno}: non-numeric logit") from None
        try:
            label = int(rec[n])
        except ValueError:
            raise LogFormatError(f"line {lineno}: non-integer label") from None
        if not 0 <= label < n:
            raise LogFormatError(f"line {lineno}: label out of range")
        condition = rec[n + 1].strip() if has_condition else "unspecified"
        rows.append(PredictionRow(logits=logits, label=label,
                                  condition=condition or "unspecified"))
    return PredictionLog(num_classes=n, rows=tuple(rows))


def load_prediction_log(path) -> PredictionLog:
    with open(path, "r", newline="") as fh:
        return parse_prediction_log(fh.read())


def format_prediction_log(log: PredictionLog, with_condition: Optional[bool] = None) -> str:
    if with_condition is None:
        with_condition = any(r.condition != "unspecified" for r in log.rows)
    cols = [f"logit_{i}" for i in range(log.num_classes)] + ["label"]
    if with_condition:
        cols.append("condition")
    lines = [",".join(cols)]
    for row in log.rows:
        # repr round-trips doubles exactly, so save/load is lossless
        vals = [repr(x) for x in row.logits] + [str(row.label)]
        if with_condition:
            vals.append(row.condition)
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


def save_prediction_log(log: PredictionLog, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(format_prediction_log(log))


@dataclass(frozen=True)
class ReliabilityBin:
    lower: float
    upper: float
    count: int
    mean_confidence: float
    accuracy: float


def reliability_bins(log: PredictionLog, n_bins: int = 5) -> list[ReliabilityBin]:
    """Partition (0, 1] into n_bins half-open intervals and bin rows by
    max-softmax confidence; a confidence on a boundary lands in the bin it
    closes (ceil rule), and 1.0 lands in the last bin."""
    if n_bins < 1:
        raise SchemaError("n_bins must be >= 1")
    if not log.rows:
        raise LogFormatError("empty log")
    counts = [0] * n_bins
    conf_sums = [0.0] * n_bins
    correct = [0] * n_bins
    for row in log.rows:
        conf = row.confidence
        idx = min(n_bins, max(1, math.ceil(conf * n_bins))) - 1
        counts[idx] += 1
        conf_sums[idx] += conf
        if row.correct:
            correct[idx] += 1
    bins = []
    for i in range(n_bins):
        bins.append(ReliabilityBin(
            lower=i / n_bins, upper=(i + 1) / n_bins, count=counts[i],
            mean_confidence=conf_sums[i] / counts[i] if counts[i] else 0.0,
            accuracy=correct[i] / counts[i] if counts[i] else 0.0))
    return bins


def ece(bins: Iterable[ReliabilityBin]) -> float:
    """Count-weighted mean |accuracy - confidence| over non-empty bins."""
    bins = list(bins)
    total = 0
    for b in bins:
        total += b.count
    if total == 0:
        raise LogFormatError("all bins empty")
    acc = 0.0
    for b in bins:
        if b.count:
            acc += (b.count / total) * abs(b.accuracy - b.mean_confidence)
    return acc


def mce(bins: Iterable[ReliabilityBin]) -> float:
    """Worst-case |accuracy - confidence| over non-empty bins."""
    worst = None
    for b in bins:
        if b.count:
            gap = abs(b.accuracy - b.mean_confidence)
            if worst is None or gap > worst:
                worst = gap
    if worst is None:
        raise LogFormatError("all bins empty")
    return worst


def nll(log: PredictionLog, temperature: float = 1.0) -> float:
    """Mean negative log-likelihood of the labels at the given temperature."""
    if temperature <= 0:
        raise SchemaError("temperature must be positive")
    if not log.rows:
        raise LogFormatError("empty log")
    total = 0.0
    for row in log.rows:
        scaled = [x / temperature for x in row.logits]
        m = scaled[argmax_index(scaled)]
        s = 0.0
        for x in scaled:
            s += math.exp(x - m)
        total += -((scaled[row.label] - m) - math.log(s))
    return total / len(log.rows)


@dataclass(frozen=True)
class TemperatureFit:
    temperature: float
    nll_before: float       # at T = 1
    nll_after: float
    boundary: bool          # search ran into an interval endpoint


def fit_temperature(log: PredictionLog,
                    bounds: tuple[float, float] = TEMPERATURE_RANGE,
                    tol: float = 1e-4) -> TemperatureFit:
    """Golden-section search for the NLL-minimizing temperature on a log
    scale over ``bounds``. Monotone (degenerate) objectives return the
    better endpoint with the boundary flag set. Never worse than T = 1."""
    lo, hi = bounds
    if not 0 < lo < hi:
        raise SchemaError("bad temperature bounds")

    def f(u: float) -> float:
        return nll(log, math.exp(u))

    a, b = math.log(lo), math.log(hi)
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    u = (a + b) / 2.0
    boundary = False
    t_star = math.exp(u)
    # snap near-endpoint solutions onto the endpoint and flag them
    if u - math.log(lo) <= 2 * tol:
        t_star, boundary = lo, True
    elif math.log(hi) - u <= 2 * tol:
        t_star, boundary = hi, True
    before = nll(log, 1.0)
    after = nll(log, t_star)
    if after > before:
        t_star, after, boundary = 1.0, before, False
    return TemperatureFit(temperature=t_star, nll_before=before,
                          nll_after=after, boundary=boundary)


def apply_temperature(log: PredictionLog, temperature: float) -> PredictionLog:
    """Divide every logit vector by the temperature; argmax is preserved."""
    if temperature <= 0:
        raise SchemaError("temperature must be positive")
    rows = tuple(replace(r, logits=tuple(x / temperature for x in r.logits))
                 for r in log.rows)
    return PredictionLog(num_classes=log.num_classes, rows=rows)


@dataclass(frozen=True)
class RejectionRow:
    threshold: float
    condition: str          # "overall" or a log condition tag
    total: int
    accepted: int
    coverage: float
    accuracy_accepted: Optional[float]   # None when nothing is accepted
    false_route_rate: Optional[float]


def _reject_at(rows: Sequence[PredictionRow], threshold: float,
               condition: str) -> RejectionRow:
    accepted = 0
    correct = 0
    for row in rows:
        if row.confidence >= threshold:
            accepted += 1
            if row.correct:
                correct += 1
    coverage = accepted / len(rows) if rows else 0.0
    acc = correct / accepted if accepted else None
    return RejectionRow(threshold=threshold, condition=condition,
                        total=len(rows), accepted=accepted, coverage=coverage,
                        accuracy_accepted=acc,
                        false_route_rate=None if acc is None else 1.0 - acc)


def rejection_sweep(log: PredictionLog,
                    thresholds: Sequence[float] = DEFAULT_THRESHOLDS) -> list[RejectionRow]:
    """Accept rows whose max-softmax confidence meets the threshold; report
    coverage and accepted-set accuracy per threshold, overall and per
    condition tag when tags are present."""
    if not log.rows:
        raise LogFormatError("empty log")
    ts = sorted(set(float(t) for t in thresholds))
    if not ts:
        raise SchemaError("empty threshold set")
    for t in ts:
        if not 0.0 <= t <= 1.0:
            raise SchemaError(f"threshold {t} outside [0, 1]")
    conditions = log.conditions()
    split = len(conditions) > 1 or conditions != ["unspecified"]
    out = []
    for t in ts:
        out.append(_reject_at(log.rows, t, "overall"))
        if split:
            for c in conditions:
                out.append(_reject_at(log.subset(c).rows, t, c))
    return out


def comparator_decision(probs: Sequence[float], threshold: float) -> tuple[bool, int]:
    """Hardware-style accept/route decision: accept iff the max probability
    meets the threshold; route to the argmax class (low index wins ties)."""
    cls = argmax_index(probs)
    return probs[cls] >= threshold, cls


def bins_csv(bins: Sequence[ReliabilityBin], ece_value: float, mce_value: float,
             temperature: Optional[float] = None) -> str:
    lines = ["bin,lo,hi,count,conf,acc"]
    for i, b in enumerate(bins, start=1):
        lines.append(f"{i},{b.lower:.6g},{b.upper:.6g},{b.count},"
                     f"{b.mean_confidence:.6g},{b.accuracy:.6g}")
    lines.append("ece,mce,temperature")
    t = f"{temperature:.6g}" if temperature is not None else ""
    lines.append(f"{ece_value:.6g},{mce_value:.6g},{t}")
    return "\n".join(lines) + "\n"


def rejection_csv(rows: Sequence[RejectionRow]) -> str:
    with_condition = any(r.condition != "overall" for r in rows)
    header = "threshold,coverage,acc_accepted,false_route"
    if with_condition:
        header += ",condition"
    lines = [header]
    for r in rows:
        acc = f"{r.accuracy_accepted:.6g}" if r.accuracy_accepted is not None else ""
        fr = f"{r.false_route_rate:.6g}" if r.false_route_rate is not None else ""
        line = f"{r.threshold:.6g},{r.coverage:.6g},{acc},{fr}"
        if with_condition:
            line += f",{r.condition}"
        lines.append(line)
    return "\n".join(lines) + "\n"
