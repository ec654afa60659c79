"""Classification metrics and the paired t-test."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import LengthMismatch, TooFewSamples

METRIC_NAMES = ("accuracy", "precision", "recall", "f1")


@dataclass(frozen=True)
class FoldMetrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    confusion: tuple  # (tn, fp, fn, tp) with class 1 = fake as positive

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in METRIC_NAMES}


def compute_fold_metrics(predictions, labels) -> FoldMetrics:
    """Accuracy plus macro precision/recall/F1.

    The macro average runs over the classes that occur in either the labels
    or the predictions; a 0/0 component counts as 0.
    """
    pred = np.asarray(predictions, dtype=np.int64)
    true = np.asarray(labels, dtype=np.int64)
    if pred.shape != true.shape:
        raise LengthMismatch(f"{pred.size} predictions for {true.size} labels")
    if pred.size == 0:
        raise LengthMismatch("no predictions to score")
    tp = int(np.sum((pred == 1) & (true == 1)))
    tn = int(np.sum((pred == 0) & (true == 0)))
    fp = int(np.sum((pred == 1) & (true == 0)))
    fn = int(np.sum((pred == 0) & (true == 1)))
    present = sorted(set(pred.tolist()) | set(true.tolist()))
    precs, recs, f1s = [], [], []
    for c in present:
        hit = int(np.sum((pred == c) & (true == c)))
        npred = int(np.sum(pred == c))
        ntrue = int(np.sum(true == c))
        p = hit / npred if npred else 0.0
        r = hit / ntrue if ntrue else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        precs.append(p)
        recs.append(r)
        f1s.append(f)
    return FoldMetrics(
        accuracy=float(np.mean(pred == true)),
        precision=float(np.mean(precs)),
        recall=float(np.mean(recs)),
        f1=float(np.mean(f1s)),
        confusion=(tn, fp, fn, tp),
    )


@dataclass
class MetricsReport:
    """Per-fold metrics with mean and sample standard deviation."""

    folds: list = field(default_factory=list)

    def values(self, name: str) -> np.ndarray:
        return np.array([getattr(f, name) for f in self.folds])

    def mean(self, name: str) -> float:
        return float(np.mean(self.values(name)))

    def std(self, name: str) -> float:
        v = self.values(name)
        return float(np.std(v, ddof=1)) if v.size > 1 else 0.0

    @property
    def accuracy(self) -> float:
        return self.mean("accuracy")

    @property
    def confusion(self) -> tuple:
        return tuple(int(sum(f.confusion[i] for f in self.folds)) for i in range(4))

    def summary(self) -> dict:
        out = {}
        for name in METRIC_NAMES:
            out[name] = self.mean(name)
            out[f"{name}_std"] = self.std(name)
        return out

    def format_row(self, label: str) -> str:
        cells = [f"{self.mean(n):.3f} ± {self.std(n):.3f}" for n in METRIC_NAMES]
        return f"{label:<14}" + "  ".join(f"{c:>15}" for c in cells)

    def same_as(self, other: "MetricsReport") -> bool:
        return self.folds == other.folds


def compute_metrics(predictions, labels) -> MetricsReport:
    return MetricsReport([compute_fold_metrics(predictions, labels)])


# -- Student t ---------------------------------------------------------------

def _betacf(a: float, b: float, x: float, max_iter: int = 300, tol: float = 1e-15) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = tiny if abs(d) < tiny else d
    d = 1.0 / d
    h = d
    for k in range(1, max_iter + 1):
        k2 = 2 * k
        aa = k * (b - k) * x / ((qam + k2) * (a + k2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + k) * (qab + k) * x / ((a + k2) * (qap + k2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            break
    return h


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, 1.0 - x) / b


def student_t_sf2(t: float, df: float) -> float:
    """Two-sided tail probability P(|T| >= |t|)."""
    if math.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return regularized_incomplete_beta(df / 2.0, 0.5, x)


def paired_t_test(scores_a: Sequence[float], scores_b: Sequence[float]) -> tuple[float, float]:
    """Paired t statistic on ``a - b`` and its two-sided p-value.

    All-zero differences give ``(0, 1)``; a constant non-zero shift gives
    ``(+-inf, 0)``.
    """
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(f"paired samples differ in length: {a.size} vs {b.size}")
    n = a.size
    if n < 2:
        raise TooFewSamples("paired t-test needs at least 2 pairs")
    diff = a - b
    mean = diff.mean()
    sd = np.std(diff, ddof=1)
    if sd == 0.0:
        if mean == 0.0:
            return 0.0, 1.0
        return math.copysign(math.inf, mean), 0.0
    t = float(mean / (sd / math.sqrt(n)))
    return t, student_t_sf2(t, n - 1)
