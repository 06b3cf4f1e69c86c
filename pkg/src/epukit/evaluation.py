"""Classification metrics, bootstrap uncertainty, and diagnostic tables.

Metric definitions (accuracy, precision, recall, F1) follow the usual
confusion-count formulas; a zero denominator yields None, an explicit
undefined marker, never 0, 1, or NaN. Silently coding undefined values
would bias bootstrap summaries.

Bootstrap resampling is at the document level, keyed by sorted ids with
per-resample generators derived from (seed, resample index), so results
are bit-reproducible and independent of document order or scheduling.

Every breakdown table carries its per-bin confusion counts; summing the
bins reproduces the global confusion exactly, which the tests assert.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .scores import ScoreSet


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            tp=self.tp + other.tp,
            fp=self.fp + other.fp,
            tn=self.tn + other.tn,
            fn=self.fn + other.fn,
        )

    def to_json(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


@dataclass(frozen=True)
class MetricReport:
    """Point metrics; None marks a 0/0 (undefined) value."""

    accuracy: float | None
    precision: float | None
    recall: float | None
    f1: float | None

    def to_json(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def confusion(pred: Mapping[str, int], gold: Mapping[str, int]) -> ConfusionCounts:
    """Exact confusion counts over identical id sets."""
    if set(pred) != set(gold):
        extra = sorted(set(pred) - set(gold))[:5]
        missing = sorted(set(gold) - set(pred))[:5]
        raise ValidationError(f"prediction/gold id mismatch (extra={extra}, missing={missing})")
    tp = fp = tn = fn = 0
    for doc_id, y in gold.items():
        yhat = pred[doc_id]
        if y not in (0, 1) or yhat not in (0, 1):
            raise ValidationError(f"labels must be 0/1 (id {doc_id!r}: pred={yhat}, gold={y})")
        if yhat == 1 and y == 1:
            tp += 1
        elif yhat == 1 and y == 0:
            fp += 1
        elif yhat == 0 and y == 0:
            tn += 1
        else:
            fn += 1
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def metrics_from_counts(counts: ConfusionCounts) -> MetricReport:
    if counts.total == 0:
        raise ValidationError("cannot compute metrics over zero documents")
    tp, fp, tn, fn = counts.tp, counts.fp, counts.tn, counts.fn
    accuracy = (tp + tn) / counts.total
    precision = tp / (tp + fp) if tp + fp > 0 else None
    recall = tp / (tp + fn) if tp + fn > 0 else None
    f1 = 2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn > 0 else None
    return MetricReport(accuracy=accuracy, precision=precision, recall=recall, f1=f1)


def metrics(pred: Mapping[str, int], gold: Mapping[str, int]) -> MetricReport:
    return metrics_from_counts(confusion(pred, gold))


_STATISTICS = ("accuracy", "precision", "recall", "f1")


def _statistic_value(counts: ConfusionCounts, statistic: str) -> float | None:
    return getattr(metrics_from_counts(counts), statistic)


@dataclass(frozen=True)
class BootstrapSummary:
    statistic: str
    point: float | None
    mean: float
    ci_low: float
    ci_high: float
    level: float
    b_requested: int
    b_undefined: int
    seed: int

    def to_json(self) -> dict:
        return {
            "statistic": self.statistic,
            "point": self.point,
            "mean": self.mean,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "level": self.level,
            "b": self.b_requested,
            "b_undefined": self.b_undefined,
            "seed": self.seed,
        }


def bootstrap(
    pred: Mapping[str, int],
    gold: Mapping[str, int],
    statistic: str = "f1",
    b: int = 1000,
    seed: int = 0,
    level: float = 0.95,
) -> BootstrapSummary:
    """Percentile bootstrap CI for one metric, resampling documents.

    Resamples the evaluation set with replacement B times. Resamples
    where the statistic is undefined are dropped and counted; if every
    resample is undefined that is an error.
    """
    if statistic not in _STATISTICS:
        raise ValidationError(f"statistic must be one of {_STATISTICS}")
    if b < 1:
        raise ValidationError("bootstrap needs B >= 1")
    if not 0.0 < level < 1.0:
        raise ValidationError("CI level must be in (0, 1)")
    base = confusion(pred, gold)  # also validates ids/labels
    point = _statistic_value(base, statistic)

    ids = sorted(gold)
    n = len(ids)
    gold_arr = np.array([gold[i] for i in ids], dtype=np.int8)
    pred_arr = np.array([pred[i] for i in ids], dtype=np.int8)

    values: list[float] = []
    undefined = 0
    for rep in range(b):
        rng = np.random.default_rng([seed, rep])
        pick = rng.integers(0, n, size=n)
        g = gold_arr[pick]
        yhat = pred_arr[pick]
        tp = int(np.sum((yhat == 1) & (g == 1)))
        fp = int(np.sum((yhat == 1) & (g == 0)))
        fn = int(np.sum((yhat == 0) & (g == 1)))
        tn = n - tp - fp - fn
        value = _statistic_value(ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn), statistic)
        if value is None:
            undefined += 1
        else:
            values.append(value)
    if not values:
        raise ValidationError(f"statistic {statistic!r} undefined in all {b} resamples")

    alpha = (1.0 - level) / 2.0
    lo, hi = np.percentile(values, [100 * alpha, 100 * (1 - alpha)])
    return BootstrapSummary(
        statistic=statistic,
        point=point,
        mean=float(np.mean(values)),
        ci_low=float(lo),
        ci_high=float(hi),
        level=level,
        b_requested=b,
        b_undefined=undefined,
        seed=seed,
    )


@dataclass(frozen=True)
class CertaintyErrorRow:
    certainty: int
    n: int
    counts: ConfusionCounts
    error_rate: float
    flagged_small: bool


def misclassification_by_certainty(
    pred: Mapping[str, int],
    gold: Mapping[str, int],
    certainty: Mapping[str, int],
    min_bin_size: int = 20,
) -> list[CertaintyErrorRow]:
    """Error rate (FP+FN)/n per auditor-certainty level."""
    scored = {i for i in gold if i in certainty}
    if not scored:
        raise ValidationError("no certainty annotations on the evaluated documents")
    rows = []
    levels = sorted({certainty[i] for i in scored})
    for level in levels:
        ids = sorted(i for i in scored if certainty[i] == level)
        counts = confusion({i: pred[i] for i in ids}, {i: gold[i] for i in ids})
        n = counts.total
        rows.append(
            CertaintyErrorRow(
                certainty=level,
                n=n,
                counts=counts,
                error_rate=(counts.fp + counts.fn) / n,
                flagged_small=n < min_bin_size,
            )
        )
    return rows


CERTAINTY_ERR_HEADER = ("certainty", "n", "tp", "fp", "tn", "fn", "error_rate", "flagged_small")


def certainty_error_csv_rows(rows: Sequence[CertaintyErrorRow]) -> list[tuple]:
    return [
        (r.certainty, r.n, r.counts.tp, r.counts.fp, r.counts.tn, r.counts.fn,
         repr(r.error_rate), int(r.flagged_small))
        for r in rows
    ]


@dataclass(frozen=True)
class ScoreHistogramRow:
    certainty: int
    bin_index: int
    lo: float
    hi: float
    n: int
    mass: float


def score_distribution_by_certainty(
    scores: ScoreSet | Mapping[str, float],
    certainty: Mapping[str, int],
    bins: int = 20,
) -> list[ScoreHistogramRow]:
    """Normalized histogram of probabilities per certainty level.

    Fixed equal-width bins over [0, 1]; scores of exactly 1.0 fall in the
    last bin. Mass sums to 1 within each level.
    """
    if bins < 1:
        raise ValidationError("need at least one histogram bin")
    entries = scores.entries if isinstance(scores, ScoreSet) else scores
    scored = sorted(i for i in entries if i in certainty)
    if not scored:
        raise ValidationError("no certainty annotations on the scored documents")
    edges = np.linspace(0.0, 1.0, bins + 1)
    rows = []
    for level in sorted({certainty[i] for i in scored}):
        values = np.array([entries[i] for i in scored if certainty[i] == level])
        hist, _ = np.histogram(values, bins=edges)
        total = int(hist.sum())
        for k in range(bins):
            rows.append(
                ScoreHistogramRow(
                    certainty=level,
                    bin_index=k,
                    lo=float(edges[k]),
                    hi=float(edges[k + 1]),
                    n=int(hist[k]),
                    mass=float(hist[k] / total),
                )
            )
    return rows


SCORE_HIST_HEADER = ("certainty", "bin", "lo", "hi", "n", "mass")


def score_hist_csv_rows(rows: Sequence[ScoreHistogramRow]) -> list[tuple]:
    return [
        (r.certainty, r.bin_index, repr(r.lo), repr(r.hi), r.n, repr(r.mass)) for r in rows
    ]


@dataclass(frozen=True)
class LengthBinRow:
    lo: int
    hi: int | None  # None = unbounded final bin
    n: int
    counts: ConfusionCounts
    f1: float | None


def f1_by_length(
    pred: Mapping[str, int],
    gold: Mapping[str, int],
    lengths: Mapping[str, int],
    edges: Sequence[int],
) -> list[LengthBinRow]:
    """F1 within token-length bins [e0,e1), [e1,e2), ..., [e_last, inf).

    Lengths are whitespace token counts of title+body (model-agnostic).
    Documents shorter than the first edge are excluded.
    """
    if not edges:
        raise ValidationError("at least one bin edge required")
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValidationError("bin edges must be strictly increasing")
    missing = sorted(set(gold) - set(lengths))
    if missing:
        raise ValidationError(f"length missing for ids: {missing[:10]}")

    bounds = [(edges[k], edges[k + 1]) for k in range(len(edges) - 1)] + [(edges[-1], None)]
    rows = []
    for lo, hi in bounds:
        ids = sorted(
            i for i in gold if lengths[i] >= lo and (hi is None or lengths[i] < hi)
        )
        if not ids:
            rows.append(LengthBinRow(lo=lo, hi=hi, n=0, counts=ConfusionCounts(0, 0, 0, 0), f1=None))
            continue
        counts = confusion({i: pred[i] for i in ids}, {i: gold[i] for i in ids})
        rep = metrics_from_counts(counts)
        rows.append(LengthBinRow(lo=lo, hi=hi, n=counts.total, counts=counts, f1=rep.f1))
    return rows


F1_LENGTH_HEADER = ("lo", "hi", "n", "tp", "fp", "tn", "fn", "f1")


def f1_length_csv_rows(rows: Sequence[LengthBinRow]) -> list[tuple]:
    return [
        (r.lo, "" if r.hi is None else r.hi, r.n, r.counts.tp, r.counts.fp, r.counts.tn,
         r.counts.fn, "" if r.f1 is None else repr(r.f1))
        for r in rows
    ]


def multilabel_metrics(
    pred: Mapping[str, Mapping[str, int]],
    gold: Mapping[str, Mapping[str, int]],
) -> dict[str, tuple[ConfusionCounts | None, MetricReport]]:
    """Per-category confusion and metrics, computed independently.

    Categories predicted but absent from gold get undefined markers.
    """
    out: dict[str, tuple[ConfusionCounts | None, MetricReport]] = {}
    for category in sorted(set(pred) | set(gold)):
        if category not in gold:
            out[category] = (None, MetricReport(None, None, None, None))
            continue
        if category not in pred:
            raise ValidationError(f"no predictions for category {category!r}")
        counts = confusion(pred[category], gold[category])
        out[category] = (counts, metrics_from_counts(counts))
    return out
