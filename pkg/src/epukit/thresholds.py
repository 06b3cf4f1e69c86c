"""Decision-threshold optimization on scored, gold-labeled documents.

Candidate thresholds are the distinct score values plus one sentinel
above the maximum; under the p >= tau labeling convention every possible
confusion table is realized at some candidate, so scanning candidates is
an exact optimization, not a grid approximation.

Rules:
  youden             maximize TPR - FPR
  f1max              maximize F1
  target(metric, t)  bring precision or recall as close as possible to t
  fixed(tau)         no optimization, just evaluate at tau

Equally optimal candidates resolve to the lowest tau attaining the
optimum (most positives among optima). Target rules break ties by the
better complementary metric, then the lower tau.

Thresholds are fit on one split and applied to another; every entry
point takes an explicit split tag that is recorded in the report, so a
threshold's provenance is always visible downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from .errors import ValidationError
from .evaluation import ConfusionCounts, metrics_from_counts
from .scores import ScoreSet

_TARGET_METRICS = ("precision", "recall")


@dataclass(frozen=True)
class ThresholdRule:
    kind: str  # "youden" | "f1max" | "target" | "fixed"
    metric: str | None = None
    target: float | None = None
    tau: float | None = None

    @classmethod
    def youden(cls) -> "ThresholdRule":
        return cls(kind="youden")

    @classmethod
    def f1max(cls) -> "ThresholdRule":
        return cls(kind="f1max")

    @classmethod
    def target_metric(cls, metric: str, target: float = 0.85) -> "ThresholdRule":
        if metric not in _TARGET_METRICS:
            raise ValidationError(f"target metric must be one of {_TARGET_METRICS}")
        if not 0.0 < target <= 1.0:
            raise ValidationError("target must be in (0, 1]")
        return cls(kind="target", metric=metric, target=target)

    @classmethod
    def fixed(cls, tau: float) -> "ThresholdRule":
        if not 0.0 <= tau <= 1.0:
            raise ValidationError("fixed threshold must be in [0, 1]")
        return cls(kind="fixed", tau=tau)

    @classmethod
    def parse(cls, text: str) -> "ThresholdRule":
        """Parse CLI forms: youden, f1max, recall@0.85, precision@0.9, fixed@0.5."""
        text = text.strip().lower()
        if text == "youden":
            return cls.youden()
        if text == "f1max":
            return cls.f1max()
        if "@" in text:
            head, _, value = text.partition("@")
            try:
                x = float(value)
            except ValueError as exc:
                raise ValidationError(f"cannot parse rule {text!r}") from exc
            if head == "fixed":
                return cls.fixed(x)
            if head in _TARGET_METRICS:
                return cls.target_metric(head, x)
        raise ValidationError(
            f"unknown threshold rule {text!r}; expected youden, f1max, "
            f"precision@T, recall@T, or fixed@TAU"
        )

    def describe(self) -> str:
        if self.kind == "youden":
            return "youden"
        if self.kind == "f1max":
            return "f1max"
        if self.kind == "target":
            return f"{self.metric}@{self.target}"
        return f"fixed@{self.tau}"


@dataclass(frozen=True)
class RocPoint:
    tau: float
    tp: int
    fp: int
    tpr: float
    fpr: float


@dataclass(frozen=True)
class RocCurve:
    points: tuple[RocPoint, ...]  # ascending tau
    p: int
    n: int

    def csv_rows(self) -> list[tuple]:
        return [(repr(pt.tau), pt.tp, pt.fp, repr(pt.tpr), repr(pt.fpr)) for pt in self.points]

    CSV_HEADER = ("tau", "tp", "fp", "tpr", "fpr")


def _aligned(scores, gold) -> tuple[list[str], dict[str, float], dict[str, int]]:
    entries = scores.entries if isinstance(scores, ScoreSet) else scores
    if set(entries) != set(gold):
        extra = sorted(set(entries) - set(gold))[:5]
        missing = sorted(set(gold) - set(entries))[:5]
        raise ValidationError(f"score/gold id mismatch (extra={extra}, missing={missing})")
    bad = [i for i, y in gold.items() if y not in (0, 1)]
    if bad:
        raise ValidationError(f"gold labels must be 0/1; offending ids: {sorted(bad)[:5]}")
    return sorted(entries), dict(entries), {i: int(y) for i, y in gold.items()}


def roc(scores: ScoreSet | Mapping[str, float], gold: Mapping[str, int]) -> RocCurve:
    """Exact ROC over candidate thresholds, no interpolation."""
    ids, entries, gold_i = _aligned(scores, gold)
    p = sum(gold_i.values())
    n = len(ids) - p
    if p == 0 or n == 0:
        raise ValidationError("ROC needs at least one positive and one negative gold label")

    by_score: dict[float, list[int]] = {}
    for i in ids:
        by_score.setdefault(entries[i], []).append(gold_i[i])
    candidates = sorted(by_score)
    # per-candidate class counts; tau=c predicts positive for every score >= c
    pos_at = [sum(by_score[c]) for c in candidates]
    neg_at = [len(by_score[c]) - pos_at[k] for k, c in enumerate(candidates)]
    points: list[RocPoint] = []
    tp = p
    fp = n
    for k, c in enumerate(candidates):
        points.append(RocPoint(tau=c, tp=tp, fp=fp, tpr=tp / p, fpr=fp / n))
        tp -= pos_at[k]
        fp -= neg_at[k]
    sentinel = math.nextafter(candidates[-1], math.inf)
    points.append(RocPoint(tau=sentinel, tp=0, fp=0, tpr=0.0, fpr=0.0))
    return RocCurve(points=tuple(points), p=p, n=n)


@dataclass(frozen=True)
class ThresholdResult:
    tau: float
    rule: str
    split: str
    counts: ConfusionCounts
    metrics: dict
    objective: float | None = None

    def to_report(self, task: str, model_id: str, group: str | None = None) -> dict:
        report = {
            "task": task,
            "model_id": model_id,
            "rule": self.rule,
            "split": self.split,
            "tau": self.tau,
            "metrics": self.metrics,
        }
        if group is not None:
            report["group"] = group
        return report


def _metrics_at(point: RocPoint, p: int, n: int) -> tuple[ConfusionCounts, dict]:
    counts = ConfusionCounts(tp=point.tp, fp=point.fp, tn=n - point.fp, fn=p - point.tp)
    rep = metrics_from_counts(counts)
    out = {
        "accuracy": rep.accuracy,
        "precision": rep.precision,
        "recall": rep.recall,
        "f1": rep.f1,
        "tpr": point.tpr,
        "fpr": point.fpr,
    }
    return counts, out


def optimize(
    scores: ScoreSet | Mapping[str, float],
    gold: Mapping[str, int],
    rule: ThresholdRule,
    *,
    split: str,
) -> ThresholdResult:
    """Pick the threshold the rule asks for and report metrics at it.

    `split` tags where the gold labels came from (e.g. "validation") and
    is carried into the report; fitting on anything but validation data
    is leakage, and the tag makes that auditable.
    """
    if rule.kind == "fixed":
        ids, entries, gold_i = _aligned(scores, gold)
        p = sum(gold_i.values())
        n = len(ids) - p
        if p == 0 or n == 0:
            raise ValidationError("need at least one positive and one negative gold label")
        tp = sum(1 for i in ids if entries[i] >= rule.tau and gold_i[i] == 1)
        fp = sum(1 for i in ids if entries[i] >= rule.tau and gold_i[i] == 0)
        point = RocPoint(tau=rule.tau, tp=tp, fp=fp, tpr=tp / p, fpr=fp / n)
        counts, mets = _metrics_at(point, p, n)
        return ThresholdResult(
            tau=rule.tau, rule=rule.describe(), split=split, counts=counts, metrics=mets
        )

    curve = roc(scores, gold)
    if rule.kind in ("youden", "f1max"):
        best_point: RocPoint | None = None
        best_value = -math.inf
        for point in curve.points:
            if rule.kind == "youden":
                value = point.tpr - point.fpr
            else:
                denom = 2 * point.tp + point.fp + (curve.p - point.tp)
                if denom == 0:
                    continue
                value = 2 * point.tp / denom
            if value > best_value:  # ties keep the earlier, lower tau
                best_value = value
                best_point = point
        assert best_point is not None  # lowest candidate always defines both objectives
        counts, mets = _metrics_at(best_point, curve.p, curve.n)
        return ThresholdResult(
            tau=best_point.tau,
            rule=rule.describe(),
            split=split,
            counts=counts,
            metrics=mets,
            objective=best_value,
        )

    # target rule: closest metric, then better complementary metric, then lower tau
    complement = "recall" if rule.metric == "precision" else "precision"
    best: tuple[float, float] | None = None  # (distance, -complement value)
    best_point = None
    for point in curve.points:
        _, mets = _metrics_at(point, curve.p, curve.n)
        value = mets[rule.metric]
        if value is None:
            continue
        comp = mets[complement]
        key = (abs(value - rule.target), -(comp if comp is not None else -1.0))
        if best is None or key < best:
            best = key
            best_point = point
    if best_point is None:
        raise ValidationError(f"no candidate threshold defines metric {rule.metric!r}")
    counts, mets = _metrics_at(best_point, curve.p, curve.n)
    return ThresholdResult(
        tau=best_point.tau,
        rule=rule.describe(),
        split=split,
        counts=counts,
        metrics=mets,
        objective=best[0],
    )


@dataclass
class PerGroupThresholds:
    results: dict[str, ThresholdResult]
    failed: dict[str, str]
    small_groups: list[str]

    def to_json(self, task: str, model_id: str) -> dict:
        return {
            "task": task,
            "model_id": model_id,
            "groups": {
                g: r.to_report(task, model_id, group=g) for g, r in sorted(self.results.items())
            },
            "failed": dict(sorted(self.failed.items())),
            "small_groups": sorted(self.small_groups),
        }


def optimize_per_group(
    scores: ScoreSet | Mapping[str, float],
    gold: Mapping[str, int],
    groups: Mapping[str, str],
    rule: ThresholdRule,
    *,
    split: str,
    min_group_size: int = 20,
) -> PerGroupThresholds:
    """Re-optimize the threshold separately within each group.

    Groups must partition the scored ids (a language column, say).
    Single-class groups are reported as failed without stopping the
    rest; groups under `min_group_size` are flagged as unreliable.
    """
    entries = scores.entries if isinstance(scores, ScoreSet) else scores
    missing = sorted(set(entries) - set(groups))
    if missing:
        raise ValidationError(f"group key missing for ids: {missing[:10]}")

    members: dict[str, list[str]] = {}
    for doc_id in entries:
        members.setdefault(groups[doc_id], []).append(doc_id)

    results: dict[str, ThresholdResult] = {}
    failed: dict[str, str] = {}
    small: list[str] = []
    for group, ids in sorted(members.items()):
        if len(ids) < min_group_size:
            small.append(group)
        sub_scores = {i: entries[i] for i in ids}
        sub_gold = {i: gold[i] for i in ids}
        try:
            results[group] = optimize(sub_scores, sub_gold, rule, split=split)
        except ValidationError as exc:
            failed[group] = str(exc)
    return PerGroupThresholds(results=results, failed=failed, small_groups=small)
