"""Aggregate article-level labels or probabilities into monthly indices.

Construction, per outlet i and month t:

    X_it = mean of the per-article values (0/1 labels or probabilities)
    sigma_i = sd of X_it over the normalization window T0
    Y_it = X_it / sigma_i
    Z_t  = mean of Y_it over outlets active at t
    index_t = Z_t / mean(Z over T0) * 100

so the index has mean 100 over T0 by construction. Outlets with zero
variance or fewer than two T0 months are dropped loudly rather than
epsilon-patched. Months with no articles for an outlet contribute no
cell at all: absence of coverage is missing data, not zero uncertainty.

All reductions run over sorted keys with exact summation (math.fsum),
so results are independent of document order, thread count, and
scheduling.
"""

from __future__ import annotations

import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from statistics import stdev
from typing import Iterable, Mapping, Sequence

from .corpus import Corpus
from .errors import ValidationError
from .scores import ScoreSet

_MONTH_RE = re.compile(r"^\d{4}-\d{2}$")


def check_month(month: str) -> str:
    if not _MONTH_RE.match(month) or not 1 <= int(month[5:7]) <= 12:
        raise ValidationError(f"bad month {month!r}, expected YYYY-MM")
    return month


def month_range(start: str, end: str) -> list[str]:
    """All months from start to end inclusive."""
    check_month(start)
    check_month(end)
    if start > end:
        raise ValidationError(f"month range start {start} after end {end}")
    y, m = int(start[:4]), int(start[5:7])
    out = []
    while True:
        current = f"{y:04d}-{m:02d}"
        out.append(current)
        if current == end:
            return out
        m += 1
        if m > 12:
            y, m = y + 1, 1


@dataclass(frozen=True)
class CellShare:
    share: float
    count: int


@dataclass
class PanelShares:
    """(outlet, month) -> share of positive coverage and article count."""

    cells: dict[tuple[str, str], CellShare]

    def outlets(self) -> list[str]:
        return sorted({o for o, _ in self.cells})

    def months(self) -> list[str]:
        return sorted({m for _, m in self.cells})

    def outlet_months(self, outlet: str) -> dict[str, CellShare]:
        return {m: c for (o, m), c in self.cells.items() if o == outlet}


def article_shares(
    corpus: Corpus, values: Mapping[str, float], workers: int = 1
) -> PanelShares:
    """Per-(outlet, month) mean of article values.

    `values` must cover exactly the corpus ids, each in [0, 1]; binary
    labels and probabilities go through the same arithmetic, which is
    what makes the two aggregation modes coincide on 0/1 scores.
    """
    corpus_ids = set(corpus.by_id)
    missing = sorted(corpus_ids - set(values))
    if missing:
        raise ValidationError(f"values missing for document ids: {missing[:10]}")
    extra = sorted(set(values) - corpus_ids)
    if extra:
        raise ValidationError(f"values for unknown document ids: {extra[:10]}")
    bad = sorted(i for i in corpus_ids if not 0.0 <= values[i] <= 1.0)
    if bad:
        raise ValidationError(f"article values outside [0,1] for ids: {bad[:10]}")

    members: dict[tuple[str, str], list[str]] = {}
    for doc in corpus:
        members.setdefault((doc.outlet, doc.month), []).append(doc.id)

    def cell(key: tuple[str, str]) -> tuple[tuple[str, str], CellShare]:
        ids = sorted(members[key])
        total = math.fsum(values[i] for i in ids)
        return key, CellShare(share=total / len(ids), count=len(ids))

    keys = sorted(members)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            computed = list(pool.map(cell, keys))
    else:
        computed = [cell(k) for k in keys]
    return PanelShares(cells=dict(computed))


@dataclass
class StandardizeReport:
    sigma: dict[str, float]
    dropped: dict[str, str]  # outlet -> reason

    def to_json(self) -> dict:
        return {"sigma": dict(sorted(self.sigma.items())), "dropped": dict(sorted(self.dropped.items()))}


def standardize(
    panel: PanelShares, t0: Sequence[str], ddof: int = 1
) -> tuple[PanelShares, StandardizeReport]:
    """Divide each outlet's shares by its own sd over the window T0.

    ddof=1 (sample sd) is the default; ddof=0 is exposed because the
    population convention is equally defensible and callers should be
    able to reproduce either.
    """
    t0 = _check_t0(t0)
    if ddof not in (0, 1):
        raise ValidationError("ddof must be 0 or 1")
    sigma: dict[str, float] = {}
    dropped: dict[str, str] = {}
    for outlet in panel.outlets():
        cells = panel.outlet_months(outlet)
        window = [cells[m].share for m in t0 if m in cells]
        if len(window) < 2:
            dropped[outlet] = f"only {len(window)} months with articles inside T0"
            continue
        if ddof == 1:
            s = stdev(window)
        else:
            mu = math.fsum(window) / len(window)
            s = math.sqrt(math.fsum((x - mu) ** 2 for x in window) / len(window))
        if s == 0.0:
            dropped[outlet] = "zero variance over T0"
            continue
        sigma[outlet] = s

    if not sigma:
        raise ValidationError(
            f"every outlet was dropped during standardization: {dropped}"
        )
    cells = {
        (o, m): CellShare(share=c.share / sigma[o], count=c.count)
        for (o, m), c in panel.cells.items()
        if o in sigma
    }
    return PanelShares(cells=cells), StandardizeReport(sigma=sigma, dropped=dropped)


@dataclass
class IndexSeries:
    """Month -> index value, plus construction metadata."""

    values: dict[str, float]
    meta: dict = field(default_factory=dict)

    CSV_HEADER = ("month", "value")

    def months(self) -> list[str]:
        return sorted(self.values)

    def mean_over(self, months: Iterable[str]) -> float:
        window = [self.values[m] for m in months]
        if not window:
            raise ValidationError("empty averaging window")
        return math.fsum(window) / len(window)

    def csv_rows(self) -> list[tuple]:
        return [(m, repr(self.values[m])) for m in self.months()]

    def to_csv_text(self) -> str:
        from .ioutil import csv_text

        return csv_text(self.CSV_HEADER, self.csv_rows())

    @classmethod
    def from_csv(cls, path: str | Path, meta: dict | None = None) -> "IndexSeries":
        import csv as _csv

        values: dict[str, float] = {}
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = _csv.DictReader(fh)
            if reader.fieldnames is None or set(reader.fieldnames) != {"month", "value"}:
                raise ValidationError(
                    f"index CSV must have header month,value; got {reader.fieldnames}"
                )
            for line_no, rec in enumerate(reader, start=2):
                month = check_month(rec["month"])
                if month in values:
                    raise ValidationError(f"line {line_no}: duplicate month {month}")
                try:
                    values[month] = float(rec["value"])
                except (TypeError, ValueError) as exc:
                    raise ValidationError(f"line {line_no}: bad value {rec['value']!r}") from exc
        if not values:
            raise ValidationError(f"index file {path} is empty")
        return cls(values={m: values[m] for m in sorted(values)}, meta=dict(meta or {}))


def _check_t0(t0: Sequence[str]) -> list[str]:
    if not t0:
        raise ValidationError("normalization window T0 must not be empty")
    return sorted(check_month(m) for m in dict.fromkeys(t0))


def aggregate(panel: PanelShares, t0: Sequence[str], meta: dict | None = None) -> IndexSeries:
    """Average standardized shares across outlets and rescale to mean 100."""
    t0 = _check_t0(t0)
    months = panel.months()
    absent = [m for m in t0 if m not in months]
    if absent:
        raise ValidationError(f"T0 months with no data: {absent}")

    by_month: dict[str, list[float]] = {}
    for (outlet, month), cell in sorted(panel.cells.items()):
        by_month.setdefault(month, []).append(cell.share)
    z = {m: math.fsum(v) / len(v) for m, v in sorted(by_month.items())}
    zbar = math.fsum(z[m] for m in t0) / len(t0)
    if zbar <= 0:
        raise ValidationError("mean standardized share over T0 is not positive")
    values = {m: z[m] / zbar * 100.0 for m in sorted(z)}
    full_meta = dict(meta or {})
    full_meta.setdefault("t0", {"start": t0[0], "end": t0[-1], "n_months": len(t0)})
    return IndexSeries(values=values, meta=full_meta)


def build_index(
    corpus: Corpus,
    output: ScoreSet | Mapping[str, float],
    *,
    mode: str,
    t0: Sequence[str],
    tau: float | None = None,
    rule: str | None = None,
    granularity: str = "month",
    sd_ddof: int = 1,
    workers: int = 1,
    task: str | None = None,
    model_id: str | None = None,
    created_at: str | None = None,
) -> IndexSeries:
    """Full construction: shares -> standardize -> aggregate.

    mode "binary" thresholds a ScoreSet at tau (p >= tau) or accepts
    already-binary values; mode "probabilistic" averages raw
    probabilities. Metadata records every construction choice so a
    series is reproducible from its sidecar alone.
    """
    if granularity != "month":
        raise ValidationError("only monthly granularity is supported")
    if mode not in ("binary", "probabilistic"):
        raise ValidationError(f"mode must be binary or probabilistic, got {mode!r}")

    if isinstance(output, ScoreSet):
        task = task or output.task
        model_id = model_id or output.model_id
        entries: Mapping[str, float] = output.entries
    else:
        entries = output

    if mode == "binary":
        if tau is not None:
            values = {i: float(p >= tau) for i, p in entries.items()}
        else:
            bad = sorted(i for i, v in entries.items() if v not in (0.0, 1.0))
            if bad:
                raise ValidationError(
                    f"binary mode without tau requires 0/1 values; offending ids: {bad[:10]}"
                )
            values = {i: float(v) for i, v in entries.items()}
    else:
        values = {i: float(p) for i, p in entries.items()}

    panel = article_shares(corpus, values, workers=workers)
    y_panel, report = standardize(panel, t0, ddof=sd_ddof)
    t0_sorted = _check_t0(t0)
    meta = {
        "task": task,
        "model_id": model_id,
        "mode": mode,
        "rule": rule,
        "tau": tau,
        "granularity": granularity,
        "sd_ddof": sd_ddof,
        "t0": {"start": t0_sorted[0], "end": t0_sorted[-1], "n_months": len(t0_sorted)},
        "outlets": sorted(report.sigma),
        "dropped_outlets": report.dropped,
        "sigma": {o: report.sigma[o] for o in sorted(report.sigma)},
    }
    if created_at is not None:
        meta["created_at"] = created_at
    return aggregate(y_panel, t0, meta=meta)


def weighted_combine(
    series: Mapping[str, IndexSeries],
    weights: Mapping[str, float],
    t0: Sequence[str],
) -> IndexSeries:
    """Combine indices with weights renormalized over the series present
    each month, then rescale to mean 100 over T0.

    Months inside the combined span that no series covers are recorded
    as gaps in the metadata, never interpolated.
    """
    if not series:
        raise ValidationError("no series to combine")
    missing_w = sorted(set(series) - set(weights))
    if missing_w:
        raise ValidationError(f"no weight for series: {missing_w}")
    negative = sorted(k for k in series if weights[k] < 0)
    if negative:
        raise ValidationError(f"weights must be >= 0: {negative}")
    if all(weights[k] == 0 for k in series):
        raise ValidationError("at least one weight must be positive")

    t0 = _check_t0(t0)
    all_months = sorted({m for s in series.values() for m in s.values})
    combined: dict[str, float] = {}
    gaps: list[str] = []
    for month in month_range(all_months[0], all_months[-1]):
        present = sorted(k for k in series if month in series[k].values)
        wsum = math.fsum(weights[k] for k in present)
        if not present or wsum == 0:
            gaps.append(month)
            continue
        combined[month] = math.fsum(weights[k] * series[k].values[month] for k in present) / wsum

    window = [m for m in t0 if m in combined]
    if not window:
        raise ValidationError("no T0 month is covered by the combined series")
    mean = math.fsum(combined[m] for m in window) / len(window)
    if mean <= 0:
        raise ValidationError("combined mean over T0 is not positive")
    values = {m: v / mean * 100.0 for m, v in sorted(combined.items())}
    meta = {
        "weights": {k: float(weights[k]) for k in sorted(series)},
        "t0": {"start": t0[0], "end": t0[-1], "n_months": len(t0)},
        "t0_months_covered": len(window),
        "gaps": gaps,
        "components": {k: series[k].meta for k in sorted(series)},
    }
    return IndexSeries(values=values, meta=meta)


@dataclass(frozen=True)
class CorrelationResult:
    r: float | None  # None when a series is constant on the overlap
    overlap_start: str
    overlap_end: str
    n_months: int

    def to_json(self) -> dict:
        return {
            "r": self.r,
            "overlap_start": self.overlap_start,
            "overlap_end": self.overlap_end,
            "n_months": self.n_months,
        }


def correlate(a: IndexSeries, b: IndexSeries, min_overlap: int = 3) -> CorrelationResult:
    """Pearson correlation over the months both series cover."""
    overlap = sorted(set(a.values) & set(b.values))
    if len(overlap) < min_overlap:
        raise ValidationError(
            f"series overlap on {len(overlap)} months; need at least {min_overlap}"
        )
    xs = [a.values[m] for m in overlap]
    ys = [b.values[m] for m in overlap]
    n = len(overlap)
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    sxx = math.fsum((x - mx) ** 2 for x in xs)
    syy = math.fsum((y - my) ** 2 for y in ys)
    if sxx == 0.0 or syy == 0.0:
        r = None
    else:
        r = math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys)) / math.sqrt(sxx * syy)
    return CorrelationResult(
        r=r, overlap_start=overlap[0], overlap_end=overlap[-1], n_months=n
    )
