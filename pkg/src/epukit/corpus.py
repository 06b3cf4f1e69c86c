"""News corpus ingestion, validation, deduplication, and partitioning.

The on-disk corpus format is JSON lines, one article per line:

    required: id (str), outlet (str), date (ISO "YYYY-MM-DD"), body (str)
    optional: title (str), lang (str, default "en"), gold_epu (0/1),
              certainty (int >= 1), categories (list of str)

Unknown fields are ignored but counted in the ingest report. Malformed
records are rejected with the offending line number, never dropped
silently.

All split routines order documents by id before any seeded draw, so the
resulting partitions do not depend on file order or on how many workers
parsed the input.
"""

from __future__ import annotations

import datetime as dt
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import ValidationError

PARTS = ("train", "validation", "test")

_REQUIRED_FIELDS = ("id", "outlet", "date", "body")
_KNOWN_FIELDS = frozenset(
    ["id", "outlet", "date", "body", "title", "lang", "gold_epu", "certainty", "categories"]
)


@dataclass(frozen=True)
class Document:
    """One article. Dates carry day precision; indices bucket by month."""

    id: str
    outlet: str
    date: dt.date
    body: str
    title: str = ""
    language: str = "en"
    gold_epu: int | None = None
    certainty: int | None = None
    categories: frozenset[str] | None = None

    @property
    def month(self) -> str:
        return f"{self.date.year:04d}-{self.date.month:02d}"

    @property
    def text(self) -> str:
        """Title-first concatenation used for matching and scoring."""
        return f"{self.title} {self.body}" if self.title else self.body

    def token_length(self) -> int:
        """Whitespace token count of title+body."""
        return len(self.text.split())

    def to_record(self) -> dict:
        rec: dict = {
            "id": self.id,
            "outlet": self.outlet,
            "date": self.date.isoformat(),
            "body": self.body,
        }
        if self.title:
            rec["title"] = self.title
        if self.language != "en":
            rec["lang"] = self.language
        if self.gold_epu is not None:
            rec["gold_epu"] = self.gold_epu
        if self.certainty is not None:
            rec["certainty"] = self.certainty
        if self.categories is not None:
            rec["categories"] = sorted(self.categories)
        return rec


class Corpus:
    """An ordered collection of documents with unique ids."""

    def __init__(self, documents: Iterable[Document]):
        self.documents: list[Document] = list(documents)
        self.by_id: dict[str, Document] = {}
        for doc in self.documents:
            if doc.id in self.by_id:
                raise ValidationError(f"duplicate document id in corpus: {doc.id!r}")
            self.by_id[doc.id] = doc

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self.by_id

    def sorted_ids(self) -> list[str]:
        return sorted(self.by_id)

    def date_range(self) -> tuple[dt.date, dt.date]:
        if not self.documents:
            raise ValidationError("empty corpus has no date range")
        dates = [d.date for d in self.documents]
        return min(dates), max(dates)

    def subset(self, ids: Iterable[str]) -> "Corpus":
        wanted = set(ids)
        missing = wanted - set(self.by_id)
        if missing:
            raise ValidationError(f"unknown document ids: {sorted(missing)[:10]}")
        return Corpus(d for d in self.documents if d.id in wanted)

    def to_jsonl(self) -> str:
        lines = [json.dumps(d.to_record(), ensure_ascii=False, sort_keys=True) for d in self.documents]
        return "\n".join(lines) + ("\n" if lines else "")


@dataclass(frozen=True)
class RejectedRecord:
    line_no: int
    reason: str
    doc_id: str | None = None


@dataclass
class IngestReport:
    n_read: int = 0
    n_accepted: int = 0
    rejects: list[RejectedRecord] = field(default_factory=list)
    unknown_fields: Counter = field(default_factory=Counter)

    def to_json(self) -> dict:
        return {
            "n_read": self.n_read,
            "n_accepted": self.n_accepted,
            "n_rejected": len(self.rejects),
            "rejects": [
                {"line": r.line_no, "reason": r.reason, "id": r.doc_id} for r in self.rejects
            ],
            "unknown_fields": dict(sorted(self.unknown_fields.items())),
        }


def _parse_record(
    rec: dict,
    line_no: int,
    date_min: dt.date | None,
    date_max: dt.date | None,
    unknown: Counter,
) -> Document:
    if not isinstance(rec, dict):
        raise ValueError("record is not a JSON object")
    for key in rec:
        if key not in _KNOWN_FIELDS:
            unknown[key] += 1
    for key in _REQUIRED_FIELDS:
        if key not in rec:
            raise ValueError(f"missing {key}")
    if not isinstance(rec["id"], str) or not rec["id"]:
        raise ValueError("id must be a non-empty string")
    if not isinstance(rec["outlet"], str) or not rec["outlet"]:
        raise ValueError("outlet must be a non-empty string")
    if not isinstance(rec["body"], str):
        raise ValueError("body must be a string")
    try:
        date = dt.date.fromisoformat(rec["date"])
    except (TypeError, ValueError) as exc:
        raise ValueError(f"unparseable date: {rec['date']!r}") from exc
    if date_min is not None and date < date_min:
        raise ValueError(f"date {date.isoformat()} before corpus range start")
    if date_max is not None and date > date_max:
        raise ValueError(f"date {date.isoformat()} after corpus range end")

    title = rec.get("title", "")
    if not isinstance(title, str):
        raise ValueError("title must be a string")
    lang = rec.get("lang", "en")
    if not isinstance(lang, str) or not lang:
        raise ValueError("lang must be a non-empty string")

    gold = rec.get("gold_epu")
    if gold is not None and (isinstance(gold, bool) or gold not in (0, 1)):
        raise ValueError("gold_epu must be 0 or 1")
    certainty = rec.get("certainty")
    if certainty is not None and (
        isinstance(certainty, bool) or not isinstance(certainty, int) or certainty < 1
    ):
        raise ValueError("certainty must be an integer >= 1")
    categories = rec.get("categories")
    cats: frozenset[str] | None = None
    if categories is not None:
        if not isinstance(categories, list) or not all(isinstance(c, str) for c in categories):
            raise ValueError("categories must be a list of strings")
        cats = frozenset(categories)

    return Document(
        id=rec["id"],
        outlet=rec["outlet"],
        date=date,
        body=rec["body"],
        title=title,
        language=lang,
        gold_epu=gold,
        certainty=certainty,
        categories=cats,
    )


def ingest(
    source: str | Path | Iterable[str],
    *,
    date_min: dt.date | None = None,
    date_max: dt.date | None = None,
) -> tuple[Corpus, IngestReport]:
    """Read a JSON-lines corpus, validating every record.

    `source` is a file path or an iterable of lines. Invalid records and
    duplicate ids are rejected and reported with line numbers; an
    unreadable path raises OSError.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            return ingest(fh, date_min=date_min, date_max=date_max)

    report = IngestReport()
    docs: list[Document] = []
    seen: set[str] = set()
    for line_no, line in enumerate(source, start=1):
        if not line.strip():
            continue
        report.n_read += 1
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            report.rejects.append(RejectedRecord(line_no, f"invalid JSON: {exc.msg}"))
            continue
        try:
            doc = _parse_record(rec, line_no, date_min, date_max, report.unknown_fields)
        except ValueError as exc:
            doc_id = rec.get("id") if isinstance(rec, dict) else None
            report.rejects.append(
                RejectedRecord(line_no, str(exc), doc_id if isinstance(doc_id, str) else None)
            )
            continue
        if doc.id in seen:
            report.rejects.append(RejectedRecord(line_no, "duplicate id", doc.id))
            continue
        seen.add(doc.id)
        docs.append(doc)
    report.n_accepted = len(docs)
    return Corpus(docs), report


def normalize_body(body: str) -> str:
    """Lowercase and collapse all whitespace runs; the dedup key."""
    return " ".join(body.lower().split())


@dataclass
class DedupReport:
    n_in: int
    n_out: int
    duplicate_ids: list[str]
    empty_body_ids: list[str]

    def to_json(self) -> dict:
        return {
            "n_in": self.n_in,
            "n_out": self.n_out,
            "n_duplicates_removed": len(self.duplicate_ids),
            "n_empty_removed": len(self.empty_body_ids),
            "duplicate_ids": self.duplicate_ids,
            "empty_body_ids": self.empty_body_ids,
        }


def deduplicate(corpus: Corpus) -> tuple[Corpus, DedupReport]:
    """Drop empty-body documents and collapse exact normalized-body clones.

    Among clones the earliest date survives (ties broken by smallest id),
    so the operation is idempotent and order-independent.
    """
    empty_ids = [d.id for d in corpus if not normalize_body(d.body)]
    groups: dict[str, list[Document]] = {}
    for doc in corpus:
        key = normalize_body(doc.body)
        if key:
            groups.setdefault(key, []).append(doc)

    keep: set[str] = set()
    dup_ids: list[str] = []
    for docs in groups.values():
        winner = min(docs, key=lambda d: (d.date, d.id))
        keep.add(winner.id)
        dup_ids.extend(d.id for d in docs if d.id != winner.id)

    out = Corpus(d for d in corpus if d.id in keep)
    report = DedupReport(
        n_in=len(corpus), n_out=len(out), duplicate_ids=sorted(dup_ids), empty_body_ids=sorted(empty_ids)
    )
    return out, report


@dataclass
class SplitAssignment:
    """Maps document id -> partition name, plus how the split was drawn."""

    assignment: dict[str, str]
    provenance: dict
    warnings: list[str] = field(default_factory=list)

    def ids(self, part: str) -> list[str]:
        if part not in PARTS:
            raise ValidationError(f"unknown partition {part!r}, expected one of {PARTS}")
        return sorted(i for i, p in self.assignment.items() if p == part)

    def counts(self) -> dict[str, int]:
        c = Counter(self.assignment.values())
        return {p: c.get(p, 0) for p in PARTS}

    def to_json(self) -> dict:
        return {
            "assignment": dict(sorted(self.assignment.items())),
            "provenance": self.provenance,
            "counts": self.counts(),
            "warnings": self.warnings,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SplitAssignment":
        return cls(
            assignment=dict(obj["assignment"]),
            provenance=dict(obj.get("provenance", {})),
            warnings=list(obj.get("warnings", [])),
        )


def allocate_counts(n: int, fractions: Sequence[float]) -> list[int]:
    """Partition n items into integer counts matching the fractions.

    Uses cumulative rounding: the k-th boundary is floor(n * sum of the
    first k fractions), computed exactly with rationals. Every count is
    within one document of its target and a 10,393-document corpus at
    (0.7, 0.2, 0.1) lands on the published {7275, 2078, 1040}.
    """
    if not fractions:
        raise ValidationError("at least one fraction required")
    fr = [Fraction(f).limit_denominator(10**9) for f in fractions]
    if any(f <= 0 for f in fr):
        raise ValidationError("fractions must be positive")
    total = sum(fr)
    if abs(float(total) - 1.0) > 1e-9:
        raise ValidationError(f"fractions must sum to 1, got {float(total)}")
    fr = [f / total for f in fr]

    counts: list[int] = []
    cum = Fraction(0)
    prev_edge = 0
    for f in fr:
        cum += f
        edge = math.floor(cum * n)
        counts.append(edge - prev_edge)
        prev_edge = edge
    return counts


def _shuffled_ids(corpus: Corpus, seed: int) -> list[str]:
    ids = corpus.sorted_ids()
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(ids))
    return [ids[i] for i in perm]


def split_random(
    corpus: Corpus, fractions: Sequence[float] = (0.7, 0.2, 0.1), seed: int = 0
) -> SplitAssignment:
    """Seeded random train/validation/test split with exact integer sizes."""
    if len(fractions) != len(PARTS):
        raise ValidationError(f"expected {len(PARTS)} fractions, got {len(fractions)}")
    shuffled = _shuffled_ids(corpus, seed)
    counts = allocate_counts(len(shuffled), fractions)
    assignment: dict[str, str] = {}
    pos = 0
    for part, count in zip(PARTS, counts):
        for doc_id in shuffled[pos : pos + count]:
            assignment[doc_id] = part
        pos += count
    return SplitAssignment(
        assignment=assignment,
        provenance={"method": "random", "seed": seed, "fractions": [float(f) for f in fractions]},
    )


def split_temporal(
    corpus: Corpus, cutoff: dt.date, val_fraction: float, seed: int = 0
) -> SplitAssignment:
    """Send documents dated after `cutoff` to test; split the rest randomly.

    A cutoff at or beyond the latest document would leave the test
    partition empty and is rejected. A cutoff before every document is
    the documented boundary case: everything becomes test data.
    """
    if not 0 <= val_fraction < 1:
        raise ValidationError("val_fraction must be in [0, 1)")
    _, max_date = corpus.date_range()
    if cutoff >= max_date:
        raise ValidationError(
            f"cutoff {cutoff.isoformat()} leaves no test documents (latest is {max_date.isoformat()})"
        )
    assignment: dict[str, str] = {}
    pre_ids = []
    for doc in corpus:
        if doc.date > cutoff:
            assignment[doc.id] = "test"
        else:
            pre_ids.append(doc.id)
    if pre_ids and val_fraction > 0:
        pre_sorted = sorted(pre_ids)
        rng = np.random.default_rng(seed)
        perm = rng.permutation(len(pre_sorted))
        shuffled = [pre_sorted[i] for i in perm]
        n_train, n_val = allocate_counts(len(shuffled), (1.0 - val_fraction, val_fraction))
        for doc_id in shuffled[:n_train]:
            assignment[doc_id] = "train"
        for doc_id in shuffled[n_train:]:
            assignment[doc_id] = "validation"
    else:
        for doc_id in pre_ids:
            assignment[doc_id] = "train"
    return SplitAssignment(
        assignment=assignment,
        provenance={
            "method": "temporal",
            "cutoff": cutoff.isoformat(),
            "val_fraction": val_fraction,
            "seed": seed,
        },
    )


def split_stratified_multilabel(
    corpus: Corpus, fractions: Sequence[float] = (0.7, 0.2, 0.1), seed: int = 0
) -> SplitAssignment:
    """Greedy iterative split balancing per-category positive rates.

    Documents are visited in seeded order, most-labeled first; each goes
    to the partition with the largest remaining deficit for any of its
    categories, subject to the partition size quotas. Ties fall to the
    partition with the most remaining capacity, then the lowest index.
    """
    if len(fractions) != len(PARTS):
        raise ValidationError(f"expected {len(PARTS)} fractions, got {len(fractions)}")
    shuffled = _shuffled_ids(corpus, seed)
    quotas = allocate_counts(len(shuffled), fractions)

    label_sets = {doc_id: (corpus.by_id[doc_id].categories or frozenset()) for doc_id in shuffled}
    positives: Counter = Counter()
    for labels in label_sets.values():
        positives.update(labels)

    warnings = [
        f"category {cat!r} has only {n} positive documents; balance not guaranteed"
        for cat, n in sorted(positives.items())
        if n < 3
    ]

    # desired positive count per (category, partition), proportional to quota
    desired = {
        cat: [n * f for f in (float(x) for x in fractions)] for cat, n in positives.items()
    }
    assigned_pos: dict[str, list[int]] = {cat: [0, 0, 0] for cat in positives}
    capacity = list(quotas)

    # most-labeled documents first; seeded order breaks ties
    order = sorted(shuffled, key=lambda i: -len(label_sets[i]))

    assignment: dict[str, str] = {}
    for doc_id in order:
        labels = label_sets[doc_id]
        best: tuple[float, int, int] | None = None
        best_part = -1
        for p in range(len(PARTS)):
            if capacity[p] <= 0:
                continue
            if labels:
                deficit = max(desired[cat][p] - assigned_pos[cat][p] for cat in labels)
            else:
                deficit = float("-inf")
            key = (deficit, capacity[p], -p)
            if best is None or key > best:
                best = key
                best_part = p
        assignment[doc_id] = PARTS[best_part]
        capacity[best_part] -= 1
        for cat in labels:
            assigned_pos[cat][best_part] += 1

    return SplitAssignment(
        assignment=assignment,
        provenance={
            "method": "stratified",
            "seed": seed,
            "fractions": [float(f) for f in fractions],
        },
        warnings=warnings,
    )
