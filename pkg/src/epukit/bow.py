"""Keyword (bag-of-words) classification of articles.

An article is positive when every term group of a dictionary has at
least one term occurring in the title+body text. Matching runs over a
single-pass Aho-Corasick automaton compiled from all terms of all
groups, so corpus scans stay linear in text length regardless of
dictionary size.

Normalization, controlled per dictionary:
  case_fold    lowercase text and terms (casefold, so Unicode-safe)
  strip_punct  replace every non-alphanumeric, non-whitespace codepoint
               with a space before matching
  partial_match substring semantics; otherwise matches must align with
               word boundaries (alphanumeric to non-alphanumeric
               transitions)

Whitespace runs always collapse to a single space, which is what lets a
multi-word term like "white house" match across line breaks or odd
spacing. Matchers are immutable after compilation and safe to share
across threads.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import yaml

from .corpus import Corpus, Document
from .errors import ValidationError


@dataclass(frozen=True)
class MatchOptions:
    case_fold: bool = True
    partial_match: bool = False
    strip_punct: bool = True

    def to_json(self) -> dict:
        return {
            "case_fold": self.case_fold,
            "partial_match": self.partial_match,
            "strip_punct": self.strip_punct,
        }


def normalize_text(text: str, options: MatchOptions) -> str:
    if options.case_fold:
        text = text.casefold()
    if options.strip_punct:
        text = "".join(c if c.isalnum() or c.isspace() else " " for c in text)
    return " ".join(text.split())


@dataclass(frozen=True)
class Dictionary:
    """Named term groups plus matching options.

    Terms are canonicalized (normalized under the dictionary's own
    options) at construction, so equality of dictionaries means equality
    of matching behavior.
    """

    name: str
    groups: tuple[tuple[str, tuple[str, ...]], ...]
    options: MatchOptions = MatchOptions()

    def __post_init__(self):
        if not self.groups:
            raise ValidationError(f"dictionary {self.name!r} has no term groups")
        seen_groups: set[str] = set()
        canonical: list[tuple[str, tuple[str, ...]]] = []
        for group_name, terms in self.groups:
            if group_name in seen_groups:
                raise ValidationError(f"duplicate group name {group_name!r}")
            seen_groups.add(group_name)
            if not terms:
                raise ValidationError(f"group {group_name!r} has no terms")
            canon_terms = []
            for term in terms:
                canon = normalize_text(term, self.options)
                if not canon:
                    raise ValidationError(
                        f"term {term!r} in group {group_name!r} is empty after normalization"
                    )
                canon_terms.append(canon)
            canonical.append((group_name, tuple(dict.fromkeys(canon_terms))))
        object.__setattr__(self, "groups", tuple(canonical))

    @property
    def group_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.groups)

    def terms(self, group_name: str) -> tuple[str, ...]:
        for name, terms in self.groups:
            if name == group_name:
                return terms
        raise ValidationError(f"no group named {group_name!r} in dictionary {self.name!r}")

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "options": self.options.to_json(),
            "groups": {name: list(terms) for name, terms in self.groups},
        }


def load_dictionary(path: str | Path) -> Dictionary:
    """Load a dictionary from its YAML file format (see README)."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    return dictionary_from_config(raw, default_name=Path(path).stem)


def dictionary_from_config(raw: dict, default_name: str = "dictionary") -> Dictionary:
    if not isinstance(raw, dict) or "groups" not in raw:
        raise ValidationError("dictionary file must be a mapping with a 'groups' section")
    opts_raw = raw.get("options") or {}
    unknown = set(opts_raw) - {"case_fold", "partial_match", "strip_punct"}
    if unknown:
        raise ValidationError(f"unknown dictionary options: {sorted(unknown)}")
    options = MatchOptions(**{k: bool(v) for k, v in opts_raw.items()})
    groups = tuple(
        (str(name), tuple(str(t) for t in terms)) for name, terms in raw["groups"].items()
    )
    return Dictionary(name=str(raw.get("name", default_name)), groups=groups, options=options)


def load_builtin_dictionary(name: str) -> Dictionary:
    """Load one of the shipped dictionaries ("bbd-base", "bbd-historical")."""
    from importlib import resources

    fname = name.replace("-", "_") + ".yaml"
    ref = resources.files("epukit.data").joinpath(fname)
    if not ref.is_file():
        raise ValidationError(f"no builtin dictionary named {name!r}")
    return dictionary_from_config(yaml.safe_load(ref.read_text(encoding="utf-8")), name)


class _Node:
    __slots__ = ("children", "fail", "outputs")

    def __init__(self):
        self.children: dict[str, _Node] = {}
        self.fail: _Node | None = None
        self.outputs: list[tuple[int, int]] = []  # (group index, pattern length)


class Matcher:
    """Compiled multi-pattern automaton with per-group hit reporting."""

    def __init__(self, dictionary: Dictionary):
        self.dictionary = dictionary
        self.options = dictionary.options
        self.group_names = dictionary.group_names
        self._root = _Node()
        self.pattern_count = 0
        for group_idx, (_, terms) in enumerate(dictionary.groups):
            for term in terms:
                self._insert(term, group_idx)
                self.pattern_count += 1
        self._build_failure_links()

    def _insert(self, pattern: str, group_idx: int) -> None:
        node = self._root
        for ch in pattern:
            node = node.children.setdefault(ch, _Node())
        node.outputs.append((group_idx, len(pattern)))

    def _build_failure_links(self) -> None:
        root = self._root
        root.fail = root
        queue: deque[_Node] = deque()
        for child in root.children.values():
            child.fail = root
            queue.append(child)
        while queue:
            current = queue.popleft()
            for ch, child in current.children.items():
                fallback = current.fail
                while fallback is not root and ch not in fallback.children:
                    fallback = fallback.fail
                target = fallback.children.get(ch)
                child.fail = target if target is not None and target is not child else root
                child.outputs = child.outputs + child.fail.outputs
                queue.append(child)

    def _iter_matches(self, text: str) -> Iterator[tuple[int, int, int]]:
        """Yield (end index, group index, pattern length) for every occurrence."""
        root = self._root
        node = root
        for i, ch in enumerate(text):
            while node is not root and ch not in node.children:
                node = node.fail
            node = node.children.get(ch, root)
            for group_idx, length in node.outputs:
                yield i, group_idx, length

    def group_hits(self, text: str) -> set[str]:
        """Names of the groups with at least one term occurring in `text`."""
        normalized = normalize_text(text, self.options)
        n = len(normalized)
        total = len(self.group_names)
        hit: set[int] = set()
        for end, group_idx, length in self._iter_matches(normalized):
            if group_idx in hit:
                continue
            if not self.options.partial_match:
                start = end - length + 1
                if start > 0 and normalized[start - 1].isalnum():
                    continue
                if end + 1 < n and normalized[end + 1].isalnum():
                    continue
            hit.add(group_idx)
            if len(hit) == total:
                break
        return {self.group_names[g] for g in hit}

    def classify_text(self, text: str) -> bool:
        return len(self.group_hits(text)) == len(self.group_names)

    def classify(self, doc: Document) -> bool:
        """Positive iff every group fires somewhere in title+body."""
        return self.classify_text(doc.text)


def compile_dictionary(dictionary: Dictionary) -> Matcher:
    return Matcher(dictionary)


def classify_corpus(corpus: Corpus, matcher: Matcher) -> dict[str, int]:
    """Label every document; a pure map, order-independent."""
    return {doc.id: int(matcher.classify(doc)) for doc in corpus}


def classify_categories(
    doc: Document, dictionaries: Mapping[str, Dictionary | Matcher]
) -> set[str]:
    """Which category dictionaries label this document positive."""
    out = set()
    for category, d in dictionaries.items():
        matcher = d if isinstance(d, Matcher) else Matcher(d)
        if matcher.classify(doc):
            out.add(category)
    return out


@dataclass(frozen=True)
class VariantSpec:
    """An edit of a base dictionary: term additions/removals, option toggles."""

    name: str
    add: Mapping[str, Sequence[str]] = field(default_factory=dict)
    remove: Mapping[str, Sequence[str]] = field(default_factory=dict)
    options: Mapping[str, bool] = field(default_factory=dict)

    def apply(self, base: Dictionary) -> Dictionary:
        options = base.options
        if self.options:
            unknown = set(self.options) - {"case_fold", "partial_match", "strip_punct"}
            if unknown:
                raise ValidationError(f"variant {self.name!r}: unknown options {sorted(unknown)}")
            options = replace(options, **dict(self.options))
        unknown_groups = (set(self.add) | set(self.remove)) - set(base.group_names)
        if unknown_groups:
            raise ValidationError(
                f"variant {self.name!r} edits unknown groups {sorted(unknown_groups)}"
            )
        groups = []
        for group_name, terms in base.groups:
            # base terms were canonicalized under base options; re-normalize
            # removals the same way so they line up
            removed = {
                normalize_text(t, base.options) for t in self.remove.get(group_name, ())
            }
            kept = [t for t in terms if t not in removed]
            kept.extend(self.add.get(group_name, ()))
            if not kept:
                raise ValidationError(
                    f"variant {self.name!r} empties group {group_name!r}"
                )
            groups.append((group_name, tuple(kept)))
        return Dictionary(name=self.name, groups=tuple(groups), options=options)


def load_variants(path: str | Path) -> list[VariantSpec]:
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, list):
        raise ValidationError("variants file must be a YAML list")
    specs = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict) or "name" not in entry:
            raise ValidationError(f"variant entry {i} must be a mapping with a 'name'")
        unknown = set(entry) - {"name", "add", "remove", "options"}
        if unknown:
            raise ValidationError(f"variant {entry['name']!r}: unknown keys {sorted(unknown)}")
        specs.append(
            VariantSpec(
                name=str(entry["name"]),
                add=entry.get("add") or {},
                remove=entry.get("remove") or {},
                options=entry.get("options") or {},
            )
        )
    return specs


@dataclass(frozen=True)
class SweepRow:
    variant: str
    positives: int
    total: int
    positive_rate: float
    disagreement_vs_base: float


@dataclass
class SweepResult:
    rows: list[SweepRow]
    monthly: dict[str, dict[str, float]] | None = None  # variant -> month -> rate

    HEADER = ("variant", "positives", "total", "positive_rate", "disagreement_vs_base")

    def csv_rows(self) -> list[tuple]:
        return [
            (r.variant, r.positives, r.total, repr(r.positive_rate), repr(r.disagreement_vs_base))
            for r in self.rows
        ]


def sensitivity_sweep(
    corpus: Corpus,
    base: Dictionary,
    variants: Iterable[VariantSpec],
    monthly: bool = False,
) -> SweepResult:
    """Classify the corpus under the base dictionary and each variant.

    Reports positives, positive rate, and the per-document disagreement
    rate against the base labels; optionally a per-month positive-rate
    series for plotting dictionary drift.
    """
    if len(corpus) == 0:
        raise ValidationError("cannot sweep an empty corpus")
    base_labels = classify_corpus(corpus, Matcher(base))
    total = len(corpus)

    def month_rates(labels: dict[str, int]) -> dict[str, float]:
        by_month: dict[str, list[int]] = {}
        for doc in corpus:
            by_month.setdefault(doc.month, []).append(labels[doc.id])
        return {m: sum(v) / len(v) for m, v in sorted(by_month.items())}

    rows = [
        SweepRow("base", sum(base_labels.values()), total, sum(base_labels.values()) / total, 0.0)
    ]
    monthly_out: dict[str, dict[str, float]] = {"base": month_rates(base_labels)} if monthly else {}
    for spec in variants:
        labels = classify_corpus(corpus, Matcher(spec.apply(base)))
        positives = sum(labels.values())
        disagree = sum(1 for i in base_labels if labels[i] != base_labels[i]) / total
        rows.append(SweepRow(spec.name, positives, total, positives / total, disagree))
        if monthly:
            monthly_out[spec.name] = month_rates(labels)
    return SweepResult(rows=rows, monthly=monthly_out if monthly else None)
