"""Per-document classifier probabilities and how they enter the pipeline.

Scores arrive either as files (CSV `id,task,model_id,p` or JSON lines
with the same fields) or over the scoring wire protocol:

    POST /score   {"task": str, "texts": [str, ...]}
               -> {"model_id": str, "probs": [float, ...]}
    GET  /health  -> {"status": "ok", "model_id": str}

Score files are the canonical interchange: the expensive model pass runs
once, and everything downstream replays offline. A ScoreSet is always
bound to one (task, model_id) pair; nothing merges score sources
implicitly.
"""

from __future__ import annotations

import json
import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import requests

from .corpus import Corpus
from .errors import FetchError, ProtocolError, ValidationError


@dataclass(frozen=True)
class ScoreSet:
    """Positive-class probabilities for one task from one model."""

    task: str
    model_id: str
    entries: Mapping[str, float]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        bad = {i: p for i, p in self.entries.items() if not 0.0 <= p <= 1.0}
        if bad:
            sample = list(bad.items())[:5]
            raise ValidationError(f"probabilities outside [0,1]: {sample}")

    def __len__(self) -> int:
        return len(self.entries)

    def restrict(self, ids) -> "ScoreSet":
        wanted = set(ids)
        missing = sorted(wanted - set(self.entries))
        if missing:
            raise ValidationError(f"scores missing for ids: {missing[:10]}")
        return ScoreSet(
            task=self.task,
            model_id=self.model_id,
            entries={i: self.entries[i] for i in sorted(wanted)},
            meta=dict(self.meta),
        )

    def csv_rows(self) -> list[tuple]:
        return [(i, self.task, self.model_id, repr(p)) for i, p in sorted(self.entries.items())]

    CSV_HEADER = ("id", "task", "model_id", "p")


def _check_against_corpus(entries: dict[str, float], corpus: Corpus) -> None:
    corpus_ids = set(corpus.by_id)
    dangling = sorted(set(entries) - corpus_ids)
    if dangling:
        raise ValidationError(f"score file references unknown document ids: {dangling[:10]}")
    missing = sorted(corpus_ids - set(entries))
    if missing:
        raise ValidationError(
            f"score file missing {len(missing)} corpus ids, first 10: {missing[:10]}"
        )


def load_scores(path: str | Path, corpus: Corpus) -> ScoreSet:
    """Load and validate a score file against a corpus.

    Duplicate ids, dangling ids, unscored corpus documents, out-of-range
    probabilities, and mixed (task, model_id) pairs are all load errors;
    the message carries the offending line number where one exists.
    """
    path = Path(path)
    rows: list[tuple[int, str, str, str, float]] = []
    if path.suffix.lower() == ".csv":
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or set(reader.fieldnames) != set(ScoreSet.CSV_HEADER):
                raise ValidationError(
                    f"score CSV must have header id,task,model_id,p; got {reader.fieldnames}"
                )
            for line_no, rec in enumerate(reader, start=2):
                rows.append(_parse_score_record(rec, line_no))
    else:
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValidationError(f"line {line_no}: invalid JSON: {exc.msg}") from exc
                rows.append(_parse_score_record(rec, line_no))

    if not rows:
        raise ValidationError(f"score file {path} is empty")
    tasks = {r[1] for r in rows}
    models = {r[2] for r in rows}
    if len(tasks) > 1 or len(models) > 1:
        raise ValidationError(
            f"score file mixes tasks/models: tasks={sorted(tasks)} models={sorted(models)}"
        )
    entries: dict[str, float] = {}
    for line_no, _, _, doc_id, p in rows:
        if doc_id in entries:
            raise ValidationError(f"line {line_no}: duplicate id {doc_id!r}")
        entries[doc_id] = p
    _check_against_corpus(entries, corpus)
    return ScoreSet(task=tasks.pop(), model_id=models.pop(), entries=entries)


def _parse_score_record(rec: dict, line_no: int) -> tuple[int, str, str, str, float]:
    for key in ("id", "task", "model_id", "p"):
        if key not in rec or rec[key] in (None, ""):
            raise ValidationError(f"line {line_no}: missing field {key!r}")
    try:
        p = float(rec["p"])
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"line {line_no}: p is not a number: {rec['p']!r}") from exc
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"line {line_no}: probability {p} outside [0,1]")
    return line_no, str(rec["task"]), str(rec["model_id"]), str(rec["id"]), p


@dataclass(frozen=True)
class ScoringEndpoint:
    """Connection settings for a scorer speaking the wire protocol."""

    base_url: str
    batch_size: int = 32
    max_in_flight: int = 4
    timeout: float = 30.0
    retries: int = 2
    backoff: float = 0.25

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        if self.retries < 0:
            raise ValidationError("retry budget must be >= 0")
        if self.max_in_flight < 1:
            raise ValidationError("max_in_flight must be >= 1")


def _score_batch(
    endpoint: ScoringEndpoint, task: str, ids: list[str], texts: list[str]
) -> tuple[str, dict[str, float]]:
    """POST one batch, retrying transient failures within the budget.

    4xx responses and malformed payloads are protocol violations and
    fatal immediately; connection errors, timeouts, and 5xx responses
    are retried.
    """
    url = endpoint.base_url.rstrip("/") + "/score"
    last_exc: Exception | None = None
    for attempt in range(endpoint.retries + 1):
        if attempt:
            time.sleep(endpoint.backoff * attempt)
        try:
            resp = requests.post(
                url, json={"task": task, "texts": texts}, timeout=endpoint.timeout
            )
        except requests.RequestException as exc:
            last_exc = exc
            continue
        if 400 <= resp.status_code < 500:
            raise ProtocolError(
                f"scorer rejected batch (HTTP {resp.status_code}) ids={ids[:5]}...: {resp.text[:500]}"
            )
        if resp.status_code != 200:
            last_exc = ProtocolError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            continue
        try:
            payload = resp.json()
            model_id = payload["model_id"]
            probs = payload["probs"]
        except (ValueError, KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed scorer response for ids={ids[:5]}: {exc}") from exc
        if not isinstance(probs, list) or len(probs) != len(texts):
            raise ProtocolError(
                f"scorer returned {len(probs) if isinstance(probs, list) else '?'} probs "
                f"for a {len(texts)}-text batch, ids={ids[:5]}"
            )
        out = {}
        for doc_id, p in zip(ids, probs):
            if not isinstance(p, (int, float)) or not 0.0 <= float(p) <= 1.0:
                raise ProtocolError(f"probability {p!r} for id {doc_id!r} outside [0,1]")
            out[doc_id] = float(p)
        return str(model_id), out
    raise FetchError(
        f"batch failed after {endpoint.retries + 1} attempts ({last_exc}); unscored ids: {ids[:10]}",
        unscored_ids=list(ids),
    )


def fetch_scores(endpoint: ScoringEndpoint, corpus: Corpus, task: str) -> ScoreSet:
    """Score every document in the corpus over the wire protocol.

    Documents are batched in sorted-id order and may be scored by up to
    `max_in_flight` concurrent requests; results are re-keyed by id, so
    the returned ScoreSet is identical for any batch size or concurrency
    (the scorer itself is required to be deterministic).
    """
    ids = corpus.sorted_ids()
    if not ids:
        raise ValidationError("cannot score an empty corpus")
    batches = [
        ids[i : i + endpoint.batch_size] for i in range(0, len(ids), endpoint.batch_size)
    ]

    entries: dict[str, float] = {}
    model_ids: set[str] = set()
    failures: list[FetchError] = []

    def run(batch: list[str]) -> tuple[str, dict[str, float]]:
        texts = [corpus.by_id[i].text for i in batch]
        return _score_batch(endpoint, task, batch, texts)

    with ThreadPoolExecutor(max_workers=endpoint.max_in_flight) as pool:
        for result in pool.map(lambda b: _run_collect(run, b), batches):
            if isinstance(result, FetchError):
                failures.append(result)
            else:
                model_id, scored = result
                model_ids.add(model_id)
                entries.update(scored)

    if failures:
        unscored = sorted(i for f in failures for i in f.unscored_ids)
        raise FetchError(
            f"{len(failures)} of {len(batches)} batches failed; {len(unscored)} documents unscored",
            unscored_ids=unscored,
        )
    if len(model_ids) != 1:
        raise ProtocolError(f"scorer reported multiple model ids in one run: {sorted(model_ids)}")
    return ScoreSet(
        task=task,
        model_id=model_ids.pop(),
        entries={i: entries[i] for i in ids},
        meta={"endpoint": endpoint.base_url, "batch_size": endpoint.batch_size},
    )


def _run_collect(run, batch):
    """Let FetchError flow back as a value so other batches still finish."""
    try:
        return run(batch)
    except FetchError as exc:
        return exc


def check_health(endpoint: ScoringEndpoint) -> dict:
    url = endpoint.base_url.rstrip("/") + "/health"
    try:
        resp = requests.get(url, timeout=endpoint.timeout)
    except requests.RequestException as exc:
        raise ProtocolError(f"health check failed: {exc}") from exc
    if resp.status_code != 200:
        raise ProtocolError(f"health check returned HTTP {resp.status_code}")
    payload = resp.json()
    if payload.get("status") != "ok" or "model_id" not in payload:
        raise ProtocolError(f"malformed health response: {payload}")
    return payload


def binarize(scores: ScoreSet | Mapping[str, float], tau: float) -> dict[str, int]:
    """Threshold probabilities into labels: 1 iff p >= tau."""
    if not 0.0 <= tau <= 1.0:
        raise ValidationError(f"threshold {tau} outside [0,1]")
    entries = scores.entries if isinstance(scores, ScoreSet) else scores
    return {doc_id: int(p >= tau) for doc_id, p in entries.items()}
