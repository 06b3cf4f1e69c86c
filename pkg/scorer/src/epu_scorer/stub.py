"""Deterministic stub scoring for integration tests.

The stub maps text to a pseudo-probability without any model: strip the
text, sha256 it, and read the first 8 hex digits as a fraction of 2^32.
The result is stable across platforms and runs, invariant to leading
and trailing whitespace, and approximately uniform on [0, 1] across
distinct texts, which is exactly what protocol and pipeline tests need.

Pinned reference value: stub_score("") == 0.8894159947521985
(sha256 of the empty string starts e3b0c442).
"""

from __future__ import annotations

import hashlib

EMPTY_TEXT_SCORE = 0.8894159947521985


def normalize(text: str) -> str:
    return text.strip()


def stub_score(text: str, max_tokens: int | None = None) -> float:
    """Digest-based pseudo-probability in [0, 1).

    `max_tokens` imitates a context window: only the first N whitespace
    tokens influence the score, mirroring tokenizer truncation in model
    mode.
    """
    if max_tokens is not None:
        text = " ".join(text.split()[:max_tokens])
    digest = hashlib.sha256(normalize(text).encode("utf-8")).hexdigest()
    return int(digest[:8], 16) / 2**32
