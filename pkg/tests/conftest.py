"""Shared fixtures: corpus builders and a stdlib HTTP stub scorer.

The stub scorer here is deliberately independent of any real scoring
sidecar; it exists so the wire-protocol client can be tested with score
files only and fault injection under our control.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from epukit.corpus import Corpus, Document


def make_doc(
    doc_id: str,
    outlet: str = "times",
    date: str = "2020-01-15",
    body: str = "plain body text",
    title: str = "",
    gold: int | None = None,
    certainty: int | None = None,
    categories=None,
    language: str = "en",
) -> Document:
    return Document(
        id=doc_id,
        outlet=outlet,
        date=dt.date.fromisoformat(date),
        body=body,
        title=title,
        gold_epu=gold,
        certainty=certainty,
        categories=frozenset(categories) if categories is not None else None,
        language=language,
    )


def make_corpus(n: int, **kwargs) -> Corpus:
    return Corpus(make_doc(f"d{i:05d}", **kwargs) for i in range(n))


def jsonl(records: list[dict]) -> list[str]:
    return [json.dumps(r) for r in records]


def stub_probability(text: str) -> float:
    digest = hashlib.sha256(text.strip().encode("utf-8")).hexdigest()
    return int(digest[:8], 16) / 2**32


class StubScorer:
    """Minimal wire-protocol scorer with switchable fault injection."""

    def __init__(self):
        self.model_id = "stub-test"
        self.fail_remaining = 0  # next N /score requests return HTTP 500
        self.always_fail_marker: str | None = None  # 500 whenever a text contains it
        self.short_response = False  # drop the last probability (protocol violation)
        self.bad_probability = False  # return 1.5 for the first text
        self.request_count = 0
        self._lock = threading.Lock()

        stub = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_GET(self):
                if self.path == "/health":
                    self._send(200, {"status": "ok", "model_id": stub.model_id})
                else:
                    self._send(404, {"error": "not found"})

            def do_POST(self):
                if self.path != "/score":
                    self._send(404, {"error": "not found"})
                    return
                length = int(self.headers.get("Content-Length", 0))
                payload = json.loads(self.rfile.read(length))
                texts = payload["texts"]
                with stub._lock:
                    stub.request_count += 1
                    if stub.fail_remaining > 0:
                        stub.fail_remaining -= 1
                        self._send(500, {"error": "transient"})
                        return
                if stub.always_fail_marker and any(
                    stub.always_fail_marker in t for t in texts
                ):
                    self._send(500, {"error": "poisoned batch"})
                    return
                probs = [stub_probability(t) for t in texts]
                if stub.bad_probability and probs:
                    probs[0] = 1.5
                if stub.short_response and len(probs) > 1:
                    probs = probs[:-1]
                self._send(200, {"model_id": stub.model_id, "probs": probs})

            def _send(self, code: int, obj: dict):
                body = json.dumps(obj).encode("utf-8")
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        self.base_url = f"http://127.0.0.1:{self._server.server_address[1]}"

    def close(self):
        self._server.shutdown()
        self._server.server_close()


@pytest.fixture
def stub_scorer():
    scorer = StubScorer()
    yield scorer
    scorer.close()
