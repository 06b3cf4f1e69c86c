"""Wire-protocol conformance against the real epukit client.

Spins a real uvicorn server on a free port and drives it with
epukit.scores.fetch_scores: 10,000 documents round-trip with zero
protocol violations, and batch sizes {1, 7, 64} produce identical
ScoreSets. Requires the epukit package installed alongside.
"""

import datetime as dt
import threading
import time

import pytest
import uvicorn

from epu_scorer.config import ScorerConfig
from epu_scorer.service import create_app
from epu_scorer.stub import stub_score

epukit_corpus = pytest.importorskip("epukit.corpus")
epukit_scores = pytest.importorskip("epukit.scores")


@pytest.fixture(scope="module")
def live_server():
    app = create_app(ScorerConfig(mode="stub", batch_limit=512))
    config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("server did not start")
        time.sleep(0.01)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


def _corpus(n: int):
    docs = [
        epukit_corpus.Document(
            id=f"doc{i:05d}",
            outlet="wire",
            date=dt.date(2020, 1 + i % 12, 1),
            body=f"article body {i} with some variable text {i * 7919 % 104729}",
            title=f"headline {i}" if i % 3 else "",
        )
        for i in range(n)
    ]
    return epukit_corpus.Corpus(docs)


def test_health_via_client(live_server):
    endpoint = epukit_scores.ScoringEndpoint(base_url=live_server)
    payload = epukit_scores.check_health(endpoint)
    assert payload["status"] == "ok"
    assert payload["model_id"] == "stub-sha256:full"


def test_10k_roundtrip_and_batch_invariance(live_server):
    corpus = _corpus(10_000)
    scoresets = {}
    for batch_size in (64, 7, 1):
        endpoint = epukit_scores.ScoringEndpoint(
            base_url=live_server, batch_size=batch_size, max_in_flight=16, timeout=30.0
        )
        scoresets[batch_size] = epukit_scores.fetch_scores(endpoint, corpus, "epu")

    # zero protocol violations: fetch_scores would have raised otherwise
    for scoreset in scoresets.values():
        assert len(scoreset) == 10_000
        assert scoreset.model_id == "stub-sha256:full"

    assert scoresets[64].entries == scoresets[7].entries == scoresets[1].entries

    # server-side scores equal the documented digest arithmetic
    for doc_id in ("doc00000", "doc04999", "doc09999"):
        doc = corpus.by_id[doc_id]
        assert scoresets[64].entries[doc_id] == stub_score(doc.text)


def test_overlong_batch_rejected_as_protocol_error(live_server):
    corpus = _corpus(600)
    endpoint = epukit_scores.ScoringEndpoint(
        base_url=live_server, batch_size=600, max_in_flight=1
    )
    with pytest.raises(epukit_scores.ProtocolError):
        epukit_scores.fetch_scores(endpoint, corpus, "epu")


def test_unknown_task_rejected(live_server):
    corpus = _corpus(5)
    endpoint = epukit_scores.ScoringEndpoint(base_url=live_server, batch_size=5)
    with pytest.raises(epukit_scores.ProtocolError, match="unknown task"):
        epukit_scores.fetch_scores(endpoint, corpus, "mystery")
