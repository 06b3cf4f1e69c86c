"""The HTTP service: POST /score and GET /health.

Wire protocol (shared with the epukit client):

    POST /score   {"task": str, "texts": [str, ...]}
               -> {"model_id": str, "probs": [float, ...]},
                  len(probs) == len(texts), each in [0, 1]
    GET  /health  -> {"status": "ok", "model_id": str}

Unknown tasks and overlong batches get a 400 protocol-error response.
Scoring of one batch is sequential and deterministic; no state crosses
requests. Batch sizes and latencies go to a structured log line per
request.
"""

from __future__ import annotations

import logging
import time

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .config import ScorerConfig
from .stub import stub_score

logger = logging.getLogger("epu_scorer")


class ScoreRequest(BaseModel):
    task: str
    texts: list[str]


def create_app(config: ScorerConfig) -> FastAPI:
    app = FastAPI(title="epu-scorer", version="0.1.0")

    if config.mode == "model":
        from .model import ModelScorer

        scorer = ModelScorer(config.checkpoint, config.max_sequence_length)

        def score_batch(texts: list[str]) -> list[float]:
            return scorer.score_batch(texts)

    else:

        def score_batch(texts: list[str]) -> list[float]:
            return [stub_score(t, config.max_sequence_length) for t in texts]

    @app.get("/health")
    def health():
        return {"status": "ok", "model_id": config.model_id}

    @app.post("/score")
    def score(request: ScoreRequest):
        if request.task not in config.tasks:
            return JSONResponse(
                status_code=400,
                content={"error": f"unknown task {request.task!r}, serving {list(config.tasks)}"},
            )
        if len(request.texts) > config.batch_limit:
            return JSONResponse(
                status_code=400,
                content={
                    "error": f"batch of {len(request.texts)} exceeds limit {config.batch_limit}"
                },
            )
        started = time.perf_counter()
        probs = score_batch(request.texts)
        elapsed_ms = (time.perf_counter() - started) * 1000
        logger.info(
            "scored batch", extra={"batch_size": len(request.texts), "ms": round(elapsed_ms, 2)}
        )
        return {"model_id": config.model_id, "probs": probs}

    return app
