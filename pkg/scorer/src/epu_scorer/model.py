"""Checkpoint-backed scoring (model mode).

Loads a sequence-classification checkpoint with its own tokenizer and
returns the positive-class probability per text. Truncation happens at
the tokenizer level to the configured maximum sequence length; each
checkpoint's tokenizer defines its own token boundaries, so the sidecar
defers to it entirely.

Imports of transformers/torch are deferred so stub mode works without
the model extra installed.
"""

from __future__ import annotations


class ModelScorer:
    def __init__(self, checkpoint: str, max_sequence_length: int | None = None):
        try:
            import torch
            from transformers import AutoModelForSequenceClassification, AutoTokenizer
        except ImportError as exc:  # pragma: no cover
            raise RuntimeError(
                "model mode needs the 'model' extra: pip install epu-scorer[model]"
            ) from exc
        self._torch = torch
        self.tokenizer = AutoTokenizer.from_pretrained(checkpoint)
        self.model = AutoModelForSequenceClassification.from_pretrained(checkpoint)
        self.model.eval()
        self.max_sequence_length = max_sequence_length

    def score_batch(self, texts: list[str]) -> list[float]:
        torch = self._torch
        kwargs = {"truncation": True}
        if self.max_sequence_length is not None:
            kwargs["max_length"] = self.max_sequence_length
        encoded = self.tokenizer(texts, padding=True, return_tensors="pt", **kwargs)
        with torch.no_grad():
            logits = self.model(**encoded).logits
        if logits.shape[-1] == 1:  # single-logit heads: sigmoid
            probs = torch.sigmoid(logits[:, 0])
        else:  # softmax over classes, positive class last
            probs = torch.softmax(logits, dim=-1)[:, -1]
        return [float(p) for p in probs]
