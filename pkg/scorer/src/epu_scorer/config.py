"""Scorer configuration shared by the CLI and the service factory."""

from __future__ import annotations

from dataclasses import dataclass


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScorerConfig:
    mode: str = "stub"  # "stub" | "model"
    checkpoint: str | None = None  # HF id or local path, model mode only
    max_sequence_length: int | None = None  # None = full text
    tasks: tuple[str, ...] = ("epu",)
    host: str = "127.0.0.1"
    port: int = 8000
    batch_limit: int = 256

    def __post_init__(self):
        if self.mode not in ("stub", "model"):
            raise ConfigError(f"mode must be stub or model, got {self.mode!r}")
        if self.mode == "model" and not self.checkpoint:
            raise ConfigError("model mode requires a checkpoint")
        if self.max_sequence_length is not None and self.max_sequence_length < 1:
            raise ConfigError("max_sequence_length must be >= 1")
        if self.batch_limit < 1:
            raise ConfigError("batch_limit must be >= 1")
        if not self.tasks:
            raise ConfigError("at least one task name required")

    @property
    def model_id(self) -> str:
        if self.mode == "stub":
            suffix = self.max_sequence_length if self.max_sequence_length else "full"
            return f"stub-sha256:{suffix}"
        return str(self.checkpoint)
