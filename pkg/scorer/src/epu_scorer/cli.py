"""Serve the scorer: `epu-scorer --mode stub --port 8000`.

Flags can also come from a YAML config file (--config); explicit flags
win. Model mode loads the checkpoint at startup and exits nonzero if
that fails, so orchestration notices immediately.
"""

from __future__ import annotations

import argparse
import logging
import sys

import yaml

from .config import ConfigError, ScorerConfig


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="epu-scorer", description=__doc__)
    parser.add_argument("--config", help="YAML file with the same keys as the flags")
    parser.add_argument("--mode", choices=["stub", "model"])
    parser.add_argument("--checkpoint", help="checkpoint id or path (model mode)")
    parser.add_argument("--max-seq-len", dest="max_sequence_length", type=int,
                        help="token truncation length; omit for full text")
    parser.add_argument("--task", dest="tasks", action="append",
                        help="task name to serve (repeatable)")
    parser.add_argument("--host")
    parser.add_argument("--port", type=int)
    parser.add_argument("--batch-limit", dest="batch_limit", type=int)
    return parser


def config_from_args(args: argparse.Namespace) -> ScorerConfig:
    values: dict = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}
        if not isinstance(raw, dict):
            raise ConfigError("--config must be a YAML mapping")
        values.update(raw)
    for key in ("mode", "checkpoint", "max_sequence_length", "tasks", "host", "port", "batch_limit"):
        value = getattr(args, key)
        if value is not None:
            values[key] = value
    if "tasks" in values:
        values["tasks"] = tuple(values["tasks"])
    return ScorerConfig(**values)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
        from .service import create_app

        app = create_app(config)  # model mode loads the checkpoint here
    except (ConfigError, RuntimeError, OSError) as exc:
        sys.stderr.write(f"startup failure: {exc}\n")
        return 1

    import uvicorn

    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
