"""Run manifests: the reproducibility record every CLI run emits.

A manifest captures the fully resolved configuration (flags merged with
any config file, defaults filled in, timestamps pinned) plus sha256
checksums of every input and output. Re-running from the manifest with
unchanged inputs reproduces every artifact byte for byte; `replay
--verify` asserts exactly that.
"""

from __future__ import annotations

import json
from pathlib import Path

from . import __version__
from .errors import ValidationError
from .ioutil import canonical_json, atomic_write_text, sha256_file

MANIFEST_NAME = "manifest.json"


def file_entry(path: Path | str) -> dict:
    path = Path(path)
    return {"path": str(path), "sha256": sha256_file(path), "bytes": path.stat().st_size}


def build_manifest(
    subcommand: str,
    config: dict,
    inputs: list[Path | str],
    outputs: list[Path | str],
) -> dict:
    return {
        "tool": "epukit",
        "version": __version__,
        "subcommand": subcommand,
        "config": config,
        "inputs": [file_entry(p) for p in sorted(str(p) for p in inputs)],
        "outputs": [file_entry(p) for p in sorted(str(p) for p in outputs)],
    }


def write_manifest(out_dir: Path | str, manifest: dict) -> Path:
    path = Path(out_dir) / MANIFEST_NAME
    atomic_write_text(path, canonical_json(manifest))
    return path


def load_manifest(path: Path | str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    for key in ("tool", "subcommand", "config"):
        if key not in manifest:
            raise ValidationError(f"manifest missing {key!r}")
    if manifest["tool"] != "epukit":
        raise ValidationError(f"not an epukit manifest: tool={manifest['tool']!r}")
    return manifest


def verify_inputs(manifest: dict) -> None:
    """Fail if any recorded input changed since the manifest was written."""
    for entry in manifest.get("inputs", []):
        path = Path(entry["path"])
        if not path.exists():
            raise ValidationError(f"manifest input missing: {path}")
        digest = sha256_file(path)
        if digest != entry["sha256"]:
            raise ValidationError(
                f"manifest input changed: {path} (expected {entry['sha256'][:12]}, got {digest[:12]})"
            )


def verify_outputs(manifest: dict) -> list[str]:
    """Return mismatch descriptions for outputs that differ from the record."""
    problems = []
    for entry in manifest.get("outputs", []):
        path = Path(entry["path"])
        if not path.exists():
            problems.append(f"missing output {path}")
            continue
        digest = sha256_file(path)
        if digest != entry["sha256"]:
            problems.append(
                f"output {path} differs (expected {entry['sha256'][:12]}, got {digest[:12]})"
            )
    return problems
