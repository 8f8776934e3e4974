"""Atomic file writes, content hashing and run manifests."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Any

from slugify import slugify

import tcintensity


def canonical_json(document: Any) -> str:
    return json.dumps(document, sort_keys=True, separators=(",", ":"), allow_nan=False)


def content_hash(document: Any) -> str:
    """SHA-256 of the canonical JSON form of ``document``."""
    return hashlib.sha256(canonical_json(document).encode()).hexdigest()


def atomic_write_text(path: Path, text: str) -> None:
    """Write ``text`` to ``path`` through a temp file in the same directory."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        Path(tmp_name).replace(path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise


def atomic_write_json(path: Path, document: Any) -> None:
    atomic_write_text(path, json.dumps(document, indent=2, sort_keys=True) + "\n")


def metric_filename(metric: str, source: str, model: str, suffix: str = ".csv") -> str:
    """``{metric}_{source}_{model}.csv`` with every part slugified."""
    parts = [slugify(part, separator="-") for part in (metric, source, model)]
    return "_".join(parts) + suffix


def write_manifest(
    out_dir: Path,
    *,
    command: str,
    config: dict[str, Any],
    files: list[str],
    model_hashes: dict[str, str] | None = None,
    seeds: dict[str, Any] | None = None,
    extra: dict[str, Any] | None = None,
) -> Path:
    manifest = {
        **(extra or {}),
        "artifact_version": tcintensity.__version__,
        "command": command,
        "config": config,
        "files": sorted(files),
        "model_hashes": model_hashes or {},
        "seeds": seeds or {},
    }
    path = out_dir / "manifest.json"
    atomic_write_json(path, manifest)
    return path
