"""Provenance manifest written next to every export batch.

The manifest records which model produced the artifacts (name + revision),
what it ran on, and any preprocessing choices the backend made, so results
stay attributable long after the run.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import AdapterError

_REQUIRED = ("model_name", "model_revision", "input_glob", "output_dir", "device")


@dataclass(frozen=True, slots=True)
class AdapterManifest:
    """Who produced a batch of interchange files, from what, and how."""

    model_name: str
    model_revision: str
    input_glob: str
    output_dir: str
    device: str
    notes: str = ""

    def __post_init__(self) -> None:
        for name in _REQUIRED:
            value = getattr(self, name)
            if not isinstance(value, str) or not value:
                raise AdapterError(f"manifest field {name} must be a non-empty string")
        if not isinstance(self.notes, str):
            raise AdapterError("manifest field notes must be a string")


def save_manifest(manifest: AdapterManifest, path) -> None:
    """Write the manifest as sorted-key JSON via a same-directory temp file."""
    path = Path(path)
    text = json.dumps(asdict(manifest), indent=2, sort_keys=True) + "\n"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".manifest-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_manifest(path) -> AdapterManifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise AdapterError(f"{path}: manifest is not valid JSON: {exc}") from exc
    expected = {f.name for f in fields(AdapterManifest)}
    if not isinstance(doc, dict) or set(doc) != expected:
        raise AdapterError(f"{path}: manifest must have exactly the fields {sorted(expected)}")
    return AdapterManifest(**doc)
