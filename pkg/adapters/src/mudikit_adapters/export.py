"""Batch exporters: run a backend over matched images, emit interchange files.

Every artifact is written to a staging directory inside the output
directory, re-read with the corresponding mudikit loader to prove it
validates, and only then renamed into place — so a crash or a rejected
file never leaves partial output behind. Per-image problems become
warnings in the returned summary instead of aborting the batch; the
summary's exit code is nonzero whenever anything was skipped.
"""

from __future__ import annotations

import glob
import os
import re
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from mudikit.dnc import DetectionRecord, EmbeddingSet
from mudikit.io import (
    load_detections,
    load_embeddings,
    load_image_png,
    load_mask,
    save_detections,
    save_embeddings,
    save_mask,
)

from .backends import Detector, Embedder, Segmenter
from .manifest import AdapterManifest, save_manifest


@dataclass(frozen=True, slots=True)
class ExportSummary:
    """What a batch wrote and what it had to skip."""

    written: tuple[str, ...]
    warnings: tuple[str, ...]

    @property
    def exit_code(self) -> int:
        return 1 if self.warnings else 0


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "-", text)


class _Batch:
    """Shared mechanics: manifest, image iteration, stage-validate-commit."""

    def __init__(self, manifest: AdapterManifest):
        self.out = Path(manifest.output_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        save_manifest(manifest, self.out / "manifest.json")
        self.paths = sorted(glob.glob(manifest.input_glob))
        self.written: list[str] = []
        self.warnings: list[str] = []
        if not self.paths:
            self.warnings.append(f"no images match {manifest.input_glob!r}")

    def images(self):
        for path in self.paths:
            stem = Path(path).stem
            try:
                yield stem, load_image_png(path)
            except Exception as exc:
                self.warnings.append(f"{stem}: unreadable image: {exc}")

    def commit(self, write, validate, names: Sequence[str]) -> bool:
        """Run ``write`` into staging, ``validate`` there, then rename all files.

        Returns True when the files landed; on any failure records a warning
        and leaves the output directory untouched.
        """
        with tempfile.TemporaryDirectory(dir=self.out, prefix=".staging-") as staging:
            staged = [Path(staging) / name for name in names]
            try:
                write(Path(staging))
                validate(Path(staging))
            except Exception as exc:
                self.warnings.append(f"{names[0]}: rejected: {exc}")
                return False
            for item in staged:
                os.replace(item, self.out / item.name)
        self.written.extend(names)
        return True

    def summary(self) -> ExportSummary:
        return ExportSummary(written=tuple(self.written), warnings=tuple(self.warnings))


def export_detections(
    manifest: AdapterManifest, detector: Detector, queries: Sequence[str]
) -> ExportSummary:
    """One detections JSON per image; a detection-free image yields an empty record."""
    batch = _Batch(manifest)
    for stem, image in batch.images():
        try:
            boxes = detector.detect(image, queries)
            record = DetectionRecord(image_id=stem, boxes=tuple(boxes), source="external_file")
        except Exception as exc:
            batch.warnings.append(f"{stem}: detector failed: {exc}")
            continue
        name = f"{stem}.json"
        batch.commit(
            lambda d: save_detections(record, d / name),
            lambda d: load_detections(d / name),
            [name],
        )
    return batch.summary()


def export_segmentations(
    manifest: AdapterManifest,
    detector: Detector,
    segmenter: Segmenter,
    classes: Sequence[str],
) -> ExportSummary:
    """One mask PNG + sidecar per detected subject; none detected is a warning."""
    batch = _Batch(manifest)
    for stem, image in batch.images():
        try:
            boxes = detector.detect(image, classes)
        except Exception as exc:
            batch.warnings.append(f"{stem}: detector failed: {exc}")
            continue
        if not boxes:
            batch.warnings.append(f"{stem}: no detections, nothing to segment")
            continue
        for index, box in enumerate(boxes):
            try:
                mask = segmenter.segment(image, box)
            except Exception as exc:
                batch.warnings.append(f"{stem}: segmenter failed on box {index}: {exc}")
                continue
            name = f"{stem}-{index:02d}.png"
            batch.commit(
                lambda d: save_mask(
                    mask,
                    d / name,
                    subject=f"{stem}-{index:02d}",
                    class_text=box.label,
                    source=manifest.model_name,
                ),
                lambda d: load_mask(d / name),
                [name, f"{stem}-{index:02d}.json"],
            )
    return batch.summary()


def export_embeddings(
    manifest: AdapterManifest,
    detector: Detector,
    embedder: Embedder,
    queries: Sequence[str],
) -> ExportSummary:
    """One embedding file per detected subject label, one vector per crop."""
    batch = _Batch(manifest)
    for stem, image in batch.images():
        try:
            boxes = detector.detect(image, queries)
        except Exception as exc:
            batch.warnings.append(f"{stem}: detector failed: {exc}")
            continue
        if not boxes:
            batch.warnings.append(f"{stem}: no detections, nothing to embed")
            continue
        crops: dict[str, list[np.ndarray]] = {}
        for box in boxes:
            try:
                vector = np.asarray(embedder.embed(image, box), dtype=np.float64)
            except Exception as exc:
                batch.warnings.append(f"{stem}/{box.label}: embedder failed: {exc}")
                continue
            if vector.ndim != 1 or vector.size == 0 or not np.all(np.isfinite(vector)):
                batch.warnings.append(f"{stem}/{box.label}: non-finite or malformed embedding")
                continue
            crops.setdefault(box.label, []).append(vector)
        for label, vectors in crops.items():
            if len({v.size for v in vectors}) != 1:
                batch.warnings.append(f"{stem}/{label}: crops embed to different dimensions")
                continue
            name = f"{stem}-{_slug(label)}.emb"
            try:
                embeddings = EmbeddingSet.normalized(f"{stem}-{label}", np.stack(vectors))
            except Exception as exc:
                batch.warnings.append(f"{stem}/{label}: rejected: {exc}")
                continue
            batch.commit(
                lambda d: save_embeddings(embeddings, d / name),
                lambda d: load_embeddings(d / name),
                [name],
            )
    return batch.summary()
