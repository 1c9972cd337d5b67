"""Readers and writers for every on-disk format the toolkit exchanges.

Formats:

* embedding files (``.emb``): magic ``MDIE``, u32 LE version (currently 1),
  u32 LE subject-id byte length + UTF-8 id, u32 LE count, u32 LE dim, then
  count*dim little-endian float32 values, row-major;
* mask files: 8-bit single-channel PNG with values in {0, 255} plus a JSON
  sidecar (same path, ``.json`` suffix) carrying subject/class/source;
* detection files: JSON ``{"image_id", "boxes": [{label, x0, y0, x1, y1,
  confidence}]}`` (loaded records are marked ``external_file``);
* run configuration: strict JSON with one section per module; unknown keys
  are rejected by name and all defaults are materialized on load;
* composite bundles: a directory with ``image.png``, ``mask.png``,
  ``layout.json`` and ``prompt.txt``.

Readers validate everything they load; writers only accept values that
already satisfy the in-memory invariants, so write-then-read is identity on
valid data.
"""

from __future__ import annotations

import dataclasses
import json
import os
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image as PILImage

from .core import Image, LayoutBox, Mask, SegmentedSubject
from .dnc import (
    CountMismatch,
    DetectionBox,
    DetectionRecord,
    DncConfig,
    EmbeddingSet,
    SimilarityPair,
)
from .errors import (
    BadMagicError,
    FormatError,
    MetadataError,
    NonFiniteValueError,
    ParameterError,
    RenormalizationWarning,
    SchemaError,
    TruncatedFileError,
    UnsupportedVersionError,
)
from .init import InitConfig
from .sandbox.config import SandboxConfig
from .segmix import CompositeSample, SegMixConfig

__all__ = [
    "EMBEDDING_MAGIC",
    "EMBEDDING_VERSION",
    "save_embeddings",
    "load_embeddings",
    "save_mask",
    "load_mask",
    "load_mask_meta",
    "save_image_png",
    "load_image_png",
    "save_detections",
    "load_detections",
    "RunConfig",
    "load_config",
    "save_layout",
    "save_bundle",
    "load_bundle",
    "save_subject",
    "load_subject",
    "load_value_series",
    "save_score_report",
    "load_score_report",
]

EMBEDDING_MAGIC = b"MDIE"
EMBEDDING_VERSION = 1

_RENORM_WARN_THRESHOLD = 1e-3
_NORM_KEEP_THRESHOLD = 1e-6


# ---------------------------------------------------------------------------
# embedding files


def save_embeddings(embeddings: EmbeddingSet, path) -> None:
    """Write one subject's embedding vectors in the binary format."""
    id_bytes = embeddings.subject_id.encode("utf-8")
    payload = embeddings.vectors.astype("<f4").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sI", EMBEDDING_MAGIC, EMBEDDING_VERSION))
        fh.write(struct.pack("<I", len(id_bytes)))
        fh.write(id_bytes)
        fh.write(struct.pack("<II", embeddings.count, embeddings.dim))
        fh.write(payload)


def load_embeddings(path) -> EmbeddingSet:
    """Read an embedding file, unit-normalizing rows if needed.

    Rows already unit-norm (within 1e-6) are kept bit-exact so that
    write(read(f)) reproduces a valid file byte for byte. Larger deviations
    are corrected; deviations beyond 1e-3 additionally raise
    :class:`RenormalizationWarning`.
    """
    data = Path(path).read_bytes()

    def take(count: int, what: str) -> bytes:
        nonlocal offset
        if offset + count > len(data):
            raise TruncatedFileError(
                f"{path}: file ends inside {what} "
                f"(needed {count} bytes at offset {offset}, have {len(data) - offset})"
            )
        chunk = data[offset : offset + count]
        offset += count
        return chunk

    offset = 0
    magic = take(4, "magic")
    if magic != EMBEDDING_MAGIC:
        raise BadMagicError(f"{path}: expected magic {EMBEDDING_MAGIC!r}, got {magic!r}")
    (version,) = struct.unpack("<I", take(4, "version"))
    if version != EMBEDDING_VERSION:
        raise UnsupportedVersionError(
            f"{path}: version {version} is not supported (expected {EMBEDDING_VERSION})"
        )
    (id_len,) = struct.unpack("<I", take(4, "subject id length"))
    try:
        subject_id = take(id_len, "subject id").decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: subject id is not valid UTF-8") from exc
    if not subject_id:
        raise FormatError(f"{path}: subject id is empty")
    count, dim = struct.unpack("<II", take(8, "count/dim header"))
    if count < 1 or dim < 1:
        raise FormatError(f"{path}: count and dim must be >= 1, got {count}x{dim}")
    payload = take(count * dim * 4, "vector payload")
    if offset != len(data):
        raise FormatError(f"{path}: {len(data) - offset} trailing bytes after payload")
    vectors = np.frombuffer(payload, dtype="<f4").reshape(count, dim).astype(np.float64)
    if not np.all(np.isfinite(vectors)):
        raise NonFiniteValueError(f"{path}: payload contains non-finite values")

    norms = np.linalg.norm(vectors, axis=1)
    if np.any(norms == 0.0):
        raise FormatError(f"{path}: payload contains a zero vector")
    deviation = float(np.max(np.abs(norms - 1.0)))
    if deviation > _NORM_KEEP_THRESHOLD:
        if deviation > _RENORM_WARN_THRESHOLD:
            warnings.warn(
                f"{path}: renormalizing rows deviating from unit norm by {deviation:.3g}",
                RenormalizationWarning,
                stacklevel=2,
            )
        vectors = vectors / norms[:, np.newaxis]
    return EmbeddingSet(subject_id=subject_id, vectors=vectors)


# ---------------------------------------------------------------------------
# PNG helpers, mask files, subject directories


def save_image_png(image: Image, path) -> None:
    """8-bit PNG (grayscale or RGB); intensities are rounded to 1/255 steps."""
    arr = np.floor(image.data * 255.0 + 0.5).astype(np.uint8)
    if image.channels == 1:
        pil = PILImage.fromarray(arr[:, :, 0], mode="L")
    else:
        pil = PILImage.fromarray(arr, mode="RGB")
    pil.save(os.fspath(path), format="PNG")


def load_image_png(path) -> Image:
    with PILImage.open(os.fspath(path)) as pil:
        if pil.mode not in ("L", "RGB"):
            raise FormatError(f"{path}: PNG mode must be L or RGB, got {pil.mode}")
        arr = np.asarray(pil, dtype=np.float64) / 255.0
    return Image.from_array(arr)


def _sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def save_mask(
    mask: Mask,
    path,
    *,
    subject: str = "",
    class_text: str = "",
    source: str = "",
) -> None:
    """Write a binary mask PNG ({0, 255}) and its metadata sidecar."""
    arr = (mask.data * 255).astype(np.uint8)
    PILImage.fromarray(arr, mode="L").save(os.fspath(path), format="PNG")
    sidecar = {"subject": subject, "class": class_text, "source": source}
    _sidecar_path(path).write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_mask_meta(path) -> dict[str, str]:
    """The sidecar metadata for a mask file; missing sidecar is an error."""
    sidecar = _sidecar_path(path)
    if not sidecar.exists():
        raise MetadataError(f"{path}: missing sidecar {sidecar.name}")
    try:
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MetadataError(f"{sidecar}: sidecar is not valid JSON: {exc}") from exc
    if not isinstance(meta, dict) or set(meta) != {"subject", "class", "source"}:
        raise MetadataError(
            f"{sidecar}: sidecar must have exactly the keys subject/class/source"
        )
    if not all(isinstance(v, str) for v in meta.values()):
        raise MetadataError(f"{sidecar}: sidecar values must be strings")
    return meta


def load_mask(path) -> Mask:
    """Read a mask PNG, insisting on 8-bit binary values and a sidecar."""
    load_mask_meta(path)
    with PILImage.open(os.fspath(path)) as pil:
        if pil.mode != "L":
            raise FormatError(f"{path}: mask PNG must be 8-bit single-channel (mode L)")
        arr = np.asarray(pil, dtype=np.uint8)
    values = np.unique(arr)
    if not np.all(np.isin(values, (0, 255))):
        raise FormatError(
            f"{path}: mask PNG values must be 0 or 255, found {values[:8].tolist()}"
        )
    return Mask.from_array(arr // 255)


def save_subject(subject: SegmentedSubject, directory) -> None:
    """Write a subject as image.png + mask.png (+ sidecar) in a directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_image_png(subject.image, directory / "image.png")
    save_mask(
        subject.mask,
        directory / "mask.png",
        subject=subject.identifier,
        class_text=subject.class_text,
        source="mudikit",
    )


def load_subject(directory) -> SegmentedSubject:
    directory = Path(directory)
    image = load_image_png(directory / "image.png")
    mask = load_mask(directory / "mask.png")
    meta = load_mask_meta(directory / "mask.png")
    if not meta["subject"] or not meta["class"]:
        raise MetadataError(f"{directory}: sidecar must name the subject and class")
    return SegmentedSubject(
        image=image, mask=mask, identifier=meta["subject"], class_text=meta["class"]
    )


# ---------------------------------------------------------------------------
# detections


def save_detections(record: DetectionRecord, path) -> None:
    doc = {
        "image_id": record.image_id,
        "boxes": [
            {
                "label": b.label,
                "x0": b.x0,
                "y0": b.y0,
                "x1": b.x1,
                "y1": b.y1,
                "confidence": b.confidence,
            }
            for b in record.boxes
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_detections(path) -> DetectionRecord:
    """Read a detections document; loaded records are ``external_file``."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: detections document must be a JSON object")
    unknown = set(doc) - {"image_id", "boxes"}
    if unknown:
        raise SchemaError(f"{path}: unknown key {sorted(unknown)[0]!r}")
    image_id = doc.get("image_id")
    if not isinstance(image_id, str):
        raise SchemaError(f"{path}: image_id must be a string")
    raw_boxes = doc.get("boxes")
    if not isinstance(raw_boxes, list):
        raise SchemaError(f"{path}: boxes must be a list")
    boxes = []
    for pos, raw in enumerate(raw_boxes):
        if not isinstance(raw, dict):
            raise SchemaError(f"{path}: box {pos} must be an object")
        unknown = set(raw) - {"label", "x0", "y0", "x1", "y1", "confidence"}
        if unknown:
            raise SchemaError(f"{path}: box {pos} has unknown key {sorted(unknown)[0]!r}")
        missing = {"label", "x0", "y0", "x1", "y1", "confidence"} - set(raw)
        if missing:
            raise SchemaError(f"{path}: box {pos} is missing {sorted(missing)[0]!r}")
        if not isinstance(raw["label"], str):
            raise SchemaError(f"{path}: box {pos} label must be a string")
        for key in ("x0", "y0", "x1", "y1"):
            if not isinstance(raw[key], int) or isinstance(raw[key], bool):
                raise SchemaError(f"{path}: box {pos} {key} must be an integer")
        if not isinstance(raw["confidence"], (int, float)) or isinstance(raw["confidence"], bool):
            raise SchemaError(f"{path}: box {pos} confidence must be a number")
        try:
            boxes.append(
                DetectionBox(
                    label=raw["label"],
                    x0=raw["x0"],
                    y0=raw["y0"],
                    x1=raw["x1"],
                    y1=raw["y1"],
                    confidence=float(raw["confidence"]),
                )
            )
        except ParameterError as exc:
            raise SchemaError(f"{path}: box {pos} is invalid: {exc}") from exc
    return DetectionRecord(image_id=image_id, boxes=tuple(boxes), source="external_file")


# ---------------------------------------------------------------------------
# run configuration


@dataclass(frozen=True, slots=True)
class RunConfig:
    """One section per module, every default materialized."""

    segmix: SegMixConfig = SegMixConfig()
    init: InitConfig = InitConfig()
    dnc: DncConfig = DncConfig()
    sandbox: SandboxConfig = SandboxConfig()


_TUPLE_FIELDS = {"out_size", "scales"}


def _build_section(cls, section_name: str, raw: dict, path):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - names
    if unknown:
        raise SchemaError(
            f"{path}: unknown key {sorted(unknown)[0]!r} in section {section_name!r}"
        )
    kwargs = {}
    for key, value in raw.items():
        if key in _TUPLE_FIELDS and isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ParameterError) as exc:
        raise SchemaError(f"{path}: section {section_name!r} is invalid: {exc}") from exc


def load_config(path) -> RunConfig:
    """Strict run-configuration loader.

    Unknown keys anywhere are rejected by name; absent sections and fields
    fall back to their documented defaults.
    """
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError(f"{path}: configuration must be a JSON object")
    sections = {
        "segmix": SegMixConfig,
        "init": InitConfig,
        "dnc": DncConfig,
        "sandbox": SandboxConfig,
    }
    unknown = set(doc) - set(sections)
    if unknown:
        raise SchemaError(f"{path}: unknown key {sorted(unknown)[0]!r}")
    kwargs = {}
    for name, cls in sections.items():
        raw = doc.get(name, {})
        if not isinstance(raw, dict):
            raise SchemaError(f"{path}: section {name!r} must be an object")
        kwargs[name] = _build_section(cls, name, raw, path)
    return RunConfig(**kwargs)


# ---------------------------------------------------------------------------
# layouts and composite bundles


def save_layout(
    path,
    canvas: tuple[int, int],
    boxes: Sequence[LayoutBox],
    identifiers: Sequence[str] | None = None,
) -> None:
    """Write a layout document; with ``identifiers`` boxes name subjects."""
    entries = []
    for box in boxes:
        subject = (
            identifiers[box.subject_index] if identifiers is not None else box.subject_index
        )
        entries.append(
            {"subject": subject, "x": box.x, "y": box.y, "w": box.width, "h": box.height}
        )
    doc = {"canvas": [canvas[0], canvas[1]], "boxes": entries}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def save_bundle(sample: CompositeSample, directory) -> None:
    """Write a composite sample as a directory bundle.

    The layout file names subjects by identifier, so a reloaded bundle lists
    its identifiers in paste order (first appearance), with boxes re-pointed
    accordingly.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_image_png(sample.image, directory / "image.png")
    arr = (sample.mask.data * 255).astype(np.uint8)
    PILImage.fromarray(arr, mode="L").save(directory / "mask.png", format="PNG")
    save_layout(
        directory / "layout.json",
        (sample.image.height, sample.image.width),
        sample.layout,
        identifiers=sample.subject_identifiers,
    )
    (directory / "prompt.txt").write_text(sample.prompt + "\n", encoding="utf-8")


def load_bundle(directory) -> CompositeSample:
    directory = Path(directory)
    for required in ("image.png", "mask.png", "layout.json", "prompt.txt"):
        if not (directory / required).exists():
            raise MetadataError(f"{directory}: bundle is missing {required}")
    image = load_image_png(directory / "image.png")
    with PILImage.open(directory / "mask.png") as pil:
        if pil.mode != "L":
            raise FormatError(f"{directory}/mask.png: must be 8-bit single-channel")
        mask_arr = np.asarray(pil, dtype=np.uint8)
    if not np.all(np.isin(np.unique(mask_arr), (0, 255))):
        raise FormatError(f"{directory}/mask.png: values must be 0 or 255")
    # Bundle layouts name subjects by identifier; recover the identifier
    # list in first-appearance order, then resolve boxes against it.
    try:
        raw = json.loads((directory / "layout.json").read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{directory}/layout.json: not valid JSON: {exc}") from exc
    subjects_in_order: list[str] = []
    if isinstance(raw, dict) and isinstance(raw.get("boxes"), list):
        for entry in raw["boxes"]:
            if isinstance(entry, dict) and isinstance(entry.get("subject"), str):
                if entry["subject"] not in subjects_in_order:
                    subjects_in_order.append(entry["subject"])
    if not subjects_in_order:
        raise MetadataError(
            f"{directory}/layout.json: bundle layouts must name subjects by identifier"
        )
    from .init import read_layout_file  # local import to avoid a cycle at module load

    _, boxes = read_layout_file(directory / "layout.json", identifiers=subjects_in_order)
    prompt = (directory / "prompt.txt").read_text(encoding="utf-8").rstrip("\n")
    return CompositeSample(
        image=image,
        mask=Mask.from_array(mask_arr // 255),
        layout=tuple(boxes),
        prompt=prompt,
        subject_identifiers=tuple(subjects_in_order),
    )


# ---------------------------------------------------------------------------
# small text artifacts


def load_value_series(path) -> np.ndarray:
    """One float per line; blank lines ignored."""
    values = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        try:
            values.append(float(line))
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: not a number: {line!r}") from exc
    if not values:
        raise FormatError(f"{path}: no values found")
    return np.asarray(values, dtype=np.float64)


def save_score_report(
    path,
    image_id: str,
    score: float,
    pair: SimilarityPair | CountMismatch,
) -> None:
    """Persist one image's score together with the matrices behind it."""
    if isinstance(pair, CountMismatch):
        doc = {
            "image_id": image_id,
            "score": score,
            "count_mismatch": {"detected": pair.detected, "expected": pair.expected},
        }
    else:
        doc = {
            "image_id": image_id,
            "score": score,
            "s_gt": pair.s_gt.tolist(),
            "s_dc": pair.s_dc.tolist(),
            "reference_order": list(pair.reference_order),
        }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_score_report(path) -> tuple[str, float]:
    """The (image_id, score) pair from a score report."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "image_id" not in doc or "score" not in doc:
        raise SchemaError(f"{path}: score report needs image_id and score")
    if not isinstance(doc["image_id"], str) or not isinstance(doc["score"], (int, float)):
        raise SchemaError(f"{path}: image_id must be a string and score a number")
    return doc["image_id"], float(doc["score"])
