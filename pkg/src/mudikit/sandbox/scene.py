"""Procedural sprites, a component detector, and cheap crop descriptors.

Sprites are flat-shaded shapes rasterized without anti-aliasing, so every
sprite ships with its exact support mask. The detector finds 4-connected
bright regions and boxes them; ``proxy_embed`` turns a boxed crop into a
small deterministic descriptor (color histogram + downsampled intensities)
suitable for the identity-similarity scorer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..core import Image, LayoutBox, Mask, RandomSource, SegmentedSubject, resize_image
from ..dnc import DetectionBox, DetectionRecord, EmbeddingSet
from ..errors import ContractError, ParameterError

__all__ = [
    "SpriteSpec",
    "SPRITE_SHAPES",
    "MIN_COMPONENT_PIXELS",
    "gen_sprites",
    "detect_components",
    "proxy_embed",
]

SPRITE_SHAPES = ("disk", "square", "triangle")

# Components smaller than this are treated as speckle and never boxed.
MIN_COMPONENT_PIXELS = 9

_PATCH_SIZE = 16
_HISTOGRAM_BINS = 8

_BRIGHTNESS_BASE = 0.85
_BRIGHTNESS_SPAN = 0.15


@dataclass(frozen=True, slots=True)
class SpriteSpec:
    """Recipe for one sprite: where it lives, what it looks like, who it is."""

    canvas: tuple[int, int]
    shape: str
    color: tuple[float, float, float]
    size: int
    identity: str

    def __post_init__(self) -> None:
        h, w = self.canvas
        if h < 2 or w < 2:
            raise ParameterError(f"canvas must be at least 2x2, got {self.canvas}")
        if self.shape not in SPRITE_SHAPES:
            raise ParameterError(
                f"shape must be one of {SPRITE_SHAPES}, got {self.shape!r}"
            )
        color = tuple(float(v) for v in self.color)
        if len(color) != 3 or not all(np.isfinite(v) and 0.0 <= v <= 1.0 for v in color):
            raise ParameterError(f"color must be three values in [0, 1], got {self.color}")
        object.__setattr__(self, "color", color)
        if self.size < 1:
            raise ParameterError(f"size must be >= 1, got {self.size}")
        if self.size >= min(h, w):
            raise ParameterError(
                f"size {self.size} does not fit inside a {h}x{w} canvas"
            )
        if not self.identity:
            raise ParameterError("identity must be non-empty")


def _rasterize(spec: SpriteSpec) -> np.ndarray:
    h, w = spec.canvas
    mask = np.zeros((h, w), dtype=np.uint8)
    if spec.shape == "disk":
        radius = spec.size / 2.0
        cy = (h - 1) / 2.0
        cx = (w - 1) / 2.0
        ii, jj = np.ogrid[0:h, 0:w]
        mask[(ii - cy) ** 2 + (jj - cx) ** 2 <= radius * radius] = 1
    elif spec.shape == "square":
        top = (h - spec.size) // 2
        left = (w - spec.size) // 2
        mask[top : top + spec.size, left : left + spec.size] = 1
    else:  # triangle: row i carries i + 1 pixels, apex at the top-left
        top = (h - spec.size) // 2
        left = (w - spec.size) // 2
        for i in range(spec.size):
            mask[top + i, left : left + i + 1] = 1
    return mask


def gen_sprites(specs: list[SpriteSpec], rng: RandomSource) -> list[SegmentedSubject]:
    """Rasterize each spec with one brightness draw per sprite, in order."""
    subjects = []
    for spec in specs:
        brightness = _BRIGHTNESS_BASE + _BRIGHTNESS_SPAN * rng.uniform()
        mask = _rasterize(spec)
        h, w = spec.canvas
        data = np.zeros((h, w, 3), dtype=np.float64)
        shaded = np.array(spec.color, dtype=np.float64) * brightness
        data[mask == 1] = shaded
        subjects.append(
            SegmentedSubject(
                image=Image.from_array(data),
                mask=Mask.from_array(mask),
                identifier=spec.identity,
                class_text=spec.shape,
            )
        )
    return subjects


def detect_components(
    image: Image, threshold: float, *, image_id: str = "image"
) -> DetectionRecord:
    """Box every 4-connected above-threshold region of at least 9 pixels.

    Intensity is the per-pixel max over channels; boxes use exclusive right
    and bottom edges, and confidence is the component's pixel count divided
    by the canvas area.
    """
    if not 0.0 < threshold < 1.0:
        raise ParameterError(f"threshold must lie strictly in (0, 1), got {threshold}")
    intensity = image.data.max(axis=2)
    binary = intensity > threshold
    labels, count = ndimage.label(binary)
    boxes = []
    if count:
        sizes = np.bincount(labels.ravel())
        slices = ndimage.find_objects(labels)
        canvas_area = image.height * image.width
        for index, bounds in enumerate(slices, start=1):
            size = int(sizes[index])
            if size < MIN_COMPONENT_PIXELS or bounds is None:
                continue
            rows, cols = bounds
            boxes.append(
                DetectionBox(
                    label=f"component-{len(boxes) + 1}",
                    x0=int(cols.start),
                    y0=int(rows.start),
                    x1=int(cols.stop),
                    y1=int(rows.stop),
                    confidence=size / canvas_area,
                )
            )
    return DetectionRecord(image_id=image_id, boxes=tuple(boxes), source="component_detector")


def _box_extent(box) -> tuple[int, int, int, int, str]:
    """(x, y, w, h, name) from either a layout box or a detection box."""
    if isinstance(box, DetectionBox):
        return box.x0, box.y0, box.x1 - box.x0, box.y1 - box.y0, box.label
    if isinstance(box, LayoutBox):
        return box.x, box.y, box.width, box.height, f"subject-{box.subject_index}"
    raise ContractError(f"expected a layout or detection box, got {type(box).__name__}")


def proxy_embed(image: Image, box) -> EmbeddingSet:
    """Descriptor of the boxed crop: 8-bin color histogram + 16x16 intensities.

    The crop is resized to a fixed 16x16 patch; per-channel histograms
    (normalized by patch pixel count) are concatenated with the flattened
    patch values and the whole vector is unit-normalized. Deterministic, and
    accepts either box flavor.
    """
    x, y, w, h, name = _box_extent(box)
    if w < 1 or h < 1:
        raise ContractError(f"box must have positive extent, got {w}x{h}")
    if x < 0 or y < 0 or x + w > image.width or y + h > image.height:
        raise ContractError(
            f"box ({x},{y}) {w}x{h} exceeds the {image.height}x{image.width} image"
        )
    crop = Image.from_array(image.data[y : y + h, x : x + w])
    patch = resize_image(crop, _PATCH_SIZE, _PATCH_SIZE)
    pieces = []
    for ch in range(patch.channels):
        hist, _ = np.histogram(patch.data[:, :, ch], bins=_HISTOGRAM_BINS, range=(0.0, 1.0))
        pieces.append(hist / (_PATCH_SIZE * _PATCH_SIZE))
    pieces.append(patch.data.reshape(-1))
    descriptor = np.concatenate(pieces)
    return EmbeddingSet.normalized(name, descriptor[np.newaxis, :])
