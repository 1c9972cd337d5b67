"""Model backends behind small protocols, plus deterministic mocks.

Real deployments implement these protocols around foundation models; the
mocks let every export path run (and be tested) without any weights. All
backends speak mudikit's own image/mask/box types, so exports stay a thin
translation layer.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from mudikit import Image, Mask
from mudikit.dnc import DetectionBox

from .errors import AdapterError


@runtime_checkable
class Detector(Protocol):
    """Finds subjects in an image for a list of text queries."""

    def detect(self, image: Image, queries: Sequence[str]) -> tuple[DetectionBox, ...]: ...


@runtime_checkable
class Segmenter(Protocol):
    """Produces a full-canvas binary mask for one detected box."""

    def segment(self, image: Image, box: DetectionBox) -> Mask: ...


@runtime_checkable
class Embedder(Protocol):
    """Produces one descriptor vector for one box crop."""

    def embed(self, image: Image, box: DetectionBox) -> np.ndarray: ...


def _crop(image: Image, box: DetectionBox) -> np.ndarray:
    if box.x0 < 0 or box.y0 < 0 or box.x1 > image.width or box.y1 > image.height:
        raise AdapterError(
            f"box ({box.x0},{box.y0})-({box.x1},{box.y1}) exceeds the "
            f"{image.height}x{image.width} canvas"
        )
    return image.data[box.y0 : box.y1, box.x0 : box.x1]


@dataclass(frozen=True, slots=True)
class MockDetector:
    """Brightness-threshold connected components standing in for a detector.

    Pixels whose channel maximum exceeds ``threshold`` form foreground;
    4-connected components of at least ``min_pixels`` become boxes in scan
    order. Component ``k`` is labeled with ``queries[k % len(queries)]`` and
    its confidence is the component's fill ratio inside its own box.
    """

    threshold: float = 0.5
    min_pixels: int = 4

    def __post_init__(self) -> None:
        if not 0.0 <= self.threshold < 1.0:
            raise AdapterError(f"threshold must lie in [0, 1), got {self.threshold}")
        if self.min_pixels < 1:
            raise AdapterError(f"min_pixels must be >= 1, got {self.min_pixels}")

    def detect(self, image: Image, queries: Sequence[str]) -> tuple[DetectionBox, ...]:
        if not queries:
            raise AdapterError("at least one query is required")
        fg = image.data.max(axis=2) > self.threshold
        seen = np.zeros_like(fg, dtype=bool)
        boxes: list[DetectionBox] = []
        for y in range(image.height):
            for x in range(image.width):
                if not fg[y, x] or seen[y, x]:
                    continue
                pixels = self._flood(fg, seen, y, x)
                if len(pixels) < self.min_pixels:
                    continue
                ys = [p[0] for p in pixels]
                xs = [p[1] for p in pixels]
                y0, y1 = min(ys), max(ys) + 1
                x0, x1 = min(xs), max(xs) + 1
                boxes.append(
                    DetectionBox(
                        label=queries[len(boxes) % len(queries)],
                        x0=x0, y0=y0, x1=x1, y1=y1,
                        confidence=len(pixels) / ((y1 - y0) * (x1 - x0)),
                    )
                )
        return tuple(boxes)

    @staticmethod
    def _flood(fg: np.ndarray, seen: np.ndarray, y: int, x: int) -> list[tuple[int, int]]:
        queue = deque([(y, x)])
        seen[y, x] = True
        pixels = []
        while queue:
            cy, cx = queue.popleft()
            pixels.append((cy, cx))
            for ny, nx in ((cy - 1, cx), (cy + 1, cx), (cy, cx - 1), (cy, cx + 1)):
                if 0 <= ny < fg.shape[0] and 0 <= nx < fg.shape[1]:
                    if fg[ny, nx] and not seen[ny, nx]:
                        seen[ny, nx] = True
                        queue.append((ny, nx))
        return pixels


@dataclass(frozen=True, slots=True)
class MockSegmenter:
    """Thresholds the pixels inside a box; everything outside stays background."""

    threshold: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 <= self.threshold < 1.0:
            raise AdapterError(f"threshold must lie in [0, 1), got {self.threshold}")

    def segment(self, image: Image, box: DetectionBox) -> Mask:
        crop = _crop(image, box)
        data = np.zeros((image.height, image.width), dtype=np.uint8)
        data[box.y0 : box.y1, box.x0 : box.x1] = (crop.max(axis=2) > self.threshold).astype(
            np.uint8
        )
        return Mask(image.height, image.width, data)


@dataclass(frozen=True, slots=True)
class MockEmbedder:
    """Block-mean color descriptor: the crop pooled onto a ``grid``^2 raster.

    Rows/columns are split into near-equal runs (crops smaller than the grid
    repeat pixels), giving a fixed-length, deterministic vector of dimension
    grid * grid * channels.
    """

    grid: int = 4

    def __post_init__(self) -> None:
        if self.grid < 1:
            raise AdapterError(f"grid must be >= 1, got {self.grid}")

    def embed(self, image: Image, box: DetectionBox) -> np.ndarray:
        crop = _crop(image, box)
        rows = _runs(crop.shape[0], self.grid)
        cols = _runs(crop.shape[1], self.grid)
        cells = np.empty((self.grid, self.grid, crop.shape[2]))
        for i, r in enumerate(rows):
            for j, c in enumerate(cols):
                cells[i, j] = crop[r, c].mean(axis=(0, 1))
        return cells.ravel()


def _runs(n: int, parts: int) -> list[slice]:
    """Split ``range(n)`` into ``parts`` non-empty runs (repeating when n < parts)."""
    edges = [i * n // parts for i in range(parts + 1)]
    runs = []
    for i in range(parts):
        start = min(edges[i], n - 1)
        runs.append(slice(start, max(edges[i + 1], start + 1)))
    return runs
