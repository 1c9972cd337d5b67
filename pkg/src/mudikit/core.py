"""Domain types, the deterministic random-source contract, and geometry
primitives shared by every other module.

Conventions fixed here and relied on everywhere else:

* images are unit-interval float arrays, row-major, shape ``(h, w, c)``;
* masks are binary ``uint8`` arrays of shape ``(h, w)`` with values in {0, 1};
* boxes use integer pixel coordinates with ``(x, y)`` the top-left corner;
* all randomness flows through :class:`RandomSource` (PCG64), so a seed pins
  every downstream draw on every platform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateSizeError,
    EmptyMaskError,
    ParameterError,
)

__all__ = [
    "Image",
    "Mask",
    "SegmentedSubject",
    "LayoutBox",
    "RandomSource",
    "resize_subject",
    "resize_image",
    "resize_mask",
    "bounding_box",
    "scaled_extent",
]


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True, order="C")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, slots=True)
class Image:
    """A unit-interval intensity image with 1 or 3 channels.

    The pixel array is copied on construction and frozen, so an ``Image`` can
    be shared freely between operations.
    """

    height: int
    width: int
    channels: int
    data: np.ndarray

    def __post_init__(self) -> None:
        if self.height < 1 or self.width < 1:
            raise ParameterError(
                f"image dimensions must be >= 1, got {self.height}x{self.width}"
            )
        if self.channels not in (1, 3):
            raise ParameterError(f"channels must be 1 or 3, got {self.channels}")
        arr = _frozen_array(self.data, np.float64)
        if arr.shape != (self.height, self.width, self.channels):
            raise ParameterError(
                f"data shape {arr.shape} does not match declared "
                f"({self.height}, {self.width}, {self.channels})"
            )
        if not np.all(np.isfinite(arr)):
            raise ParameterError("image intensities must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ParameterError("image intensities must lie in [0, 1]")
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_array(cls, values) -> "Image":
        """Build an image from an ``(h, w)`` or ``(h, w, c)`` array."""
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3:
            raise ParameterError(f"expected 2-D or 3-D array, got {arr.ndim}-D")
        h, w, c = arr.shape
        return cls(height=h, width=w, channels=c, data=arr)


@dataclass(frozen=True, slots=True)
class Mask:
    """A binary segmentation mask aligned with an image of the same size."""

    height: int
    width: int
    data: np.ndarray

    def __post_init__(self) -> None:
        if self.height < 1 or self.width < 1:
            raise ParameterError(
                f"mask dimensions must be >= 1, got {self.height}x{self.width}"
            )
        arr = _frozen_array(self.data, np.uint8)
        if arr.shape != (self.height, self.width):
            raise ParameterError(
                f"mask shape {arr.shape} does not match declared "
                f"({self.height}, {self.width})"
            )
        values = np.unique(arr)
        if not np.all(np.isin(values, (0, 1))):
            raise ParameterError("mask values must be 0 or 1")
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_array(cls, values) -> "Mask":
        arr = np.asarray(values)
        if arr.ndim != 2:
            raise ParameterError(f"expected 2-D array, got {arr.ndim}-D")
        return cls(height=arr.shape[0], width=arr.shape[1], data=arr.astype(np.uint8))

    def foreground_count(self) -> int:
        return int(self.data.sum())


@dataclass(frozen=True, slots=True)
class SegmentedSubject:
    """An image of one subject plus the mask isolating it.

    ``identifier`` is the token used in training prompts; ``class_text`` is
    the plain class noun used for prior prompts.
    """

    image: Image
    mask: Mask
    identifier: str
    class_text: str

    def __post_init__(self) -> None:
        if (self.image.height, self.image.width) != (self.mask.height, self.mask.width):
            raise ParameterError(
                f"image ({self.image.height}x{self.image.width}) and mask "
                f"({self.mask.height}x{self.mask.width}) dimensions differ"
            )
        if not self.identifier:
            raise ParameterError("identifier must be a non-empty string")
        if not self.class_text:
            raise ParameterError("class_text must be a non-empty string")
        if self.mask.foreground_count() == 0:
            raise EmptyMaskError(f"subject {self.identifier!r} has an empty mask")

    @property
    def height(self) -> int:
        return self.image.height

    @property
    def width(self) -> int:
        return self.image.width


@dataclass(frozen=True, slots=True)
class LayoutBox:
    """Placement of one subject on a canvas.

    The box may extend past the canvas; pasting clips it. Width and height
    must be positive.
    """

    subject_index: int
    x: int
    y: int
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.subject_index < 0:
            raise ParameterError(f"subject_index must be >= 0, got {self.subject_index}")
        if self.width < 1 or self.height < 1:
            raise ParameterError(
                f"box extents must be >= 1, got {self.width}x{self.height}"
            )


class RandomSource:
    """Deterministic randomness with a documented generator and split rule.

    Wraps numpy's PCG64: equal seeds produce bit-identical draw sequences on
    every platform. ``child(i)`` derives an independent stream via
    ``SeedSequence(seed, spawn_key=(i,))``, which is how parallel trials get
    their per-trial seeds without consuming the parent stream.
    """

    algorithm = "pcg64"

    def __init__(self, seed: int):
        if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool):
            raise ParameterError(f"seed must be an integer, got {type(seed).__name__}")
        if seed < 0:
            raise ParameterError(f"seed must be >= 0, got {seed}")
        self.seed = int(seed)
        self._generator = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed)))

    def uniform(self) -> float:
        """One float drawn uniformly from [0, 1)."""
        return float(self._generator.random())

    def integers(self, low: int, high: int) -> int:
        """One integer drawn uniformly from the half-open range [low, high)."""
        if high <= low:
            raise ParameterError(f"empty integer range [{low}, {high})")
        return int(self._generator.integers(low, high))

    def index(self, count: int) -> int:
        """One index drawn uniformly from [0, count)."""
        return self.integers(0, count)

    def normal(self, shape: tuple[int, ...]) -> np.ndarray:
        """Standard-normal draws of the given shape (float64, row-major)."""
        return self._generator.normal(size=shape)

    def child(self, index: int) -> "RandomSource":
        """A stream independent of this one, determined by (seed, index)."""
        if index < 0:
            raise ParameterError(f"child index must be >= 0, got {index}")
        derived = np.random.SeedSequence(entropy=self.seed, spawn_key=(index,))
        return RandomSource(int(derived.generate_state(1, np.uint64)[0]))


def scaled_extent(extent: int, scale: float) -> int:
    """Round-half-up size of ``extent`` scaled by ``scale``.

    A pre-rounding result below one pixel is degenerate and rejected; at or
    above one pixel, round-half-up applies (2.5 -> 3).
    """
    if not np.isfinite(scale) or scale <= 0:
        raise ParameterError(f"scale must be positive and finite, got {scale}")
    raw = extent * scale
    if raw < 1.0:
        raise DegenerateSizeError(
            f"extent {extent} at scale {scale} falls below one pixel"
        )
    return int(np.floor(raw + 0.5))


def _source_indices(in_size: int, out_size: int) -> np.ndarray:
    """Nearest-neighbor source index for each output index (pixel centers)."""
    centers = (np.arange(out_size) + 0.5) * (in_size / out_size)
    return np.clip(np.floor(centers).astype(np.int64), 0, in_size - 1)


def resize_mask(mask: Mask, out_height: int, out_width: int) -> Mask:
    """Nearest-neighbor resize; binary values are preserved exactly."""
    if out_height < 1 or out_width < 1:
        raise DegenerateSizeError(f"target size {out_height}x{out_width} is degenerate")
    rows = _source_indices(mask.height, out_height)
    cols = _source_indices(mask.width, out_width)
    return Mask(out_height, out_width, mask.data[np.ix_(rows, cols)])


def resize_image(image: Image, out_height: int, out_width: int) -> Image:
    """Bilinear resize with pixel-center sampling and edge clamping."""
    if out_height < 1 or out_width < 1:
        raise DegenerateSizeError(f"target size {out_height}x{out_width} is degenerate")
    data = image.data
    ys = (np.arange(out_height) + 0.5) * (image.height / out_height) - 0.5
    xs = (np.arange(out_width) + 0.5) * (image.width / out_width) - 0.5
    ys = np.clip(ys, 0.0, image.height - 1)
    xs = np.clip(xs, 0.0, image.width - 1)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, image.height - 1)
    x1 = np.minimum(x0 + 1, image.width - 1)
    fy = (ys - y0)[:, np.newaxis, np.newaxis]
    fx = (xs - x0)[np.newaxis, :, np.newaxis]
    top = data[y0][:, x0] * (1.0 - fx) + data[y0][:, x1] * fx
    bottom = data[y1][:, x0] * (1.0 - fx) + data[y1][:, x1] * fx
    out = top * (1.0 - fy) + bottom * fy
    return Image(out_height, out_width, image.channels, np.clip(out, 0.0, 1.0))


def resize_subject(subject: SegmentedSubject, scale: float) -> SegmentedSubject:
    """Resize a subject by ``scale``: bilinear image, nearest-neighbor mask.

    Both axes round half up; a pre-rounding extent below one pixel raises
    :class:`DegenerateSizeError`. The resized mask is still binary, and the
    identifier/class ride along unchanged.
    """
    out_h = scaled_extent(subject.height, scale)
    out_w = scaled_extent(subject.width, scale)
    return SegmentedSubject(
        image=resize_image(subject.image, out_h, out_w),
        mask=resize_mask(subject.mask, out_h, out_w),
        identifier=subject.identifier,
        class_text=subject.class_text,
    )


def bounding_box(mask: Mask) -> tuple[int, int, int, int]:
    """Tight bounding box of the mask foreground as ``(x, y, width, height)``.

    Raises :class:`EmptyMaskError` when the mask has no foreground pixels.
    """
    rows = np.any(mask.data, axis=1)
    cols = np.any(mask.data, axis=0)
    if not rows.any():
        raise EmptyMaskError("cannot bound an empty mask")
    y0 = int(np.argmax(rows))
    y1 = int(mask.height - np.argmax(rows[::-1]))
    x0 = int(np.argmax(cols))
    x1 = int(mask.width - np.argmax(cols[::-1]))
    return (x0, y0, x1 - x0, y1 - y0)
