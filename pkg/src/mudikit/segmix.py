"""Compose segmented subjects into multi-subject training images.

The compositor pastes exactly two masked subjects onto a blank canvas:
subject order is swapped with probability ``swap_prob``, horizontal margins
are drawn from the left and right canvas edges, vertical offsets are drawn
uniformly over the feasible range, and the later paste overwrites the
earlier one where masks overlap. A rectangle-split baseline
(:func:`cutmix_compose`) and the training-time hooks
(:func:`augment_sample`, :func:`build_prior_set`) live here too.

Draw order from the shared :class:`~mudikit.core.RandomSource` is part of
the contract (tests may script it):

1. one uniform per subject for the scale factor, input order, only when
   ``config.scales`` is absent;
2. one uniform for the order swap;
3. one integer in [0, max_margin] for the left margin, one for the right;
4. one integer per pasted subject for its vertical offset, left then right.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    Image,
    LayoutBox,
    Mask,
    RandomSource,
    SegmentedSubject,
    resize_image,
    resize_subject,
)
from .errors import DoesNotFitError, ParameterError, PoolExhaustedError

__all__ = [
    "SegMixConfig",
    "PromptTemplate",
    "CompositeSample",
    "DEFAULT_PROMPT_TEMPLATE",
    "DEFAULT_NEGATIVE_PROMPT",
    "RANDOM_SCALE_RANGE",
    "create_seg_mix",
    "cutmix_compose",
    "augment_sample",
    "build_prior_set",
]

# Inference-time negative prompt paired with composed training data; kept
# with the other prompt defaults even though nothing in this package
# consumes it.
DEFAULT_NEGATIVE_PROMPT = "sticker, collage."

# When no explicit scales are given, each subject is scaled by a uniform
# draw from this range times the largest factor that still fits the canvas.
RANDOM_SCALE_RANGE = (0.6, 1.0)


@dataclass(frozen=True, slots=True)
class SegMixConfig:
    """Knobs for the compositor.

    ``max_margin`` is in pixels; margins are drawn inclusively from
    ``[0, max_margin]``. ``scales`` fixes per-subject resize factors (input
    order) instead of drawing them.
    """

    out_size: tuple[int, int] = (1024, 1024)
    max_margin: int = 1
    scales: tuple[float, float] | None = None
    seg_mix_prob: float = 0.3
    swap_prob: float = 0.5
    background_value: float = 0.0

    def __post_init__(self) -> None:
        h, w = self.out_size
        if h < 8 or w < 8:
            raise ParameterError(f"out_size must be at least 8x8, got {h}x{w}")
        if self.max_margin < 0:
            raise ParameterError(f"max_margin must be >= 0, got {self.max_margin}")
        if self.scales is not None:
            if len(self.scales) != 2:
                raise ParameterError("scales must hold one factor per subject (2)")
            if any(s <= 0 or not np.isfinite(s) for s in self.scales):
                raise ParameterError(f"scales must be positive and finite, got {self.scales}")
        for name in ("seg_mix_prob", "swap_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ParameterError(f"{name} must lie in [0, 1], got {p}")
        if not 0.0 <= self.background_value <= 1.0:
            raise ParameterError(
                f"background_value must lie in [0, 1], got {self.background_value}"
            )


@dataclass(frozen=True, slots=True)
class PromptTemplate:
    """Prompt text with a single ``{ids}`` slot for the subject names.

    Names are joined as "a and b" (two) or "a, b and c" (more). With
    ``count_prefix`` the rendered prompt is prefixed by "N objects: ".
    """

    template: str = "A photo of {ids}, simple background."
    count_prefix: bool = False

    def __post_init__(self) -> None:
        if self.template.count("{ids}") != 1:
            raise ParameterError("template must contain exactly one {ids} slot")

    def render(self, names: Sequence[str]) -> str:
        if not names:
            raise ParameterError("cannot render a prompt for zero subjects")
        if any(not n for n in names):
            raise ParameterError("subject names must be non-empty")
        if len(names) == 1:
            joined = names[0]
        else:
            joined = ", ".join(names[:-1]) + " and " + names[-1]
        rendered = self.template.replace("{ids}", joined)
        if self.count_prefix:
            rendered = f"{len(names)} objects: {rendered}"
        return rendered


DEFAULT_PROMPT_TEMPLATE = PromptTemplate()


@dataclass(frozen=True, slots=True)
class CompositeSample:
    """A composed training image with its mask, layout, and prompt.

    ``subject_identifiers`` is in input (prompt) order; ``layout`` is in
    paste order (left paste first) and each box's ``subject_index`` points
    into ``subject_identifiers``.
    """

    image: Image
    mask: Mask
    layout: tuple[LayoutBox, ...]
    prompt: str
    subject_identifiers: tuple[str, ...]

    def __post_init__(self) -> None:
        if (self.image.height, self.image.width) != (self.mask.height, self.mask.width):
            raise ParameterError("composite image and mask dimensions differ")
        if len(self.layout) != len(self.subject_identifiers):
            raise ParameterError("layout and subject_identifiers lengths differ")
        for box in self.layout:
            if box.subject_index >= len(self.subject_identifiers):
                raise ParameterError(
                    f"layout references subject {box.subject_index} but only "
                    f"{len(self.subject_identifiers)} subjects exist"
                )


def paste_subject(
    canvas_image: np.ndarray,
    canvas_mask: np.ndarray,
    subject: SegmentedSubject,
    x: int,
    y: int,
) -> None:
    """Paste ``subject`` at ``(x, y)`` in place, clipping at canvas edges.

    Only pixels under the subject's mask are written, so the paste carries
    no background with it.
    """
    canvas_h, canvas_w = canvas_mask.shape
    dst_y0, dst_y1 = max(y, 0), min(y + subject.height, canvas_h)
    dst_x0, dst_x1 = max(x, 0), min(x + subject.width, canvas_w)
    if dst_y0 >= dst_y1 or dst_x0 >= dst_x1:
        return
    src_y0, src_x0 = dst_y0 - y, dst_x0 - x
    src_y1 = src_y0 + (dst_y1 - dst_y0)
    src_x1 = src_x0 + (dst_x1 - dst_x0)
    patch_mask = subject.mask.data[src_y0:src_y1, src_x0:src_x1].astype(bool)
    patch_image = subject.image.data[src_y0:src_y1, src_x0:src_x1]
    region = canvas_image[dst_y0:dst_y1, dst_x0:dst_x1]
    region[patch_mask] = patch_image[patch_mask]
    mask_region = canvas_mask[dst_y0:dst_y1, dst_x0:dst_x1]
    mask_region[patch_mask] = 1


def _resized_pair(
    subjects: Sequence[SegmentedSubject],
    config: SegMixConfig,
    rng: RandomSource,
) -> list[SegmentedSubject]:
    out_h, out_w = config.out_size
    if config.scales is not None:
        factors = list(config.scales)
    else:
        lo, hi = RANDOM_SCALE_RANGE
        factors = []
        for subject in subjects:
            fit = min(out_h / subject.height, out_w / subject.width)
            factors.append((lo + (hi - lo) * rng.uniform()) * fit)
    resized = [resize_subject(s, f) for s, f in zip(subjects, factors)]
    for s in resized:
        if s.height > out_h or s.width > out_w:
            raise DoesNotFitError(
                f"subject {s.identifier!r} is {s.height}x{s.width} after resizing, "
                f"larger than the {out_h}x{out_w} canvas"
            )
    return resized


def create_seg_mix(
    subjects: Sequence[SegmentedSubject],
    config: SegMixConfig,
    rng: RandomSource,
    template: PromptTemplate = DEFAULT_PROMPT_TEMPLATE,
) -> CompositeSample:
    """Compose exactly two subjects onto a blank canvas.

    The prompt always names the subjects in input order; the swap draw only
    changes which subject lands left. Returns the composite image, the union
    mask, the placed boxes (paste order), and the rendered prompt.
    """
    if len(subjects) != 2:
        raise ParameterError(f"create_seg_mix needs exactly 2 subjects, got {len(subjects)}")
    out_h, out_w = config.out_size
    resized = _resized_pair(subjects, config, rng)

    swapped = rng.uniform() < config.swap_prob
    order = (1, 0) if swapped else (0, 1)
    left, right = resized[order[0]], resized[order[1]]

    margin_left = rng.integers(0, config.max_margin + 1)
    margin_right = rng.integers(0, config.max_margin + 1)
    x_left = margin_left
    x_right = out_w - margin_right - right.width
    y_left = rng.integers(0, out_h - left.height + 1)
    y_right = rng.integers(0, out_h - right.height + 1)

    canvas = np.full((out_h, out_w, subjects[0].image.channels), config.background_value)
    union = np.zeros((out_h, out_w), dtype=np.uint8)
    paste_subject(canvas, union, left, x_left, y_left)
    paste_subject(canvas, union, right, x_right, y_right)

    layout = (
        LayoutBox(order[0], x_left, y_left, left.width, left.height),
        LayoutBox(order[1], x_right, y_right, right.width, right.height),
    )
    prompt = template.render([s.identifier for s in subjects])
    return CompositeSample(
        image=Image(out_h, out_w, subjects[0].image.channels, canvas),
        mask=Mask(out_h, out_w, union),
        layout=layout,
        prompt=prompt,
        subject_identifiers=tuple(s.identifier for s in subjects),
    )


def cutmix_compose(
    subjects: Sequence[SegmentedSubject],
    config: SegMixConfig,
    rng: RandomSource,
    template: PromptTemplate = DEFAULT_PROMPT_TEMPLATE,
) -> CompositeSample:
    """Rectangle-split baseline: no masking, no background removal.

    Each subject's full image is resized to the canvas and a single vertical
    boundary column (drawn so both halves are non-empty) decides which image
    fills which side. The returned mask is all ones.
    """
    if len(subjects) != 2:
        raise ParameterError(f"cutmix_compose needs exactly 2 subjects, got {len(subjects)}")
    out_h, out_w = config.out_size
    full = [resize_image(s.image, out_h, out_w) for s in subjects]
    boundary = rng.integers(1, out_w)
    canvas = np.empty((out_h, out_w, subjects[0].image.channels))
    canvas[:, :boundary] = full[0].data[:, :boundary]
    canvas[:, boundary:] = full[1].data[:, boundary:]
    layout = (
        LayoutBox(0, 0, 0, boundary, out_h),
        LayoutBox(1, boundary, 0, out_w - boundary, out_h),
    )
    return CompositeSample(
        image=Image(out_h, out_w, subjects[0].image.channels, canvas),
        mask=Mask(out_h, out_w, np.ones((out_h, out_w), dtype=np.uint8)),
        layout=layout,
        prompt=template.render([s.identifier for s in subjects]),
        subject_identifiers=tuple(s.identifier for s in subjects),
    )


def augment_sample(
    sample: tuple[SegmentedSubject, str],
    pool: Sequence[SegmentedSubject],
    config: SegMixConfig,
    rng: RandomSource,
    template: PromptTemplate = DEFAULT_PROMPT_TEMPLATE,
) -> tuple[Image, str]:
    """Training-time hook: with probability ``seg_mix_prob``, compose.

    When the coin fires, a partner class is drawn uniformly among the pool's
    other classes (sorted for determinism), then a partner subject uniformly
    within that class, and the composite image/prompt replace the sample.
    Otherwise the sample passes through untouched. Raises
    :class:`PoolExhaustedError` only when the coin fires and no other class
    exists.
    """
    subject, prompt = sample
    if rng.uniform() >= config.seg_mix_prob:
        return (subject.image, prompt)
    other_classes = sorted({s.class_text for s in pool if s.class_text != subject.class_text})
    if not other_classes:
        raise PoolExhaustedError(
            f"augmentation fired but the pool has no class other than "
            f"{subject.class_text!r}"
        )
    chosen_class = other_classes[rng.index(len(other_classes))]
    members = [s for s in pool if s.class_text == chosen_class]
    partner = members[rng.index(len(members))]
    composite = create_seg_mix([subject, partner], config, rng, template)
    return (composite.image, composite.prompt)


def build_prior_set(
    priors: Sequence[SegmentedSubject],
    count: int,
    config: SegMixConfig,
    rng: RandomSource,
    template: PromptTemplate = DEFAULT_PROMPT_TEMPLATE,
) -> list[CompositeSample]:
    """Compose ``count`` prior-preservation samples from random pairs.

    Pairs are drawn without replacement per composite (two distinct prior
    subjects), and prompts name class nouns rather than identifier tokens,
    since prior subjects carry no learned token.
    """
    if count < 0:
        raise ParameterError(f"count must be >= 0, got {count}")
    if len(priors) < 2:
        raise ParameterError(f"need at least 2 prior subjects, got {len(priors)}")
    samples = []
    for _ in range(count):
        first = rng.index(len(priors))
        second = rng.index(len(priors) - 1)
        if second >= first:
            second += 1
        pair = [priors[first], priors[second]]
        composite = create_seg_mix(pair, config, rng, template)
        prompt = template.render([s.class_text for s in pair])
        samples.append(dataclasses.replace(composite, prompt=prompt))
    return samples
