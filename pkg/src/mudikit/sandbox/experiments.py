"""End-to-end experiments: the shift-strength sweep and top-k selection.

``identity_mixture`` freezes a tiny latent-space mixture whose components
are "A left, B right", the swapped arrangement, and their midpoint (an
identity-mixed stand-in). ``gamma_sweep`` then measures, per shift strength,
how often a chain started from the shifted latent lands on the component
whose layout seeded it. Results serialize to CSV and a small SVG plot,
both byte-deterministic for a given seed.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..core import LayoutBox, RandomSource, SegmentedSubject
from ..errors import ParameterError
from ..init import EncoderInterface, InitConfig, compose_canvas, latent_initialize
from .gmm import GmmScoreModel
from .sampler import sample
from .schedule import NoiseSchedule

__all__ = [
    "GammaSweepRow",
    "identity_mixture",
    "gamma_sweep",
    "write_sweep_csv",
    "write_sweep_svg",
    "select_top_k",
    "worker_count",
]

THREADS_ENV_VAR = "MUDIKIT_THREADS"


def worker_count() -> int:
    """Parallelism cap: MUDIKIT_THREADS when set, else the machine's cores."""
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw is None:
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        raise ParameterError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}") from None
    if value < 1:
        raise ParameterError(f"{THREADS_ENV_VAR} must be >= 1, got {value}")
    return value


@dataclass(frozen=True, slots=True)
class GammaSweepRow:
    """One sweep result: shift strength and the layout-match rate it earned."""

    gamma: float
    match_rate: float
    trials: int
    seed: int


def _half_split_layouts(
    canvas: tuple[int, int]
) -> tuple[list[LayoutBox], list[LayoutBox]]:
    h, w = canvas
    left_w = w // 2
    right_w = w - left_w
    forward = [
        LayoutBox(subject_index=0, x=0, y=0, width=left_w, height=h),
        LayoutBox(subject_index=1, x=left_w, y=0, width=right_w, height=h),
    ]
    swapped = [
        LayoutBox(subject_index=0, x=left_w, y=0, width=right_w, height=h),
        LayoutBox(subject_index=1, x=0, y=0, width=left_w, height=h),
    ]
    return forward, swapped


def identity_mixture(
    subjects: list[SegmentedSubject],
    canvas: tuple[int, int],
    encoder: EncoderInterface,
    *,
    tau: float = 0.3,
    weights: tuple[float, float, float] | None = None,
) -> tuple[GmmScoreModel, list[list[LayoutBox] | None]]:
    """Latent mixture over both two-subject arrangements plus their blend.

    Component 0 places the first subject on the left half, component 1 swaps
    the halves, and component 2 (the identity-mixed case) sits at the mean
    of the two — it corresponds to no layout. Returns the mixture and the
    per-component layouts.
    """
    if len(subjects) != 2:
        raise ParameterError(f"identity_mixture needs exactly 2 subjects, got {len(subjects)}")
    if not np.isfinite(tau) or tau <= 0:
        raise ParameterError(f"tau must be positive, got {tau}")
    forward, swapped = _half_split_layouts(canvas)
    means = []
    for layout in (forward, swapped):
        image, _ = compose_canvas(subjects, layout, canvas)
        means.append(encoder.encode(image).flattened())
    means.append((means[0] + means[1]) / 2.0)
    if weights is None:
        weights = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)
    gmm = GmmScoreModel(means=np.stack(means), weights=np.asarray(weights), width=tau)
    return gmm, [forward, swapped, None]


def _run_trial(
    subjects: list[SegmentedSubject],
    layout: list[LayoutBox],
    encoder: EncoderInterface,
    canvas: tuple[int, int],
    gamma: float,
    gmm: GmmScoreModel,
    schedule: NoiseSchedule,
    steps: int,
    noise_level: float,
    trial_rng: RandomSource,
) -> int:
    """Sample once from the shifted init; return the nearest component index."""
    config = InitConfig(gamma=gamma)
    z_init = latent_initialize(subjects, layout, encoder, config, trial_rng, canvas=canvas)
    final, _ = sample(gmm, schedule, z_init, steps, trial_rng, noise_level=noise_level)
    deltas = gmm.means - final.flattened()[np.newaxis, :]
    return int(np.argmin(np.einsum("kd,kd->k", deltas, deltas)))


def gamma_sweep(
    subjects: list[SegmentedSubject],
    gammas: list[float],
    trials: int,
    gmm: GmmScoreModel,
    schedule: NoiseSchedule,
    rng: RandomSource,
    *,
    encoder: EncoderInterface,
    canvas: tuple[int, int],
    layout: list[LayoutBox],
    target_component: int = 0,
    steps: int = 50,
    noise_level: float = 0.0,
) -> list[GammaSweepRow]:
    """Layout-match rate per shift strength, ``trials`` chains each.

    Every trial owns a child stream keyed by its global index, so results
    are independent of execution order; trials fan out over at most
    MUDIKIT_THREADS workers. A trial matches when the finished sample lies
    nearest (Euclidean) to ``target_component``'s mean.

    Chains run at ``noise_level`` 0.0 by default: layout carry-over is a
    property of the shifted starting point, and fully re-noised transitions
    erase it no matter how strong the shift is.
    """
    if trials < 1:
        raise ParameterError(f"trials must be >= 1, got {trials}")
    if not gammas:
        raise ParameterError("gammas must be non-empty")
    if not 0 <= target_component < gmm.means.shape[0]:
        raise ParameterError(
            f"target_component must index one of {gmm.means.shape[0]} components, "
            f"got {target_component}"
        )

    def nearest(global_index: int, gamma: float) -> int:
        return _run_trial(
            subjects, layout, encoder, canvas, gamma, gmm, schedule, steps,
            noise_level, rng.child(global_index),
        )

    rows = []
    workers = worker_count()
    for gi, gamma in enumerate(gammas):
        indices = [gi * trials + ti for ti in range(trials)]
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                outcomes = list(pool.map(nearest, indices, [gamma] * trials))
        else:
            outcomes = [nearest(i, gamma) for i in indices]
        matches = sum(1 for c in outcomes if c == target_component)
        rows.append(
            GammaSweepRow(
                gamma=float(gamma),
                match_rate=matches / trials,
                trials=trials,
                seed=rng.seed,
            )
        )
    return rows


def write_sweep_csv(rows: list[GammaSweepRow], path) -> None:
    """CSV with header ``gamma,match_rate,trials,seed``; reals at 6 places."""
    lines = ["gamma,match_rate,trials,seed"]
    for row in rows:
        lines.append(f"{row.gamma:.6f},{row.match_rate:.6f},{row.trials},{row.seed}")
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


_SVG_WIDTH = 480
_SVG_HEIGHT = 320
_SVG_MARGIN = 48


def write_sweep_svg(rows: list[GammaSweepRow], path) -> None:
    """Static line plot of match rate against shift strength.

    Hand-assembled markup with fixed-precision coordinates, so equal rows
    produce byte-identical files.
    """
    if not rows:
        raise ParameterError("cannot plot an empty sweep")
    gammas = [row.gamma for row in rows]
    lo, hi = min(gammas), max(gammas)
    span = hi - lo if hi > lo else 1.0
    inner_w = _SVG_WIDTH - 2 * _SVG_MARGIN
    inner_h = _SVG_HEIGHT - 2 * _SVG_MARGIN

    def x_at(g: float) -> float:
        return _SVG_MARGIN + (g - lo) / span * inner_w

    def y_at(rate: float) -> float:
        return _SVG_HEIGHT - _SVG_MARGIN - rate * inner_h

    points = " ".join(f"{x_at(r.gamma):.2f},{y_at(r.match_rate):.2f}" for r in rows)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_WIDTH}" '
        f'height="{_SVG_HEIGHT}" viewBox="0 0 {_SVG_WIDTH} {_SVG_HEIGHT}">',
        f'<rect width="{_SVG_WIDTH}" height="{_SVG_HEIGHT}" fill="white"/>',
        f'<line x1="{_SVG_MARGIN}" y1="{_SVG_HEIGHT - _SVG_MARGIN}" '
        f'x2="{_SVG_WIDTH - _SVG_MARGIN}" y2="{_SVG_HEIGHT - _SVG_MARGIN}" stroke="black"/>',
        f'<line x1="{_SVG_MARGIN}" y1="{_SVG_MARGIN}" '
        f'x2="{_SVG_MARGIN}" y2="{_SVG_HEIGHT - _SVG_MARGIN}" stroke="black"/>',
        f'<polyline fill="none" stroke="#1f6fb2" stroke-width="2" points="{points}"/>',
    ]
    for row in rows:
        cx, cy = x_at(row.gamma), y_at(row.match_rate)
        parts.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="3" fill="#1f6fb2"/>')
        parts.append(
            f'<text x="{cx:.2f}" y="{_SVG_HEIGHT - _SVG_MARGIN + 16}" '
            f'font-size="10" text-anchor="middle">{row.gamma:.6f}</text>'
        )
    parts.append(
        f'<text x="{_SVG_WIDTH / 2:.2f}" y="{_SVG_HEIGHT - 8}" font-size="11" '
        f'text-anchor="middle">shift strength</text>'
    )
    parts.append(
        f'<text x="12" y="{_SVG_HEIGHT / 2:.2f}" font-size="11" text-anchor="middle" '
        f'transform="rotate(-90 12 {_SVG_HEIGHT / 2:.2f})">match rate</text>'
    )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(parts) + "\n")


def select_top_k(items: list[tuple[str, float]], k: int) -> list[str]:
    """Ids of the ``k`` best-scoring items; ties broken by id order."""
    if k < 0:
        raise ParameterError(f"k must be >= 0, got {k}")
    if k > len(items):
        raise ParameterError(f"cannot select {k} of {len(items)} items")
    ranked = sorted(items, key=lambda item: (-item[1], item[0]))
    return [item_id for item_id, _ in ranked[:k]]
