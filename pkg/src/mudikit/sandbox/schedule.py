"""Discrete noise schedules and the forward-noising map.

A schedule is the cumulative signal-retention sequence ``alpha_bar`` over
timesteps 0..T with ``alpha_bar[0] = 1`` (clean data), strictly decreasing,
and ``alpha_bar[T] <= 1e-4`` (essentially pure noise). The forward map is

    x_t = sqrt(alpha_bar[t]) * x_0 + sqrt(1 - alpha_bar[t]) * noise

so the signal and noise scales available on :class:`NoiseSchedule` are
exactly those two square roots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError, ParameterError, ScheduleError
from ..init import LatentGrid
from .config import SCHEDULE_KINDS

__all__ = ["NoiseSchedule", "make_schedule", "forward_noise", "TERMINAL_ALPHA_BAR"]

# Where both schedule kinds land at t = T; comfortably below the 1e-4
# terminal-signal ceiling the rest of the sandbox assumes.
TERMINAL_ALPHA_BAR = 5e-5

_COSINE_OFFSET = 0.008


@dataclass(frozen=True, slots=True)
class NoiseSchedule:
    """Validated cumulative schedule plus its per-step rates."""

    kind: str
    timesteps: int
    alpha_bar: np.ndarray
    betas: np.ndarray

    def __post_init__(self) -> None:
        ab = np.array(self.alpha_bar, dtype=np.float64, copy=True)
        betas = np.array(self.betas, dtype=np.float64, copy=True)
        if self.timesteps < 2:
            raise ScheduleError(f"timesteps must be >= 2, got {self.timesteps}")
        if ab.shape != (self.timesteps + 1,):
            raise ScheduleError(
                f"alpha_bar must have {self.timesteps + 1} entries, got {ab.shape}"
            )
        if betas.shape != (self.timesteps,):
            raise ScheduleError(f"betas must have {self.timesteps} entries, got {betas.shape}")
        if ab[0] != 1.0:
            raise ScheduleError(f"alpha_bar[0] must be exactly 1, got {ab[0]}")
        if np.any(ab <= 0.0) or np.any(ab > 1.0):
            raise ScheduleError("alpha_bar values must lie in (0, 1]")
        if np.any(np.diff(ab) >= 0.0):
            raise ScheduleError("alpha_bar must be strictly decreasing")
        if ab[-1] > 1e-4:
            raise ScheduleError(
                f"terminal alpha_bar must be <= 1e-4, got {ab[-1]:.3g}"
            )
        ab.setflags(write=False)
        betas.setflags(write=False)
        object.__setattr__(self, "alpha_bar", ab)
        object.__setattr__(self, "betas", betas)

    def _check_t(self, t: int) -> None:
        if not 0 <= t <= self.timesteps:
            raise ScheduleError(f"t={t} outside schedule range [0, {self.timesteps}]")

    def signal_scale(self, t: int) -> float:
        """sqrt(alpha_bar[t]): multiplier on the clean signal at step t."""
        self._check_t(t)
        return float(np.sqrt(self.alpha_bar[t]))

    def noise_scale(self, t: int) -> float:
        """sqrt(1 - alpha_bar[t]): multiplier on the injected noise at step t."""
        self._check_t(t)
        return float(np.sqrt(1.0 - self.alpha_bar[t]))


def _cosine_alpha_bar(timesteps: int) -> np.ndarray:
    t = np.arange(timesteps + 1, dtype=np.float64)
    angle = ((t / timesteps) + _COSINE_OFFSET) / (1.0 + _COSINE_OFFSET) * (np.pi / 2.0)
    raw = np.cos(angle) ** 2
    raw = raw / raw[0]
    # The raw curve hits 0 at t = T; a strictly-decreasing floor taper keeps
    # every value positive without breaking monotonicity at any T.
    taper = TERMINAL_ALPHA_BAR * (1.0 + (timesteps - t) * 1e-9)
    return np.maximum(raw, taper)


def _linear_alpha_bar(timesteps: int) -> tuple[np.ndarray, np.ndarray]:
    def cumulative(base: float) -> np.ndarray:
        betas = np.linspace(base, 10.0 * base, timesteps)
        return np.concatenate([[1.0], np.cumprod(1.0 - betas)])

    # Bisect the base rate of a 1:10 beta ladder until the terminal product
    # reaches the target; fixed endpoints cannot satisfy every T.
    lo, hi = 1e-12, 0.1 - 1e-12
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if cumulative(mid)[-1] > TERMINAL_ALPHA_BAR:
            lo = mid
        else:
            hi = mid
    betas = np.linspace(hi, 10.0 * hi, timesteps)
    return np.concatenate([[1.0], np.cumprod(1.0 - betas)]), betas


def make_schedule(kind: str = "cosine", timesteps: int = 100) -> NoiseSchedule:
    """Build a validated schedule of the given kind and length.

    Bad arguments here are :class:`ParameterError`; :class:`ScheduleError` is
    reserved for schedule *data* that violates the type's invariants.
    """
    if kind not in SCHEDULE_KINDS:
        raise ParameterError(f"kind must be one of {SCHEDULE_KINDS}, got {kind!r}")
    if timesteps < 2:
        raise ParameterError(f"timesteps must be >= 2, got {timesteps}")
    if kind == "cosine":
        alpha_bar = _cosine_alpha_bar(timesteps)
        betas = 1.0 - alpha_bar[1:] / alpha_bar[:-1]
    else:
        alpha_bar, betas = _linear_alpha_bar(timesteps)
    return NoiseSchedule(kind=kind, timesteps=timesteps, alpha_bar=alpha_bar, betas=betas)


def forward_noise(
    x0: LatentGrid, t: int, noise: np.ndarray, schedule: NoiseSchedule
) -> LatentGrid:
    """Noise clean data to step ``t`` with the given unit-Gaussian draw."""
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != x0.data.shape:
        raise ContractError(
            f"noise shape {noise.shape} does not match data shape {x0.data.shape}"
        )
    mixed = schedule.signal_scale(t) * x0.data + schedule.noise_scale(t) * noise
    return LatentGrid(x0.height, x0.width, x0.channels, mixed)
