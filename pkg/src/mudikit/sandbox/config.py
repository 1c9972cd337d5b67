"""Sandbox-wide configuration defaults."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError

SCHEDULE_KINDS = ("cosine", "linear")


@dataclass(frozen=True, slots=True)
class SandboxConfig:
    """Defaults for the desk-scale diffusion sandbox.

    ``prior_weight`` scales the prior-set term of the two-term training
    loss; ``kl_weight`` scales the drift penalty of the regularized loss.
    """

    timesteps: int = 100
    schedule_kind: str = "cosine"
    prior_weight: float = 1.0
    kl_weight: float = 1.0

    def __post_init__(self) -> None:
        if self.timesteps < 2:
            raise ParameterError(f"timesteps must be >= 2, got {self.timesteps}")
        if self.schedule_kind not in SCHEDULE_KINDS:
            raise ParameterError(
                f"schedule_kind must be one of {SCHEDULE_KINDS}, got {self.schedule_kind!r}"
            )
        for name in ("prior_weight", "kl_weight"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ParameterError(f"{name} must be finite and >= 0, got {value}")
