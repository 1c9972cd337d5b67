"""Ancestral sampling driven by a denoiser or an exact mixture scorer.

Each reverse transition estimates the clean signal, reconstructs the implied
noise direction, and steps to the next timestep with the standard posterior
variance. The trajectory of clean-signal estimates is returned alongside the
final sample so callers can watch convergence.
"""

from __future__ import annotations

import numpy as np

from ..core import RandomSource
from ..errors import ContractError, ParameterError, ScheduleError
from ..init import LatentGrid
from .gmm import GmmScoreModel, gmm_posterior_mean
from .schedule import NoiseSchedule

__all__ = ["sample"]


def _timestep_ladder(timesteps: int, steps: int) -> list[int]:
    """Evenly spaced timesteps from T down to 0, inclusive, rounded."""
    raw = np.linspace(timesteps, 0, steps + 1)
    return [int(round(v)) for v in raw]


def _grid(values: np.ndarray) -> LatentGrid:
    h, w, c = values.shape
    return LatentGrid(h, w, c, values)


def _estimate_x0(model, x: np.ndarray, t: int, condition_id, schedule: NoiseSchedule) -> np.ndarray:
    if isinstance(model, GmmScoreModel):
        if model.means.shape[1] != x.size:
            raise ContractError(
                f"mixture is {model.means.shape[1]}-dimensional but the state has "
                f"{x.size} elements"
            )
        return gmm_posterior_mean(x.reshape(-1), t, model, schedule).reshape(x.shape)
    predicted_noise = model.predict(x, t, condition_id)
    a = schedule.signal_scale(t)
    s = schedule.noise_scale(t)
    return (x - s * predicted_noise) / a


def sample(
    model,
    schedule: NoiseSchedule,
    init: LatentGrid | None,
    steps: int,
    rng: RandomSource,
    *,
    shape: tuple[int, int, int] | None = None,
    condition_id: object = None,
    noise_level: float = 1.0,
) -> tuple[LatentGrid, list[LatentGrid]]:
    """Run the reverse chain for ``steps`` transitions.

    ``init`` is the state at the terminal timestep; when ``None``, a unit
    Gaussian of ``shape`` is drawn from ``rng`` (one draw, before any
    transition noise). ``model`` is either a denoiser exposing
    ``predict(x_t, t, condition_id)`` or a :class:`GmmScoreModel`, in which
    case the exact posterior mean under the mixture is used.

    ``noise_level`` scales the per-transition noise deviation between the
    full ancestral amount (1.0, the default) and a deterministic solver
    (0.0). Fresh transition noise rapidly displaces whatever the chain was
    started from, so runs that should honor a shifted init belong at low
    noise levels — mirroring the deterministic solvers used in practice —
    while marginal-distribution checks belong at 1.0.

    Returns the final state and the per-transition clean-signal estimates.
    """
    if steps < 1:
        raise ParameterError(f"steps must be >= 1, got {steps}")
    if not 0.0 <= noise_level <= 1.0:
        raise ParameterError(f"noise_level must lie in [0, 1], got {noise_level}")
    if steps > schedule.timesteps:
        raise ParameterError(
            f"steps ({steps}) must not exceed the schedule's {schedule.timesteps} timesteps"
        )
    if init is None:
        if shape is None:
            raise ParameterError("either init or shape is required")
        h, w, c = shape
        x = rng.normal((h, w, c))
    else:
        if shape is not None and shape != (init.height, init.width, init.channels):
            raise ContractError(
                f"shape {shape} disagrees with init "
                f"{(init.height, init.width, init.channels)}"
            )
        x = np.array(init.data, dtype=np.float64)

    ladder = _timestep_ladder(schedule.timesteps, steps)
    trajectory: list[LatentGrid] = []
    for t, t_next in zip(ladder[:-1], ladder[1:]):
        if t == 0:
            raise ScheduleError("reverse chain reached timestep 0 with transitions remaining")
        ab_t = schedule.alpha_bar[t]
        if ab_t >= 1.0:
            raise ScheduleError(f"noise scale is zero at interior timestep {t}")
        x0_hat = _estimate_x0(model, x, t, condition_id, schedule)
        trajectory.append(_grid(x0_hat))
        a_t = schedule.signal_scale(t)
        s_t = schedule.noise_scale(t)
        eps_hat = (x - a_t * x0_hat) / s_t

        ab_n = schedule.alpha_bar[t_next]
        a_n = schedule.signal_scale(t_next)
        var_n = 1.0 - ab_n
        posterior_var = (var_n / (s_t * s_t)) * (1.0 - ab_t / ab_n)
        injected_var = (noise_level * noise_level) * float(max(posterior_var, 0.0))
        direction = np.sqrt(max(var_n - injected_var, 0.0))
        x = a_n * x0_hat + direction * eps_hat
        if t_next > 0 and injected_var > 0.0:
            x = x + np.sqrt(injected_var) * rng.normal(x.shape)
    return _grid(x), trajectory
