"""Trainable noise-prediction models for the sandbox losses.

These exist to make the losses differentiable in closed form: the affine
model applies an independent gain and bias per timestep, so its MSE
gradients are a few lines and finite differences can confirm them. The
protocol is what the loss functions actually require — anything with
parameters, prediction, and a Jacobian-transpose accumulator works.
"""

from __future__ import annotations

from typing import Protocol, Sequence

import numpy as np

from ..core import RandomSource
from ..errors import ContractError, ParameterError

__all__ = ["DenoiserModel", "AffineDenoiser", "ConstantDenoiser"]


class DenoiserModel(Protocol):
    """Contract the sandbox losses train against."""

    @property
    def params(self) -> np.ndarray:
        """Flat parameter vector (copy)."""
        ...

    def with_params(self, params: np.ndarray) -> "DenoiserModel":
        """A model of the same shape with replaced parameters."""
        ...

    def predict(self, x_t: np.ndarray, t: int, condition_id) -> np.ndarray:
        """Noise estimate for a noised input at timestep ``t``."""
        ...

    def mse_backprop(
        self, points: Sequence[tuple[np.ndarray, int, object, np.ndarray, float]]
    ) -> np.ndarray:
        """Sum of scale * J^T residual over (x_t, t, cond, residual, scale)."""
        ...


class AffineDenoiser:
    """Per-timestep affine map: predict(x, t, c) = gain[t] * x + bias[t].

    Parameters are laid out as all gains (t = 0..T) followed by all biases.
    The condition id is accepted and ignored — conditioning is plumbing the
    sandbox carries but this model does not use.
    """

    def __init__(self, timesteps: int, params: np.ndarray | None = None):
        if timesteps < 1:
            raise ParameterError(f"timesteps must be >= 1, got {timesteps}")
        self.timesteps = timesteps
        size = 2 * (timesteps + 1)
        if params is None:
            params = np.zeros(size)
        params = np.array(params, dtype=np.float64, copy=True)
        if params.shape != (size,):
            raise ParameterError(
                f"params must have shape ({size},) for T={timesteps}, got {params.shape}"
            )
        if not np.all(np.isfinite(params)):
            raise ParameterError("params must be finite")
        self._params = params

    @classmethod
    def randomized(cls, timesteps: int, rng: RandomSource, scale: float = 0.5) -> "AffineDenoiser":
        return cls(timesteps, scale * rng.normal((2 * (timesteps + 1),)))

    @property
    def params(self) -> np.ndarray:
        return self._params.copy()

    def with_params(self, params: np.ndarray) -> "AffineDenoiser":
        return AffineDenoiser(self.timesteps, params)

    def _split(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.timesteps + 1
        return self._params[:n], self._params[n:]

    def _check_t(self, t: int) -> None:
        if not 0 <= t <= self.timesteps:
            raise ContractError(f"t={t} outside model range [0, {self.timesteps}]")

    def predict(self, x_t: np.ndarray, t: int, condition_id=None) -> np.ndarray:
        self._check_t(t)
        gains, biases = self._split()
        return gains[t] * np.asarray(x_t, dtype=np.float64) + biases[t]

    def mse_backprop(self, points) -> np.ndarray:
        n = self.timesteps + 1
        grad = np.zeros(2 * n)
        for x_t, t, _condition, residual, scale in points:
            self._check_t(t)
            grad[t] += scale * float(np.sum(np.asarray(x_t) * residual))
            grad[n + t] += scale * float(np.sum(residual))
        return grad


class ConstantDenoiser:
    """Zero-parameter model predicting a fixed value everywhere."""

    def __init__(self, value: float = 0.0):
        if not np.isfinite(value):
            raise ParameterError(f"value must be finite, got {value}")
        self.value = float(value)

    @property
    def params(self) -> np.ndarray:
        return np.zeros(0)

    def with_params(self, params: np.ndarray) -> "ConstantDenoiser":
        if np.asarray(params).size != 0:
            raise ParameterError("ConstantDenoiser has no parameters")
        return ConstantDenoiser(self.value)

    def predict(self, x_t: np.ndarray, t: int, condition_id=None) -> np.ndarray:
        return np.full_like(np.asarray(x_t, dtype=np.float64), self.value)

    def mse_backprop(self, points) -> np.ndarray:
        return np.zeros(0)
