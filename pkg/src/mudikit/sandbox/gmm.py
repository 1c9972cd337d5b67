"""Analytic denoiser for Gaussian-mixture data.

When the clean-data distribution is a K-component isotropic Gaussian
mixture, the minimum-MSE denoiser E[x_0 | x_t] has a closed form: each
component contributes a per-component posterior mean, weighted by its
responsibility under the noised marginal. That exact denoiser is what lets
the sandbox study samplers and initialization without training anything.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError, ParameterError
from .schedule import NoiseSchedule

__all__ = ["GmmScoreModel", "gmm_posterior_mean"]

_WEIGHT_SUM_TOLERANCE = 1e-9


@dataclass(frozen=True, slots=True)
class GmmScoreModel:
    """Isotropic Gaussian mixture over flattened latents.

    ``means`` is (K, D); ``weights`` is a length-K simplex vector;
    ``width`` is the shared per-dimension standard deviation.
    """

    means: np.ndarray
    weights: np.ndarray
    width: float

    def __post_init__(self) -> None:
        means = np.array(self.means, dtype=np.float64, copy=True)
        weights = np.array(self.weights, dtype=np.float64, copy=True)
        if means.ndim != 2 or means.shape[0] < 1 or means.shape[1] < 1:
            raise ParameterError(f"means must be (K, D) with K,D >= 1, got {means.shape}")
        if not np.all(np.isfinite(means)):
            raise ParameterError("component means must be finite")
        if weights.shape != (means.shape[0],):
            raise ParameterError(
                f"weights shape {weights.shape} does not match {means.shape[0]} components"
            )
        if np.any(weights <= 0.0):
            raise ParameterError("component weights must be positive")
        if abs(float(weights.sum()) - 1.0) > _WEIGHT_SUM_TOLERANCE:
            raise ParameterError(
                f"weights must sum to 1 within {_WEIGHT_SUM_TOLERANCE}, "
                f"got {float(weights.sum())!r}"
            )
        if not np.isfinite(self.width) or self.width <= 0.0:
            raise ParameterError(f"width must be positive and finite, got {self.width}")
        means.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "weights", weights)

    @property
    def component_count(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]


def gmm_posterior_mean(
    x_t: np.ndarray, t: int, gmm: GmmScoreModel, schedule: NoiseSchedule
) -> np.ndarray:
    """Exact E[x_0 | x_t] at timestep ``t`` for mixture data.

    With signal scale a = sqrt(alpha_bar[t]) and noise variance
    s2 = 1 - alpha_bar[t], component k's marginal at x_t is
    N(a*mu_k, (a^2 tau^2 + s2) I); responsibilities follow by Bayes (computed
    with a log-sum-exp for stability) and each component's conditional mean
    is the precision-weighted blend (a tau^2 x_t + s2 mu_k) / (a^2 tau^2 + s2).
    """
    x = np.asarray(x_t, dtype=np.float64)
    if x.ndim != 1 or x.size != gmm.dim:
        raise ContractError(
            f"x_t must be a flat vector of dim {gmm.dim}, got shape {x.shape}"
        )
    if not np.all(np.isfinite(x)):
        raise ParameterError("x_t must be finite")
    a = schedule.signal_scale(t)
    s2 = 1.0 - float(schedule.alpha_bar[t])
    tau2 = gmm.width**2
    marginal_var = a * a * tau2 + s2

    centered = x[np.newaxis, :] - a * gmm.means  # (K, D)
    log_resp = np.log(gmm.weights) - np.sum(centered * centered, axis=1) / (2.0 * marginal_var)
    log_resp -= log_resp.max()
    resp = np.exp(log_resp)
    resp /= resp.sum()

    component_means = (a * tau2 * x[np.newaxis, :] + s2 * gmm.means) / marginal_var
    return resp @ component_means
