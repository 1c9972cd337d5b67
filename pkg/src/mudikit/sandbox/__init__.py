"""Desk-scale diffusion sandbox: schedules, losses, exact sampling, scenes."""

from .config import SCHEDULE_KINDS, SandboxConfig
from .denoiser import AffineDenoiser, ConstantDenoiser, DenoiserModel
from .experiments import (
    GammaSweepRow,
    gamma_sweep,
    identity_mixture,
    select_top_k,
    worker_count,
    write_sweep_csv,
    write_sweep_svg,
)
from .gmm import GmmScoreModel, gmm_posterior_mean
from .losses import (
    GRAD_CHECK_MAX_PARAMS,
    NoisedExample,
    TrainingSets,
    db_loss,
    db_prepare,
    dm_loss,
    dm_loss_prepared,
    grad_check,
    kl_regularized_loss,
    prepare_batch,
)
from .sampler import sample
from .scene import (
    MIN_COMPONENT_PIXELS,
    SPRITE_SHAPES,
    SpriteSpec,
    detect_components,
    gen_sprites,
    proxy_embed,
)
from .schedule import TERMINAL_ALPHA_BAR, NoiseSchedule, forward_noise, make_schedule

__all__ = [
    "SandboxConfig",
    "SCHEDULE_KINDS",
    "NoiseSchedule",
    "make_schedule",
    "forward_noise",
    "TERMINAL_ALPHA_BAR",
    "GmmScoreModel",
    "gmm_posterior_mean",
    "DenoiserModel",
    "AffineDenoiser",
    "ConstantDenoiser",
    "TrainingSets",
    "NoisedExample",
    "prepare_batch",
    "dm_loss",
    "dm_loss_prepared",
    "db_loss",
    "db_prepare",
    "kl_regularized_loss",
    "grad_check",
    "GRAD_CHECK_MAX_PARAMS",
    "sample",
    "SpriteSpec",
    "SPRITE_SHAPES",
    "MIN_COMPONENT_PIXELS",
    "gen_sprites",
    "detect_components",
    "proxy_embed",
    "GammaSweepRow",
    "identity_mixture",
    "gamma_sweep",
    "write_sweep_csv",
    "write_sweep_svg",
    "select_top_k",
    "worker_count",
]
