"""Toolkit for multi-subject personalization data prep, initialization, and scoring.

The pipeline pieces live in focused modules:

- :mod:`mudikit.core` — images, masks, subjects, layout boxes, seeded randomness
- :mod:`mudikit.segmix` — segmented-subject compositing and prior-set assembly
- :mod:`mudikit.init` — layout generation and mean-shifted latent initialization
- :mod:`mudikit.dnc` — detect-and-compare identity scoring plus rank statistics
- :mod:`mudikit.io` — bit-exact interchange formats (embeddings, masks, bundles)
- :mod:`mudikit.sandbox` — a desk-scale diffusion environment for end-to-end runs
"""

from . import errors
from .core import (
    Image,
    LayoutBox,
    Mask,
    RandomSource,
    SegmentedSubject,
    bounding_box,
    resize_image,
    resize_mask,
    resize_subject,
    scaled_extent,
)
from .dnc import (
    CountMismatch,
    DetectionBox,
    DetectionRecord,
    DncConfig,
    EmbeddingSet,
    SimilarityPair,
    auroc,
    build_matrices,
    dnc_score,
    mean_similarity_baseline,
    row_wise_sort,
    spearman,
    subject_similarity,
)
from .init import (
    BlockAverageEncoder,
    EncoderInterface,
    FileBackedEncoder,
    InitConfig,
    LatentGrid,
    compose_canvas,
    latent_initialize,
    load_llm_layout,
    random_layout,
    read_layout_file,
)
from .io import RunConfig, load_config
from .segmix import (
    DEFAULT_NEGATIVE_PROMPT,
    DEFAULT_PROMPT_TEMPLATE,
    CompositeSample,
    PromptTemplate,
    SegMixConfig,
    augment_sample,
    build_prior_set,
    create_seg_mix,
    cutmix_compose,
)

__version__ = "0.1.0"

__all__ = [
    "errors",
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
    "SegMixConfig",
    "PromptTemplate",
    "CompositeSample",
    "DEFAULT_PROMPT_TEMPLATE",
    "DEFAULT_NEGATIVE_PROMPT",
    "create_seg_mix",
    "cutmix_compose",
    "augment_sample",
    "build_prior_set",
    "LatentGrid",
    "EncoderInterface",
    "BlockAverageEncoder",
    "FileBackedEncoder",
    "InitConfig",
    "random_layout",
    "read_layout_file",
    "load_llm_layout",
    "compose_canvas",
    "latent_initialize",
    "EmbeddingSet",
    "SimilarityPair",
    "CountMismatch",
    "DetectionBox",
    "DetectionRecord",
    "DncConfig",
    "subject_similarity",
    "row_wise_sort",
    "build_matrices",
    "dnc_score",
    "mean_similarity_baseline",
    "spearman",
    "auroc",
    "RunConfig",
    "load_config",
    "__version__",
]
