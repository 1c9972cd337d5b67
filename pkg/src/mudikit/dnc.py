"""Identity-aware scoring of multi-subject generations.

Given per-subject reference embeddings and embeddings of the subjects
detected in a generated image, two matrices are compared: the ground-truth
self-similarity of the references and the detected-vs-reference cross
similarity, with the cross matrix's rows canonically reordered so the score
does not depend on detection order. The score is

    1 - ||S_gt - S_dc||_F^2

and a detection-count mismatch is a value outcome (scored 0), not an error:
missing or duplicated subjects are exactly what the metric must punish.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import ContractError, ParameterError, StatisticUndefinedError

__all__ = [
    "EmbeddingSet",
    "SimilarityPair",
    "CountMismatch",
    "DetectionBox",
    "DetectionRecord",
    "DncConfig",
    "SORT_METHODS",
    "DETECTION_SOURCES",
    "subject_similarity",
    "row_wise_sort",
    "build_matrices",
    "dnc_score",
    "mean_similarity_baseline",
    "spearman",
    "auroc",
]

SORT_METHODS = ("greedy", "sequential")
DETECTION_SOURCES = ("external_file", "component_detector")

UNIT_NORM_TOLERANCE = 1e-6


@dataclass(frozen=True, slots=True)
class EmbeddingSet:
    """All embedding vectors belonging to one subject (rows unit-norm)."""

    subject_id: str
    vectors: np.ndarray

    def __post_init__(self) -> None:
        if not self.subject_id:
            raise ParameterError("subject_id must be non-empty")
        arr = np.array(self.vectors, dtype=np.float64, copy=True, order="C")
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ParameterError(
                f"vectors must be a non-empty 2-D array, got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ParameterError("embedding vectors must be finite")
        norms = np.linalg.norm(arr, axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOLERANCE):
            worst = float(np.max(np.abs(norms - 1.0)))
            raise ParameterError(
                f"embedding rows must be unit-norm within {UNIT_NORM_TOLERANCE} "
                f"(worst deviation {worst:.3g}); use EmbeddingSet.normalized"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "vectors", arr)

    @classmethod
    def normalized(cls, subject_id: str, vectors) -> "EmbeddingSet":
        """Build a set from raw vectors, normalizing each row to unit length."""
        arr = np.asarray(vectors, dtype=np.float64)
        if arr.ndim != 2:
            raise ParameterError(f"vectors must be 2-D, got {arr.ndim}-D")
        norms = np.linalg.norm(arr, axis=1, keepdims=True)
        if np.any(norms == 0.0):
            raise ParameterError("cannot normalize a zero vector")
        return cls(subject_id=subject_id, vectors=arr / norms)

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True, slots=True)
class SimilarityPair:
    """Ground-truth and (row-sorted) detected similarity matrices."""

    s_gt: np.ndarray
    s_dc: np.ndarray
    reference_order: tuple[str, ...]

    def __post_init__(self) -> None:
        gt = np.array(self.s_gt, dtype=np.float64, copy=True)
        dc = np.array(self.s_dc, dtype=np.float64, copy=True)
        n = len(self.reference_order)
        if gt.shape != (n, n) or dc.shape != (n, n):
            raise ContractError(
                f"similarity matrices must be {n}x{n} to match "
                f"{n} references, got {gt.shape} and {dc.shape}"
            )
        if not (np.all(np.isfinite(gt)) and np.all(np.isfinite(dc))):
            raise ParameterError("similarity matrices must be finite")
        gt.setflags(write=False)
        dc.setflags(write=False)
        object.__setattr__(self, "s_gt", gt)
        object.__setattr__(self, "s_dc", dc)


@dataclass(frozen=True, slots=True)
class CountMismatch:
    """Detection count differed from reference count; scores as zero."""

    detected: int
    expected: int


@dataclass(frozen=True, slots=True)
class DetectionBox:
    """One detected box; pixel coordinates, exclusive right/bottom edges."""

    label: str
    x0: int
    y0: int
    x1: int
    y1: int
    confidence: float

    def __post_init__(self) -> None:
        if self.x1 <= self.x0 or self.y1 <= self.y0:
            raise ParameterError(
                f"box must have positive area, got "
                f"({self.x0},{self.y0})-({self.x1},{self.y1})"
            )
        if not 0.0 <= self.confidence <= 1.0:
            raise ParameterError(f"confidence must lie in [0, 1], got {self.confidence}")


@dataclass(frozen=True, slots=True)
class DetectionRecord:
    """All detections for one generated image."""

    image_id: str
    boxes: tuple[DetectionBox, ...]
    source: str

    def __post_init__(self) -> None:
        if self.source not in DETECTION_SOURCES:
            raise ParameterError(
                f"source must be one of {DETECTION_SOURCES}, got {self.source!r}"
            )
        object.__setattr__(self, "boxes", tuple(self.boxes))


@dataclass(frozen=True, slots=True)
class DncConfig:
    """Scoring knobs: which row-sort interpretation to use."""

    sort_method: str = "greedy"

    def __post_init__(self) -> None:
        if self.sort_method not in SORT_METHODS:
            raise ParameterError(
                f"sort_method must be one of {SORT_METHODS}, got {self.sort_method!r}"
            )


def subject_similarity(a: EmbeddingSet, b: EmbeddingSet) -> float:
    """Mean inner product over all cross pairs of two embedding sets."""
    if a.dim != b.dim:
        raise ContractError(f"embedding dims differ: {a.dim} vs {b.dim}")
    return float(np.mean(a.vectors @ b.vectors.T))


def row_wise_sort(matrix: np.ndarray, method: str = "greedy") -> np.ndarray:
    """Reorder rows so each lands at the column it best matches.

    ``greedy`` (default) repeatedly takes the globally maximal unassigned
    entry (ties: lowest row index, then lowest column index) and assigns
    that row to that column. ``sequential`` walks columns left to right,
    assigning each the best remaining row. Either way the output rows are a
    permutation of the input rows.
    """
    if method not in SORT_METHODS:
        raise ParameterError(f"method must be one of {SORT_METHODS}, got {method!r}")
    mat = np.asarray(matrix, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ParameterError(f"matrix must be square, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise ParameterError("matrix entries must be finite")
    n = mat.shape[0]
    out = np.empty_like(mat)
    if method == "greedy":
        work = mat.copy()
        for _ in range(n):
            flat = int(np.argmax(work))  # first maximum: lowest row, then column
            row, col = divmod(flat, n)
            out[col] = mat[row]
            work[row, :] = -np.inf
            work[:, col] = -np.inf
    else:
        taken: list[int] = []
        for col in range(n):
            column = mat[:, col].copy()
            column[taken] = -np.inf
            row = int(np.argmax(column))
            out[col] = mat[row]
            taken.append(row)
    return out


def build_matrices(
    detected: Sequence[EmbeddingSet],
    references: Sequence[EmbeddingSet],
    config: DncConfig = DncConfig(),
) -> SimilarityPair | CountMismatch:
    """Similarity matrices for one generated image, or a count mismatch.

    ``s_gt[i][j]`` compares reference i with reference j; the detected
    cross matrix is computed in detection order and then canonicalized by
    :func:`row_wise_sort` so the result is detection-order invariant.
    """
    if not references:
        raise ParameterError("need at least one reference embedding set")
    if len(detected) != len(references):
        return CountMismatch(detected=len(detected), expected=len(references))
    n = len(references)
    s_gt = np.empty((n, n))
    raw = np.empty((n, n))
    for j, ref in enumerate(references):
        for i in range(n):
            s_gt[i, j] = subject_similarity(references[i], ref)
            raw[i, j] = subject_similarity(detected[i], ref)
    return SimilarityPair(
        s_gt=s_gt,
        s_dc=row_wise_sort(raw, config.sort_method),
        reference_order=tuple(r.subject_id for r in references),
    )


def dnc_score(pair: SimilarityPair | CountMismatch) -> float:
    """1 minus the squared Frobenius distance between the two matrices.

    A count mismatch scores 0. The score can be negative for badly wrong
    matrices; any floor belongs in display code, not here.
    """
    if isinstance(pair, CountMismatch):
        return 0.0
    diff = pair.s_gt - pair.s_dc
    return float(1.0 - np.sum(diff * diff))


def mean_similarity_baseline(
    generated: EmbeddingSet, references: Sequence[EmbeddingSet]
) -> float:
    """Detection-free baseline: mean similarity against every reference."""
    if not references:
        raise ParameterError("need at least one reference embedding set")
    return float(np.mean([subject_similarity(generated, ref) for ref in references]))


def _as_clean_vector(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ParameterError(f"{name} must be 1-D, got {arr.ndim}-D")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} must be finite")
    return arr


def spearman(x, y) -> float:
    """Rank correlation: Pearson correlation of average-tied fractional ranks."""
    xs = _as_clean_vector(x, "x")
    ys = _as_clean_vector(y, "y")
    if xs.size != ys.size:
        raise ContractError(f"length mismatch: {xs.size} vs {ys.size}")
    if xs.size < 2:
        raise ParameterError(f"need at least 2 observations, got {xs.size}")
    if np.all(xs == xs[0]) or np.all(ys == ys[0]):
        raise StatisticUndefinedError("rank correlation is undefined for constant input")
    rx = rankdata(xs, method="average")
    ry = rankdata(ys, method="average")
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    return float((rx @ ry) / np.sqrt((rx @ rx) * (ry @ ry)))


def auroc(scores, labels) -> float:
    """Probability a positive outranks a negative, ties counting half.

    Computed by the rank-sum identity with average ranks, which handles tied
    scores exactly. Labels must be 0/1 with both classes present.
    """
    s = _as_clean_vector(scores, "scores")
    raw_labels = np.asarray(labels)
    if raw_labels.ndim != 1:
        raise ParameterError(f"labels must be 1-D, got {raw_labels.ndim}-D")
    if not np.all(np.isin(raw_labels, (0, 1))):
        raise ParameterError("labels must be 0 or 1")
    y = raw_labels.astype(np.int64)
    if s.size != y.size:
        raise ContractError(f"length mismatch: {s.size} vs {y.size}")
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise StatisticUndefinedError("AUROC is undefined with a single class")
    ranks = rankdata(s, method="average")
    rank_sum = float(ranks[y == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
