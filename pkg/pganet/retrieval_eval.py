"""Re-identification ranking metrics: distances, average precision, mAP and CMC."""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist

logger = logging.getLogger(__name__)

METRICS = ("euclidean", "cosine")
ROLES = ("query", "gallery")
DEFAULT_RANKS = (1, 5, 10)


class EvaluationError(ValueError):
    """Raised when embeddings cannot be compared or no query can be scored."""
    pass


@dataclass
class EmbeddingSet:
    """Embeddings with their identity and camera labels."""
    vectors: np.ndarray
    identities: np.ndarray
    cameras: np.ndarray
    role: str = "query"

    def __post_init__(self):
        self.vectors = np.atleast_2d(np.asarray(self.vectors, dtype=np.float64))
        self.identities = np.asarray(self.identities).reshape(-1)
        self.cameras = np.asarray(self.cameras).reshape(-1)
        if self.role not in ROLES:
            raise ValueError(f"Unknown role: {self.role}")
        if self.vectors.ndim != 2:
            raise EvaluationError(f"{self.role} vectors must be a matrix, got {self.vectors.shape}")
        n = self.vectors.shape[0]
        if len(self.identities) != n or len(self.cameras) != n:
            raise EvaluationError(
                f"{self.role}: {n} vectors, {len(self.identities)} identities, "
                f"{len(self.cameras)} cameras"
            )

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass
class RankingResult:
    """
    Per-query rankings and the aggregate metrics.

    ``average_precision`` is NaN for queries without a valid match; those
    queries are left out of ``mAP`` and ``cmc`` and counted in ``skipped``.
    """
    order: np.ndarray
    average_precision: np.ndarray
    cmc: np.ndarray
    mAP: float
    skipped: int = 0

    @property
    def valid_queries(self) -> int:
        return int(np.sum(~np.isnan(self.average_precision)))

    def cmc_at(self, rank: int) -> float:
        """CMC(rank) with rank counted from 1 and clipped to the gallery size."""
        if rank < 1:
            raise ValueError(f"rank must be >= 1, got {rank}")
        return float(self.cmc[min(rank, len(self.cmc)) - 1])


def pairwise_distances(q: EmbeddingSet, g: EmbeddingSet, metric: str = "euclidean") -> np.ndarray:
    """
    Full (num queries × num gallery) distance matrix.

    Cosine distance is 1 − cosine similarity; a zero vector has no direction
    and raises EvaluationError.
    """
    if metric not in METRICS:
        raise ValueError(f"Unknown metric: {metric}")
    if q.dim != g.dim:
        raise EvaluationError(f"Embedding dims differ: {q.role} {q.dim}, {g.role} {g.dim}")

    if metric == "cosine":
        for s in (q, g):
            zero = np.flatnonzero(np.linalg.norm(s.vectors, axis=1) == 0)
            if zero.size:
                raise EvaluationError(f"Zero vector under cosine metric: {s.role} sample {int(zero[0])}")
    return cdist(q.vectors, g.vectors, metric=metric)


def _average_precision(relevant: np.ndarray) -> float:
    hits = np.flatnonzero(relevant)
    return float(np.mean(np.arange(1, len(hits) + 1) / (hits + 1)))


def evaluate(q: EmbeddingSet, g: EmbeddingSet, metric: str = "euclidean") -> RankingResult:
    """
    Rank the gallery for every query and score the rankings.

    Gallery entries with the query's identity and camera are junk and are
    dropped from that query's list. Equal distances rank the lower gallery
    index first.

    Raises:
        EvaluationError: No query has a valid cross-camera match
    """
    distances = pairwise_distances(q, g, metric)
    order = np.argsort(distances, axis=1, kind="stable")
    gallery_size = len(g)

    average_precision = np.full(len(q), np.nan)
    cmc_sum = np.zeros(gallery_size)

    for i in range(len(q)):
        ranked = order[i]
        junk = (g.identities[ranked] == q.identities[i]) & (g.cameras[ranked] == q.cameras[i])
        relevant = g.identities[ranked[~junk]] == q.identities[i]
        if not relevant.any():
            continue
        average_precision[i] = _average_precision(relevant)
        cmc_sum[np.argmax(relevant):] += 1.0

    valid = ~np.isnan(average_precision)
    n_valid = int(valid.sum())
    skipped = len(q) - n_valid
    if n_valid == 0:
        raise EvaluationError(f"None of the {len(q)} queries has a valid gallery match")
    if skipped:
        logger.warning("Skipped %d of %d queries without a valid gallery match", skipped, len(q))

    return RankingResult(
        order=order,
        average_precision=average_precision,
        cmc=cmc_sum / n_valid,
        mAP=float(average_precision[valid].mean()),
        skipped=skipped
    )


def metrics_frame(result: RankingResult, ranks: Sequence[int] = DEFAULT_RANKS) -> pd.DataFrame:
    """``metric,value`` rows for mAP and CMC at the given ranks."""
    rows = [{"metric": "mAP", "value": result.mAP}]
    rows += [{"metric": f"rank{r}", "value": result.cmc_at(r)} for r in ranks]
    return pd.DataFrame(rows, columns=["metric", "value"])
