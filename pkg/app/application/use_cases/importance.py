import logging
from typing import List, Sequence, Tuple

import numpy as np
from scipy.stats import rankdata

from ..domain.entities.corpus import TaskKind
from ..domain.entities.importance import (
    ROW_MAJOR_TIES,
    CorrelationResult,
    CorrelationTable,
    HeadImportanceMatrix,
    HeadRanking,
)
from ..domain.errors import InputValidationError, NumericFailureError
from ..domain.interfaces.artifacts import IArtifactRepository
from ..domain.use_cases.importance import ICorrelateUseCase

logger = logging.getLogger(__name__)


def normalize_matrix(raw: np.ndarray) -> Tuple[np.ndarray, bool]:
    """Divide each layer by its L2 norm, then min-max scale globally. Returns (scores, degenerate)."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2 or raw.size == 0:
        raise ValueError(f"raw importance must be a non-empty L x H matrix, got shape {raw.shape}")
    if not np.all(np.isfinite(raw)):
        raise NumericFailureError("raw head importance contains non-finite values")
    if np.any(raw < 0):
        raise ValueError("raw head importance must be non-negative (sums of absolute gradients)")

    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    layered = np.divide(raw, norms, out=np.zeros_like(raw), where=norms > 0)
    low, high = layered.min(), layered.max()
    if high == low:
        return np.full_like(layered, 0.5), True
    return np.clip((layered - low) / (high - low), 0.0, 1.0), False


def normalize_scores(raw: np.ndarray, *, language_code: str, task_kind: TaskKind, model_config_hash: str,
                     dev_sentence_count: int, seed: int = 0, epochs: int = 3) -> HeadImportanceMatrix:
    scores, degenerate = normalize_matrix(raw)
    if degenerate:
        logger.warning("Importance matrix for %s is degenerate (all heads equal); scores set to 0.5", language_code)
    return HeadImportanceMatrix(
        scores=tuple(tuple(float(v) for v in row) for row in scores),
        language_code=language_code,
        task_kind=task_kind,
        model_config_hash=model_config_hash,
        dev_sentence_count=dev_sentence_count,
        seed=seed,
        epochs=epochs,
        degenerate=degenerate,
    )


def rank_scores(scores: np.ndarray, provenance: str = "") -> HeadRanking:
    """Ascending order of an L x H score array; ties fall back to row-major coordinate order."""
    scores = np.asarray(scores, dtype=np.float64)
    num_layers, num_heads = scores.shape
    flat_order = np.argsort(scores.reshape(-1), kind="stable")
    order = tuple((int(i) // num_heads, int(i) % num_heads) for i in flat_order)
    return HeadRanking(order=order, num_layers=num_layers, num_heads=num_heads, tie_policy_tag=ROW_MAJOR_TIES,
                       provenance=provenance)


def rank_heads(importance: HeadImportanceMatrix) -> HeadRanking:
    return rank_scores(importance.as_array(), provenance=f"gradient:{importance.language_code}")


def rank_correlation(x: np.ndarray, y: np.ndarray) -> float:
    """Spearman's rho: Pearson correlation of average ranks.

    A constant rank vector has no spread; rho is then 1 when both rank vectors
    are identical and 0 otherwise.
    """
    rx = rankdata(np.asarray(x, dtype=np.float64).reshape(-1), method="average")
    ry = rankdata(np.asarray(y, dtype=np.float64).reshape(-1), method="average")
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        return 1.0 if np.array_equal(rx, ry) else 0.0
    rho = float(np.dot(dx, dy)) / np.sqrt(sxx * syy)
    return float(min(1.0, max(-1.0, rho)))


def spearman_rho(a: HeadImportanceMatrix, b: HeadImportanceMatrix) -> CorrelationResult:
    if a.shape != b.shape:
        raise InputValidationError(
            f"cannot correlate {a.language_code} {a.shape} with {b.language_code} {b.shape}: dimensions differ"
        )
    rho = rank_correlation(a.as_array(), b.as_array())
    return CorrelationResult(rho=rho, pair=(a.language_code, b.language_code), n=a.num_layers * a.num_heads)


def correlation_table(matrices: Sequence[HeadImportanceMatrix]) -> CorrelationTable:
    if len(matrices) < 2:
        raise InputValidationError("a correlation table needs at least two importance matrices")
    codes = [m.language_code for m in matrices]
    if len(set(codes)) != len(codes):
        raise InputValidationError(f"duplicate languages in correlation input: {codes}")
    n = len(matrices)
    values: List[List[float]] = [[1.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            result = spearman_rho(matrices[i], matrices[j])
            values[i][j] = values[j][i] = result.rho
    return CorrelationTable(
        task_kind=matrices[0].task_kind,
        languages=tuple(codes),
        values=tuple(tuple(row) for row in values),
        heads_compared=matrices[0].num_layers * matrices[0].num_heads,
    )


class CorrelateUseCase(ICorrelateUseCase):
    def __init__(self, artifact_repo: IArtifactRepository):
        self.artifact_repo = artifact_repo

    def execute(self, matrices: Sequence[HeadImportanceMatrix]) -> Tuple[CorrelationTable, str]:
        table = correlation_table(matrices)
        path = self.artifact_repo.save_correlation(table)
        for result in table.off_diagonal():
            logger.info("rho(%s, %s) = %.4f", result.pair[0], result.pair[1], result.rho)
        return table, self.artifact_repo.relative(path)
