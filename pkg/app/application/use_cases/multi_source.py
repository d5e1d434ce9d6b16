"""Multi-source ranking heuristics.

MD averages per-source fractional ranks, SD sums raw scores, EC sweeps every
source's own ranking and keeps the best one.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np
from scipy.stats import rankdata

from ..domain.entities.importance import HeadImportanceMatrix, HeadRanking
from ..domain.entities.protocol import ExperimentSpec, MultiSourceResult, SweepResult
from ..domain.errors import InputValidationError
from ..domain.use_cases.protocol import IPruneSweepUseCase, IRankPipelineUseCase
from ..domain.use_cases.multi_source import IMultiSourceUseCase
from .importance import rank_heads, rank_scores

logger = logging.getLogger(__name__)


def _stack(matrices: Sequence[HeadImportanceMatrix]) -> np.ndarray:
    if not matrices:
        raise InputValidationError("no importance matrices to merge")
    shapes = {m.shape for m in matrices}
    if len(shapes) != 1:
        raise InputValidationError(f"cannot merge importance matrices of different shapes {sorted(shapes)}")
    return np.stack([m.as_array() for m in matrices])


def _sources(matrices: Sequence[HeadImportanceMatrix]) -> str:
    return "+".join(m.language_code for m in matrices)


def merge_rankings_md(matrices: Sequence[HeadImportanceMatrix]) -> HeadRanking:
    stacked = _stack(matrices)
    num_layers, num_heads = stacked.shape[1:]
    ranks = np.stack([rankdata(layer.reshape(-1), method="average") for layer in stacked])
    merged = ranks.mean(axis=0).reshape(num_layers, num_heads)
    return rank_scores(merged, provenance=f"MD:{_sources(matrices)}")


def merge_rankings_sd(matrices: Sequence[HeadImportanceMatrix]) -> HeadRanking:
    return rank_scores(_stack(matrices).sum(axis=0), provenance=f"SD:{_sources(matrices)}")


def select_rankings_ec(sweeps: Mapping[str, SweepResult]) -> Tuple[str, SweepResult]:
    """The sweep with the highest best_score; ties go to the smallest language code."""
    if not sweeps:
        raise InputValidationError("EC selection needs at least one completed sweep")
    chosen = None
    for code in sorted(sweeps):
        if chosen is None or sweeps[code].best_score > sweeps[chosen].best_score:
            chosen = code
    return chosen, sweeps[chosen]


@dataclass
class MultiSourceOutcome:
    result: MultiSourceResult
    per_k_seconds: Dict[str, List[float]] = field(default_factory=dict)
    importance_paths: List[str] = field(default_factory=list)


class MultiSourceUseCase(IMultiSourceUseCase):
    def __init__(self, rank_pipeline: IRankPipelineUseCase, prune_sweep: IPruneSweepUseCase):
        self.rank_pipeline = rank_pipeline
        self.prune_sweep = prune_sweep

    def execute(self, spec: ExperimentSpec, force: bool = False) -> MultiSourceOutcome:
        ranked = {code: self.rank_pipeline.execute(spec, code, force) for code in spec.source_languages}
        matrices = [outcome.matrix for outcome in ranked.values()]

        sweeps: Dict[str, SweepResult] = {}
        seconds: Dict[str, List[float]] = {}
        trainings: Dict[str, int] = {}
        ec_language = None
        for heuristic in spec.heuristics:
            if heuristic == "EC":
                per_language = {}
                for matrix in matrices:
                    outcome = self.prune_sweep.execute(spec, rank_heads(matrix), kind="multi-source")
                    per_language[matrix.language_code] = outcome.result
                    seconds[f"EC:{matrix.language_code}"] = outcome.per_k_seconds
                ec_language, sweeps["EC"] = select_rankings_ec(per_language)
                trainings["EC"] = sum(result.trainings for result in per_language.values())
                logger.info("EC picked %s (best %.4f)", ec_language, sweeps["EC"].best_score)
                continue
            merge = merge_rankings_md if heuristic == "MD" else merge_rankings_sd
            outcome = self.prune_sweep.execute(spec, merge(matrices), kind="multi-source")
            sweeps[heuristic] = outcome.result
            seconds[heuristic] = outcome.per_k_seconds
            trainings[heuristic] = outcome.result.trainings

        first = next(iter(sweeps.values()))
        result = MultiSourceResult(
            spec_hash=spec.spec_hash(),
            task_kind=spec.task_kind,
            source_languages=spec.source_languages,
            target_language=spec.target_language,
            unpruned_score=first.unpruned_score,
            sweeps=sweeps,
            ec_language=ec_language,
            trainings_required=trainings,
        )
        return MultiSourceOutcome(
            result=result,
            per_k_seconds=seconds,
            importance_paths=[outcome.importance_path for outcome in ranked.values()],
        )
