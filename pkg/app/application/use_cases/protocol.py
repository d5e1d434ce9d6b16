import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from ai_engine.batching import Example, ExampleKey, LabelVocabulary, SequentialLoader, Vocabulary
from ai_engine.encoder import ModelConfig
from ai_engine.train_model import accumulate_head_gradients

from ..domain.entities.corpus import Corpus
from ..domain.entities.importance import HeadCoordinate, HeadImportanceMatrix, HeadRanking
from ..domain.entities.metrics import EvalResult
from ..domain.entities.protocol import ExperimentSpec, KScore, PrunePlan, SweepResult
from ..domain.errors import HygieneViolationError, InputValidationError, MissingArtifactError
from ..domain.interfaces.artifacts import IArtifactRepository
from ..domain.interfaces.corpus import ICorpusRepository
from ..domain.use_cases.protocol import IPruneSweepUseCase, IRankPipelineUseCase, ITrainUseCase
from .corpus import subsample_train
from .importance import normalize_scores, rank_heads
from .multi_source import merge_rankings_md
from .training import (
    JobOutcome,
    ScoringJob,
    check_lengths,
    corpus_examples,
    label_space,
    resolve_config,
    score_model,
    train_and_score,
    train_model,
)

logger = logging.getLogger(__name__)


def plan_prefixes(order: Sequence[HeadCoordinate], num_layers: int, num_heads: int, limit: int) -> List[PrunePlan]:
    """Plans for k = 0..limit taken from the front of `order`, skipping any head that would empty its layer."""
    active = [num_heads] * num_layers
    chosen: List[HeadCoordinate] = []
    skipped: List[HeadCoordinate] = []
    plans = [PrunePlan(heads=(), k=0)]
    for layer, head in order:
        if len(chosen) == limit:
            break
        if active[layer] == 1:
            logger.warning("Skipping head (%d, %d): pruning it would leave layer %d without heads", layer, head, layer)
            skipped.append((layer, head))
            continue
        active[layer] -= 1
        chosen.append((layer, head))
        plans.append(PrunePlan(heads=tuple(chosen), k=len(chosen), skipped=tuple(skipped)))
    if len(chosen) < limit:
        raise InputValidationError(f"only {len(chosen)} heads can be pruned without emptying a layer; limit is {limit}")
    return plans


def random_order(num_layers: int, num_heads: int, seed: int) -> List[HeadCoordinate]:
    """Uniform draw without replacement. Draws that would empty a layer are dropped later by plan_prefixes,
    which is the same as rejecting and redrawing since a layer's head count only falls."""
    permutation = np.random.default_rng(seed).permutation(num_layers * num_heads)
    return [(int(i) // num_heads, int(i) % num_heads) for i in permutation]


@dataclass(frozen=True)
class ExperimentData:
    config: ModelConfig
    vocab: Vocabulary
    labels: LabelVocabulary
    train_examples: Tuple[Example, ...]
    eval_examples: Tuple[Example, ...]


def _require(corpus: Corpus, split: str) -> None:
    if not corpus.has_split(split):
        raise MissingArtifactError(f"{corpus.task_kind} corpus {corpus.language_code} has no {split} split")


def prepare_data(spec: ExperimentSpec, corpus_repo: ICorpusRepository) -> ExperimentData:
    """Training set is the training languages' train splits in listed order.

    Multi-lingual runs read the target once, subsampled when target_train_tenths is set, even if it is also a source.
    """
    sources = [corpus_repo.get(spec.task_kind, code) for code in spec.source_languages]
    target = corpus_repo.get(spec.task_kind, spec.target_language)
    _require(target, "test")
    by_code = {corpus.language_code: corpus for corpus in (*sources, target)}

    train_examples: List[Example] = []
    for code in spec.training_languages:
        corpus = by_code[code]
        _require(corpus, "train")
        indices = None
        if code == spec.target_language and spec.target_train_tenths is not None:
            _, indices = subsample_train(corpus, spec.target_train_tenths, spec.seed)
        train_examples.extend(corpus_examples(corpus, "train", indices))

    vocab = Vocabulary.build(train_examples)
    labels = label_space([*sources, target])
    config = resolve_config(spec.encoder, vocab, labels).model_copy(update={"seed": spec.seed})
    eval_examples = corpus_examples(target, "test")
    check_lengths(config, train_examples + eval_examples)
    return ExperimentData(
        config=config,
        vocab=vocab,
        labels=labels,
        train_examples=tuple(train_examples),
        eval_examples=tuple(eval_examples),
    )


@dataclass
class RankOutcome:
    matrix: HeadImportanceMatrix
    importance_path: str
    checkpoint_path: str
    reused: bool = False


class RankPipelineUseCase(IRankPipelineUseCase):
    """Fine-tune on one source language, then rank its heads by gate gradients on its dev split."""

    def __init__(self, corpus_repo: ICorpusRepository, artifact_repo: IArtifactRepository):
        self.corpus_repo = corpus_repo
        self.artifact_repo = artifact_repo

    def _artifact_key(self, spec: ExperimentSpec, corpus: Corpus, config: ModelConfig) -> str:
        identity = {
            "config": config.model_dump(mode="json"),
            "train": spec.train.model_dump(mode="json"),
            "language": corpus.language_code,
            "generation_seed": corpus.generation_seed,
            "sizes": corpus.sizes(),
            "content": corpus.content_digest(("train", "dev")),
        }
        digest = hashlib.sha256(json.dumps(identity, sort_keys=True).encode("utf-8")).hexdigest()
        return digest[:16]

    def execute(self, spec: ExperimentSpec, language_code: str, force: bool = False) -> RankOutcome:
        corpus = self.corpus_repo.get(spec.task_kind, language_code)
        _require(corpus, "train")
        _require(corpus, "dev")

        train_examples = corpus_examples(corpus, "train")
        vocab = Vocabulary.build(train_examples)
        labels = label_space([corpus])
        config = resolve_config(spec.encoder, vocab, labels).model_copy(update={"seed": spec.seed})
        check_lengths(config, train_examples + corpus_examples(corpus, "dev"))

        key = self._artifact_key(spec, corpus, config)
        importance_path = self.artifact_repo.importance_path(spec.task_kind, language_code, key)
        checkpoint_path = self.artifact_repo.checkpoint_path(spec.task_kind, language_code, key)
        if not force and importance_path.exists() and checkpoint_path.exists():
            logger.info("Reusing importance for %s from %s", language_code, importance_path)
            return RankOutcome(
                matrix=self.artifact_repo.load_importance(importance_path),
                importance_path=self.artifact_repo.relative(importance_path),
                checkpoint_path=self.artifact_repo.relative(checkpoint_path),
                reused=True,
            )

        if spec.train.epochs == 0:
            logger.warning("epochs=0: ranking heads of an untrained model for %s", language_code)
        logger.info("Fine-tuning %s on %d %s sentences", language_code, len(train_examples), spec.task_kind)
        loader = SequentialLoader(train_examples, vocab, labels, spec.train.batch_size)
        model = train_model(config, spec.train, loader)
        self.artifact_repo.save_checkpoint(model, checkpoint_path)

        dev_examples = corpus_examples(corpus, "dev")
        dev_loader = SequentialLoader(dev_examples, vocab, labels, spec.train.batch_size)
        raw = accumulate_head_gradients(model, dev_loader)
        matrix = normalize_scores(
            raw,
            language_code=language_code,
            task_kind=spec.task_kind,
            model_config_hash=config.config_hash(),
            dev_sentence_count=len(dev_examples),
            seed=spec.seed,
            epochs=spec.train.epochs,
        )
        self.artifact_repo.save_importance(matrix, importance_path)
        return RankOutcome(
            matrix=matrix,
            importance_path=self.artifact_repo.relative(importance_path),
            checkpoint_path=self.artifact_repo.relative(checkpoint_path),
        )

    def rank_sources(self, spec: ExperimentSpec, force: bool = False) -> Tuple[HeadRanking, Dict[str, RankOutcome]]:
        """Ranking used to prune: the single source's, or the rank-merge of several sources."""
        outcomes = {code: self.execute(spec, code, force) for code in spec.source_languages}
        matrices = [outcome.matrix for outcome in outcomes.values()]
        ranking = rank_heads(matrices[0]) if len(matrices) == 1 else merge_rankings_md(matrices)
        return ranking, outcomes


@dataclass
class SweepOutcome:
    result: SweepResult
    per_k_seconds: List[float] = field(default_factory=list)
    served: Set[ExampleKey] = field(default_factory=set)

    def target_train_indices(self, target: str) -> Tuple[int, ...]:
        return tuple(sorted(idx for lang, split, idx in self.served if lang == target and split == "train"))


class PruneSweepUseCase(IPruneSweepUseCase):
    """Fresh fine-tune per k with the k lowest-ranked heads masked, scored on the target test split."""

    def __init__(self, corpus_repo: ICorpusRepository, max_workers: int = 1):
        self.corpus_repo = corpus_repo
        self.max_workers = max_workers

    def execute(self, spec: ExperimentSpec, ranking: HeadRanking, kind: str = "sweep") -> SweepOutcome:
        return self.run_order(spec, ranking.order, ranking.provenance, kind)

    def baseline_max_prune(self, spec: ExperimentSpec, ranking: HeadRanking) -> SweepOutcome:
        return self.run_order(spec, ranking.descending(), f"max:{ranking.provenance}", "baseline-max")

    def baseline_random_prune(self, spec: ExperimentSpec, seed: Optional[int] = None) -> SweepOutcome:
        seed = spec.random_prune_seed if seed is None else seed
        config = spec.encoder
        order = random_order(config.num_layers, config.num_heads_per_layer, seed)
        return self.run_order(spec, order, f"random:seed={seed}", "baseline-rand")

    def run_order(self, spec: ExperimentSpec, order: Sequence[HeadCoordinate], provenance: str, kind: str) -> SweepOutcome:
        config = spec.encoder
        if len(order) != config.total_heads:
            raise InputValidationError(f"ranking covers {len(order)} heads, model has {config.total_heads}")
        plans = plan_prefixes(order, config.num_layers, config.num_heads_per_layer, spec.prune_limit)
        data = prepare_data(spec, self.corpus_repo)
        jobs = [
            ScoringJob(
                k=plan.k,
                config=data.config,
                train_config=spec.train,
                task_kind=spec.task_kind,
                vocab=data.vocab,
                labels=data.labels,
                train_examples=data.train_examples,
                eval_examples=data.eval_examples,
                pruned_heads=plan.heads,
            )
            for plan in plans
        ]
        logger.info("%s %s -> %s (%s): %d trainings, provenance %s", kind, "+".join(spec.source_languages),
                    spec.target_language, spec.setting, len(jobs), provenance)
        outcomes = self._run_jobs(jobs, spec.early_stop_on_drop)

        served: Set[ExampleKey] = set()
        for outcome in outcomes:
            served.update(outcome.served)
        if spec.setting == "cross_lingual":
            leaked = [key for key in served if key[0] == spec.target_language and key[1] == "train"]
            if leaked:
                raise HygieneViolationError(f"{len(leaked)} target train sentences reached a cross-lingual training batch")

        scores = []
        for outcome in outcomes:
            plan = plans[outcome.k]
            scores.append(KScore(k=outcome.k, score=outcome.evaluation.f1, evaluation=outcome.evaluation,
                                 pruned_heads=plan.heads, skipped=plan.skipped))
        best = scores[0]
        for entry in scores[1:]:
            if entry.score > best.score:
                best = entry
        result = SweepResult(
            spec_hash=spec.spec_hash(),
            kind=kind,
            setting=spec.setting,
            task_kind=spec.task_kind,
            source_languages=spec.source_languages,
            target_language=spec.target_language,
            per_k_scores=tuple(scores),
            best_k=best.k,
            best_score=best.score,
            pruned_heads=best.pruned_heads,
            ranking_provenance=provenance,
            skipped_candidates=scores[-1].skipped,
            trainings=len(outcomes),
            stopped_early=len(outcomes) < len(jobs),
        )
        logger.info("Best k=%d score=%.4f (unpruned %.4f)", result.best_k, result.best_score, result.unpruned_score)
        return SweepOutcome(result=result, per_k_seconds=[o.seconds for o in outcomes], served=served)

    def _run_jobs(self, jobs: List[ScoringJob], early_stop: bool) -> List[JobOutcome]:
        if early_stop or self.max_workers <= 1 or len(jobs) == 1:
            outcomes: List[JobOutcome] = []
            for job in jobs:
                outcome = train_and_score(job)
                outcomes.append(outcome)
                logger.info("k=%d score=%.4f (%.1fs)", outcome.k, outcome.evaluation.f1, outcome.seconds)
                if early_stop and len(outcomes) > 1 and outcome.evaluation.f1 < outcomes[-2].evaluation.f1:
                    logger.info("Score dropped at k=%d; stopping early", outcome.k)
                    break
            return outcomes
        with ProcessPoolExecutor(max_workers=self.max_workers) as pool:
            outcomes = list(pool.map(train_and_score, jobs))
        for outcome in outcomes:
            logger.info("k=%d score=%.4f (%.1fs)", outcome.k, outcome.evaluation.f1, outcome.seconds)
        return outcomes


@dataclass
class TrainOutcome:
    evaluation: EvalResult
    checkpoint_path: str


class TrainUseCase(ITrainUseCase):
    """Fine-tune on the spec's training languages without pruning and score on the target test split."""

    def __init__(self, corpus_repo: ICorpusRepository, artifact_repo: IArtifactRepository):
        self.corpus_repo = corpus_repo
        self.artifact_repo = artifact_repo

    def execute(self, spec: ExperimentSpec, force: bool = False) -> TrainOutcome:
        data = prepare_data(spec, self.corpus_repo)
        path = self.artifact_repo.checkpoint_path(spec.task_kind, "+".join(spec.training_languages), spec.spec_hash())
        loader = SequentialLoader(data.train_examples, data.vocab, data.labels, spec.train.batch_size)
        if not force and path.exists():
            logger.info("Reusing checkpoint %s", path)
            model = self.artifact_repo.load_checkpoint(path)
        else:
            model = train_model(data.config, spec.train, loader)
            if spec.setting == "cross_lingual" and any(
                key[0] == spec.target_language and key[1] == "train" for key in loader.served
            ):
                raise HygieneViolationError("target train sentences reached a cross-lingual training batch")
            self.artifact_repo.save_checkpoint(model, path)
        evaluation = score_model(model, data.eval_examples, data.vocab, data.labels, spec.train.batch_size,
                                 spec.task_kind)
        logger.info("%s -> %s: F1 %.4f on %d test sentences", "+".join(spec.training_languages),
                    spec.target_language, evaluation.f1, len(data.eval_examples))
        return TrainOutcome(evaluation=evaluation, checkpoint_path=self.artifact_repo.relative(path))
