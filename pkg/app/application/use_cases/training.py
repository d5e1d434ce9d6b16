"""Assembling training data and the isolated train-then-score job the sweeps run per k."""

import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

from ai_engine.batching import Example, ExampleKey, LabelVocabulary, SequentialLoader, Vocabulary
from ai_engine.encoder import ConfigError, EncoderModel, HeadMask, ModelConfig, build_model
from ai_engine.train_model import NonFiniteLossError, fine_tune, predict

from ..domain.entities.corpus import Corpus, Sentence, TaskKind
from ..domain.entities.importance import HeadCoordinate
from ..domain.entities.metrics import EvalResult
from ..domain.entities.protocol import TrainConfig
from ..domain.errors import InputValidationError, NumericFailureError
from .evaluation import evaluate

logger = logging.getLogger(__name__)


def corpus_examples(corpus: Corpus, split: str, indices: Optional[Sequence[int]] = None) -> List[Example]:
    sentences = corpus.split(split)
    chosen = range(len(sentences)) if indices is None else indices
    return [
        Example(key=(corpus.language_code, split, int(i)), tokens=sentences[i].tokens, tags=sentences[i].tags)
        for i in chosen
    ]


def label_space(corpora: Sequence[Corpus]) -> LabelVocabulary:
    return LabelVocabulary.build(corpus.label_inventory for corpus in corpora)


def resolve_config(config: ModelConfig, vocab: Vocabulary, labels: LabelVocabulary) -> ModelConfig:
    resolved = config.resolved(vocab_size=len(vocab), num_labels=len(labels))
    problems = resolved.violations()
    if problems:
        raise InputValidationError(str(ConfigError(problems)))
    return resolved


def check_lengths(config: ModelConfig, examples: Sequence[Example]) -> None:
    longest = max((len(example.tokens) for example in examples), default=0)
    if longest > config.max_sequence_length:
        raise InputValidationError(
            f"a {longest}-token sentence exceeds max_sequence_length {config.max_sequence_length}"
        )


def train_model(config: ModelConfig, train_config: TrainConfig, loader: SequentialLoader,
                head_mask: Optional[HeadMask] = None) -> EncoderModel:
    model = build_model(config)
    try:
        fine_tune(model, loader, epochs=train_config.epochs, learning_rate=train_config.learning_rate,
                  head_mask=head_mask)
    except NonFiniteLossError as exc:
        raise NumericFailureError(str(exc)) from exc
    return model


def score_model(model: EncoderModel, examples: Sequence[Example], vocab: Vocabulary, labels: LabelVocabulary,
                batch_size: int, task_kind: TaskKind, head_mask: Optional[HeadMask] = None) -> EvalResult:
    loader = SequentialLoader(examples, vocab, labels, batch_size)
    predictions = [labels.decode(ids) for ids in predict(model, loader, head_mask)]
    gold = [Sentence(tokens=example.tokens, tags=example.tags) for example in examples]
    return evaluate(task_kind, gold, predictions)


@dataclass(frozen=True)
class ScoringJob:
    """Everything one fresh fine-tune needs; picklable for worker processes."""

    k: int
    config: ModelConfig
    train_config: TrainConfig
    task_kind: TaskKind
    vocab: Vocabulary
    labels: LabelVocabulary
    train_examples: Tuple[Example, ...]
    eval_examples: Tuple[Example, ...]
    pruned_heads: Tuple[HeadCoordinate, ...] = ()


@dataclass
class JobOutcome:
    k: int
    evaluation: EvalResult
    seconds: float
    served: List[ExampleKey] = field(default_factory=list)


def train_and_score(job: ScoringJob) -> JobOutcome:
    started = time.perf_counter()
    mask = HeadMask.from_pruned(job.config.num_layers, job.config.num_heads_per_layer, job.pruned_heads)
    loader = SequentialLoader(job.train_examples, job.vocab, job.labels, job.train_config.batch_size)
    model = train_model(job.config, job.train_config, loader, mask)
    evaluation = score_model(model, job.eval_examples, job.vocab, job.labels, job.train_config.batch_size,
                             job.task_kind, mask)
    return JobOutcome(k=job.k, evaluation=evaluation, seconds=time.perf_counter() - started, served=loader.served)
