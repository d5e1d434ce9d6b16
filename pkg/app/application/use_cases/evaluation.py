"""CoNLL-style scoring: exact-match span F1 for BIO tasks, micro token F1 for POS."""

import logging
from pathlib import Path
from typing import Optional, Sequence, Set, Tuple

from ..domain.entities.corpus import Sentence, TaskKind, parse_bio
from ..domain.entities.metrics import EvalResult
from ..domain.errors import InputValidationError
from ..domain.interfaces.corpus import ICorpusRepository
from ..domain.use_cases.evaluation import IEvaluateUseCase

logger = logging.getLogger(__name__)

Span = Tuple[int, int, str]


def extract_spans(tags: Sequence[str]) -> Set[Span]:
    """Maximal spans as (start, end_exclusive, type). An I-X that cannot continue the open span starts a new one."""
    spans: Set[Span] = set()
    start: Optional[int] = None
    current: Optional[str] = None
    for i, tag in enumerate(tags):
        try:
            prefix, entity = parse_bio(tag)
        except ValueError as exc:
            raise InputValidationError(str(exc)) from None
        if prefix == "I" and entity == current:
            continue
        if current is not None:
            spans.add((start, i, current))
        start, current = (i, entity) if entity is not None else (None, None)
    if current is not None:
        spans.add((start, len(tags), current))
    return spans


def _check_aligned(gold: Sequence[Sentence], predicted: Sequence[Sequence[str]]) -> None:
    if len(gold) != len(predicted):
        raise InputValidationError(f"{len(gold)} gold sentences but {len(predicted)} predictions")
    for idx, (sentence, tags) in enumerate(zip(gold, predicted)):
        if len(sentence.tags) != len(tags):
            raise InputValidationError(f"sentence {idx}: {len(sentence.tags)} gold tags but {len(tags)} predicted")


def span_f1(gold: Sequence[Sentence], predicted: Sequence[Sequence[str]]) -> EvalResult:
    _check_aligned(gold, predicted)
    correct = found = expected = 0
    for sentence, tags in zip(gold, predicted):
        gold_spans = extract_spans(sentence.tags)
        pred_spans = extract_spans(tags)
        correct += len(gold_spans & pred_spans)
        found += len(pred_spans)
        expected += len(gold_spans)
    return EvalResult.from_counts(correct, found, expected, "span")


def token_f1(gold: Sequence[Sentence], predicted: Sequence[Sequence[str]], task_kind: TaskKind = "pos") -> EvalResult:
    """Micro F1 over tokens. Every token carries exactly one gold and one predicted label, so this equals accuracy."""
    _check_aligned(gold, predicted)
    correct = total = 0
    for sentence, tags in zip(gold, predicted):
        correct += sum(g == p for g, p in zip(sentence.tags, tags))
        total += len(tags)
    return EvalResult.from_counts(correct, total, total, task_kind)


def evaluate(task_kind: TaskKind, gold: Sequence[Sentence], predicted: Sequence[Sequence[str]]) -> EvalResult:
    if task_kind == "span":
        return span_f1(gold, predicted)
    return token_f1(gold, predicted, task_kind)


class EvaluateUseCase(IEvaluateUseCase):
    """Scores a prediction file against a gold file, both two-column CoNLL."""

    def __init__(self, corpus_repo: ICorpusRepository):
        self.corpus_repo = corpus_repo

    def execute(self, gold_path: Path, predicted_path: Path, task_kind: TaskKind) -> EvalResult:
        gold, _ = self.corpus_repo.load_conll(gold_path, task_kind, split="test")
        predicted, repairs = self.corpus_repo.load_conll(predicted_path, task_kind, split="test")
        gold_sentences, predicted_sentences = gold.split("test"), predicted.split("test")
        for idx, (g, p) in enumerate(zip(gold_sentences, predicted_sentences)):
            if g.tokens != p.tokens:
                raise InputValidationError(f"sentence {idx}: prediction tokens differ from gold tokens")
        if repairs:
            logger.warning("Scoring %s with %d repaired prediction tag(s)", predicted_path, repairs)
        return evaluate(task_kind, gold_sentences, [s.tags for s in predicted_sentences])
