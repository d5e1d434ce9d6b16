import logging
from typing import List, Sequence, Tuple

import numpy as np

from ..domain.entities.corpus import DEFAULT_ENTITY_TYPES, OUTSIDE_TAG, Corpus, LanguageProfile, Sentence, TaskKind, parse_bio
from ..domain.errors import InputValidationError
from ..domain.use_cases.corpus import IGenerateCorpusUseCase

logger = logging.getLogger(__name__)

SUBSET_COUNT = 10


def _harmonize_tag(tag: str, keep: frozenset) -> str:
    prefix, entity = parse_bio(tag)
    if entity is None or entity in keep:
        return tag
    return f"{prefix}-MISC"


def harmonize_span_labels(corpus: Corpus, keep: Sequence[str] = DEFAULT_ENTITY_TYPES) -> Corpus:
    """Fold every entity type outside `keep` into MISC."""
    if corpus.task_kind != "span":
        raise InputValidationError(f"label harmonization applies to span corpora, not {corpus.task_kind!r}")
    keep_set = frozenset(keep) | {"MISC"}
    splits = {
        name: tuple(
            Sentence(tokens=s.tokens, tags=tuple(_harmonize_tag(tag, keep_set) for tag in s.tags)) for s in sentences
        )
        for name, sentences in corpus.splits.items()
    }
    inventory: List[str] = []
    for label in corpus.label_inventory:
        mapped = _harmonize_tag(label, keep_set)
        if mapped not in inventory:
            inventory.append(mapped)
    for label in (OUTSIDE_TAG, "B-MISC", "I-MISC"):
        if label not in inventory and any(label in s.tags for sentences in splits.values() for s in sentences):
            inventory.append(label)
    return Corpus(
        language_code=corpus.language_code,
        task_kind=corpus.task_kind,
        splits=splits,
        label_inventory=tuple(inventory),
        generation_seed=corpus.generation_seed,
    )


def partition_train(size: int, seed: int) -> List[np.ndarray]:
    """Ten near-equal disjoint index subsets of range(size), fixed by seed; each subset sorted."""
    if size < SUBSET_COUNT:
        raise InputValidationError(f"subsampling needs at least {SUBSET_COUNT} training sentences, found {size}")
    order = np.random.default_rng(seed).permutation(size)
    return [np.sort(part) for part in np.array_split(order, SUBSET_COUNT)]


def subsample_train(corpus: Corpus, tenths: int, seed: int) -> Tuple[Corpus, Tuple[int, ...]]:
    """Keep the first `tenths` of the ten subsets; returns the corpus and the kept train indices in corpus order."""
    if not 1 <= tenths <= SUBSET_COUNT - 1:
        raise InputValidationError(f"tenths must be in 1..{SUBSET_COUNT - 1}, got {tenths}")
    train = corpus.split("train")
    parts = partition_train(len(train), seed)
    kept = tuple(int(i) for i in np.sort(np.concatenate(parts[:tenths])))
    return corpus.with_split("train", [train[i] for i in kept]), kept


class GenerateCorpusUseCase(IGenerateCorpusUseCase):
    def __init__(self, seed_service):
        self.seed_service = seed_service

    def execute(self, profiles: Sequence[LanguageProfile], task_kind: TaskKind, master_seed: int,
                entity_types: Sequence[str] = DEFAULT_ENTITY_TYPES) -> List[Corpus]:
        corpora = self.seed_service.generate_and_save(profiles, task_kind, master_seed, entity_types)
        logger.info("Generated %d %s corpora with master seed %d", len(corpora), task_kind, master_seed)
        return corpora
