"""Synthetic multilingual corpora sharing one latent tagging grammar.

Every language samples the same latent sentence for a given (split, index):
the same tag units and the same abstract lexemes. Languages differ only in how
lexemes are spelled, in a fixed local word-order rule and in emission noise, so
whatever structure the task has is shared across languages by construction.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ...application.domain.entities.corpus import (
    DEFAULT_ENTITY_TYPES,
    OUTSIDE_TAG,
    SPLIT_NAMES,
    UNIVERSAL_POS_TAGS,
    Corpus,
    LanguageProfile,
    Sentence,
    TaskKind,
    span_inventory,
)
from ...application.domain.errors import InputValidationError
from ...application.domain.interfaces.corpus import ICorpusRepository

logger = logging.getLogger(__name__)

MIN_UNITS = 4
MAX_UNITS = 12
MAX_SPAN_LENGTH = 3
POS_LEXEMES_PER_TAG = 24
OUTSIDE_LEXEMES = 80
ENTITY_LEXEMES = 20
AMBIGUOUS_LEXEMES = 16
AMBIGUITY_RATE = 0.2
OUTSIDE_BIAS = 2.0

# One latent lexeme-token pair: (emission slot, lexeme id). The slot is the gold tag.
Token = Tuple[str, int]
Unit = List[Token]


@dataclass(frozen=True)
class LatentGrammar:
    task_kind: str
    units: Tuple[str, ...]
    start: np.ndarray
    transitions: np.ndarray
    span_lengths: np.ndarray
    lexicon: Dict[str, np.ndarray]
    ambiguous: np.ndarray
    ambiguous_slots: Tuple[str, ...]
    share_draw: np.ndarray
    grammar_key: Tuple[int, ...]

    @property
    def lexeme_count(self) -> int:
        return len(self.share_draw)


def _zipf_choice(rng: np.random.Generator, pool: np.ndarray) -> int:
    weights = 1.0 / np.arange(1, len(pool) + 1)
    return int(pool[rng.choice(len(pool), p=weights / weights.sum())])


def build_grammar(task_kind: TaskKind, master_seed: int, grammar_seed: Optional[int] = None,
                  entity_types: Sequence[str] = DEFAULT_ENTITY_TYPES) -> LatentGrammar:
    grammar_key = (master_seed, 0) if grammar_seed is None else (master_seed, 1, grammar_seed)
    rng = np.random.default_rng(list(grammar_key))

    if task_kind == "pos":
        units = UNIVERSAL_POS_TAGS
        slots = list(units)
        sizes = {slot: POS_LEXEMES_PER_TAG for slot in slots}
    else:
        units = (OUTSIDE_TAG, *entity_types)
        slots = [OUTSIDE_TAG] + [f"{prefix}-{entity}" for entity in entity_types for prefix in ("B", "I")]
        sizes = {slot: OUTSIDE_LEXEMES if slot == OUTSIDE_TAG else ENTITY_LEXEMES for slot in slots}

    n = len(units)
    transitions = rng.dirichlet(np.full(n, 0.5), size=n)
    if task_kind == "span":
        transitions[:, 0] += OUTSIDE_BIAS
        transitions /= transitions.sum(axis=1, keepdims=True)
    start = rng.dirichlet(np.ones(n))
    span_lengths = rng.dirichlet(np.ones(MAX_SPAN_LENGTH), size=n)

    lexicon: Dict[str, np.ndarray] = {}
    next_id = 0
    for slot in slots:
        lexicon[slot] = np.arange(next_id, next_id + sizes[slot])
        next_id += sizes[slot]
    ambiguous = np.arange(next_id, next_id + AMBIGUOUS_LEXEMES)
    next_id += AMBIGUOUS_LEXEMES
    ambiguous_slots = tuple(slot for slot in slots if task_kind == "pos" or not slot.startswith("I-"))

    return LatentGrammar(
        task_kind=task_kind,
        units=tuple(units),
        start=start,
        transitions=transitions,
        span_lengths=span_lengths,
        lexicon=lexicon,
        ambiguous=ambiguous,
        ambiguous_slots=ambiguous_slots,
        share_draw=rng.random(next_id),
        grammar_key=grammar_key,
    )


def sample_latent_sentence(grammar: LatentGrammar, rng: np.random.Generator) -> List[Unit]:
    units: List[Unit] = []
    state = int(rng.choice(len(grammar.units), p=grammar.start))
    for _ in range(int(rng.integers(MIN_UNITS, MAX_UNITS + 1))):
        name = grammar.units[state]
        if grammar.task_kind == "pos" or name == OUTSIDE_TAG:
            slots = [name]
        else:
            length = 1 + int(rng.choice(MAX_SPAN_LENGTH, p=grammar.span_lengths[state]))
            slots = [f"B-{name}"] + [f"I-{name}"] * (length - 1)
        unit = []
        for slot in slots:
            if slot in grammar.ambiguous_slots and rng.random() < AMBIGUITY_RATE:
                lexeme = _zipf_choice(rng, grammar.ambiguous)
            else:
                lexeme = _zipf_choice(rng, grammar.lexicon[slot])
            unit.append((slot, lexeme))
        units.append(unit)
        state = int(rng.choice(len(grammar.units), p=grammar.transitions[state]))
    return units


class LanguageRenderer:
    """Per-language spelling, word-order rule and emission noise."""

    def __init__(self, profile: LanguageProfile, grammar: LatentGrammar):
        self.profile = profile
        self.grammar = grammar
        rng = np.random.default_rng([profile.vocab_seed, 7])
        letters = rng.choice(list("abcdefghijklmnopqrstuvwxyz"), size=3)
        self.prefix = "".join(letters) + str(profile.vocab_seed) + "x"
        self.spelling = rng.permutation(grammar.lexeme_count)
        self.order = rng.permutation(profile.reorder_window)
        self.other_slots = {slot: [s for s in grammar.lexicon if s != slot] for slot in grammar.lexicon}

    def word(self, lexeme: int) -> str:
        if self.grammar.share_draw[lexeme] < self.profile.shared_lexicon_rate:
            return f"X{lexeme}"
        return f"{self.prefix}{self.spelling[lexeme]}"

    def reorder(self, units: List[Unit]) -> List[Unit]:
        window = self.profile.reorder_window
        if window == 1:
            return units
        out: List[Unit] = []
        for start in range(0, len(units), window):
            chunk = units[start : start + window]
            out.extend(chunk if len(chunk) < window else [chunk[i] for i in self.order])
        return out

    def render(self, units: List[Unit], noise_rng: np.random.Generator) -> Sentence:
        tokens, tags = [], []
        for unit in self.reorder(units):
            for slot, lexeme in unit:
                if self.profile.noise_rate > 0 and noise_rng.random() < self.profile.noise_rate:
                    other = self.other_slots[slot][int(noise_rng.integers(len(self.other_slots[slot])))]
                    lexeme = _zipf_choice(noise_rng, self.grammar.lexicon[other])
                tokens.append(self.word(lexeme))
                tags.append(slot)
        return Sentence(tokens=tuple(tokens), tags=tuple(tags))


class SyntheticCorpusService:
    """Generates and stores suites of synthetic languages."""

    def __init__(self, corpus_repo: Optional[ICorpusRepository] = None):
        self.corpus_repo = corpus_repo

    def generate(self, profiles: Sequence[LanguageProfile], task_kind: TaskKind, master_seed: int,
                 entity_types: Sequence[str] = DEFAULT_ENTITY_TYPES) -> List[Corpus]:
        if len(profiles) < 2:
            raise InputValidationError("synthetic generation needs at least two language profiles")
        codes = [profile.language_code for profile in profiles]
        duplicates = sorted({code for code in codes if codes.count(code) > 1})
        if duplicates:
            raise InputValidationError(f"duplicate language codes: {', '.join(duplicates)}")

        grammars: Dict[Optional[int], LatentGrammar] = {}
        inventory = UNIVERSAL_POS_TAGS if task_kind == "pos" else span_inventory(entity_types)
        corpora = []
        for profile in profiles:
            if profile.grammar_seed not in grammars:
                grammars[profile.grammar_seed] = build_grammar(task_kind, master_seed, profile.grammar_seed, entity_types)
            grammar = grammars[profile.grammar_seed]
            renderer = LanguageRenderer(profile, grammar)
            splits = {}
            for split_id, split in enumerate(SPLIT_NAMES):
                sentences = []
                for idx in range(profile.split_size(split)):
                    latent_rng = np.random.default_rng([*grammar.grammar_key, split_id, idx])
                    noise_rng = np.random.default_rng([master_seed, profile.vocab_seed, split_id, idx, 1])
                    sentences.append(renderer.render(sample_latent_sentence(grammar, latent_rng), noise_rng))
                splits[split] = tuple(sentences)
            corpora.append(
                Corpus(
                    language_code=profile.language_code,
                    task_kind=task_kind,
                    splits=splits,
                    label_inventory=tuple(inventory),
                    generation_seed=master_seed,
                )
            )
            logger.info("Generated %s corpus %s: %s", task_kind, profile.language_code, corpora[-1].sizes())
        return corpora

    def generate_and_save(self, profiles: Sequence[LanguageProfile], task_kind: TaskKind, master_seed: int,
                          entity_types: Sequence[str] = DEFAULT_ENTITY_TYPES) -> List[Corpus]:
        if self.corpus_repo is None:
            raise InputValidationError("no corpus repository configured for saving")
        corpora = self.generate(profiles, task_kind, master_seed, entity_types)
        for corpus in corpora:
            self.corpus_repo.save(corpus)
        return corpora
