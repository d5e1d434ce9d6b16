from datetime import datetime, timezone
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .corpus import TaskKind

IMPORTANCE_FORMAT_VERSION = "1.0"
ROW_MAJOR_TIES = "row-major"

HeadCoordinate = Tuple[int, int]


class HeadImportanceMatrix(BaseModel):
    """Layer x head importance scores scaled to [0, 1], with provenance."""

    model_config = ConfigDict(frozen=True, protected_namespaces=())

    scores: Tuple[Tuple[float, ...], ...]
    language_code: str
    task_kind: TaskKind
    model_config_hash: str
    dev_sentence_count: int = Field(ge=0)
    seed: int = 0
    epochs: int = 3
    degenerate: bool = False
    created_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc), exclude=True)

    @model_validator(mode="after")
    def _scores_valid(self) -> "HeadImportanceMatrix":
        if not self.scores or not self.scores[0]:
            raise ValueError("importance matrix must be non-empty")
        width = len(self.scores[0])
        if any(len(row) != width for row in self.scores):
            raise ValueError("importance matrix rows differ in length")
        values = np.asarray(self.scores, dtype=np.float64)
        if not np.all(np.isfinite(values)) or values.min() < 0.0 or values.max() > 1.0:
            raise ValueError("importance scores must lie in [0, 1]")
        return self

    @property
    def num_layers(self) -> int:
        return len(self.scores)

    @property
    def num_heads(self) -> int:
        return len(self.scores[0])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.num_layers, self.num_heads

    def as_array(self) -> np.ndarray:
        return np.asarray(self.scores, dtype=np.float64)


class HeadRanking(BaseModel):
    """Every head coordinate, least important first."""

    model_config = ConfigDict(frozen=True)

    order: Tuple[HeadCoordinate, ...]
    num_layers: int = Field(ge=1)
    num_heads: int = Field(ge=1)
    tie_policy_tag: str = ROW_MAJOR_TIES
    provenance: str = ""

    @model_validator(mode="after")
    def _is_permutation(self) -> "HeadRanking":
        expected = {(l, h) for l in range(self.num_layers) for h in range(self.num_heads)}
        if len(self.order) != len(expected) or set(self.order) != expected:
            raise ValueError(f"ranking order is not a permutation of the {self.num_layers}x{self.num_heads} heads")
        return self

    def descending(self) -> List[HeadCoordinate]:
        return list(reversed(self.order))


class CorrelationResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    rho: float = Field(ge=-1.0, le=1.0)
    pair: Tuple[str, str]
    n: int = Field(ge=1)


class CorrelationTable(BaseModel):
    """Symmetric pairwise rank correlations, indexed by language code."""

    model_config = ConfigDict(frozen=True)

    task_kind: TaskKind
    languages: Tuple[str, ...]
    values: Tuple[Tuple[float, ...], ...]
    heads_compared: int = Field(ge=1)

    @model_validator(mode="after")
    def _square(self) -> "CorrelationTable":
        n = len(self.languages)
        if len(self.values) != n or any(len(row) != n for row in self.values):
            raise ValueError("correlation table must be square over its languages")
        return self

    def rho(self, a: str, b: str) -> float:
        return self.values[self.languages.index(a)][self.languages.index(b)]

    def off_diagonal(self) -> List[CorrelationResult]:
        results = []
        for i, a in enumerate(self.languages):
            for j in range(i + 1, len(self.languages)):
                b = self.languages[j]
                results.append(CorrelationResult(rho=self.values[i][j], pair=(a, b), n=self.heads_compared))
        return results
