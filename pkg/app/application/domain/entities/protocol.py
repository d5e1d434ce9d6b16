import hashlib
import json
from typing import Dict, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ai_engine.encoder import ModelConfig
from ai_engine.optim import DEFAULT_EPOCHS, DEFAULT_LEARNING_RATE

from ..errors import HygieneViolationError
from .corpus import TaskKind
from .importance import HeadCoordinate
from .metrics import EvalResult

SPEC_FORMAT_VERSION = "1.0"
DEFAULT_PRUNE_LIMIT = 12
DEFAULT_RANDOM_PRUNE_SEED = 42
DEFAULT_BATCH_SIZE = 16

ExperimentKind = Literal["train", "rank", "sweep", "baseline-max", "baseline-rand", "multi-source", "subsample-study"]
Setting = Literal["cross_lingual", "multi_lingual"]
Heuristic = Literal["MD", "SD", "EC"]


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    epochs: int = Field(default=DEFAULT_EPOCHS, ge=0)
    learning_rate: float = Field(default=DEFAULT_LEARNING_RATE, gt=0.0)
    batch_size: int = Field(default=DEFAULT_BATCH_SIZE, ge=1)


class ExperimentSpec(BaseModel):
    """One experiment, as read from a spec file after CLI overrides."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    format_version: str = SPEC_FORMAT_VERSION
    kind: ExperimentKind = "sweep"
    task_kind: TaskKind
    source_languages: Tuple[str, ...] = Field(min_length=1)
    target_language: str
    setting: Setting = "cross_lingual"
    encoder: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    prune_limit: int = Field(default=DEFAULT_PRUNE_LIMIT, ge=0)
    seed: int = Field(default=0, ge=0)
    random_prune_seed: int = Field(default=DEFAULT_RANDOM_PRUNE_SEED, ge=0)
    early_stop_on_drop: bool = False
    target_train_tenths: Optional[int] = Field(default=None, ge=1, le=9)
    tenths: Tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7, 8, 9)
    heuristics: Tuple[Heuristic, ...] = Field(default=("MD", "SD", "EC"), min_length=1)

    @field_validator("format_version")
    @classmethod
    def _known_major(cls, value: str) -> str:
        if value.split(".")[0] != SPEC_FORMAT_VERSION.split(".")[0]:
            raise ValueError(f"unsupported spec format_version {value!r}")
        return value

    @field_validator("tenths")
    @classmethod
    def _tenths_in_range(cls, value: Tuple[int, ...]) -> Tuple[int, ...]:
        if not value:
            raise ValueError("tenths must name at least one value")
        outside = [t for t in value if not 1 <= t <= 9]
        if outside:
            raise ValueError(f"tenths {outside} fall outside 1..9")
        return tuple(sorted(set(value)))

    @model_validator(mode="after")
    def _consistent(self) -> "ExperimentSpec":
        if len(set(self.source_languages)) != len(self.source_languages):
            raise ValueError("source_languages contains duplicates")
        if self.setting == "cross_lingual":
            if self.target_language in self.source_languages:
                raise HygieneViolationError(
                    f"cross_lingual spec lists target {self.target_language!r} among its sources, "
                    "which would train on the target's train split"
                )
            if self.target_train_tenths is not None:
                raise HygieneViolationError("cross_lingual spec references the target train split via target_train_tenths")
        config = self.encoder
        ceiling = config.num_layers * config.num_heads_per_layer - config.num_layers
        if self.prune_limit > ceiling:
            raise ValueError(f"prune_limit {self.prune_limit} exceeds L*H - L = {ceiling}")
        if self.kind == "subsample-study" and self.setting != "multi_lingual":
            raise ValueError("subsample-study requires setting=multi_lingual")
        if self.kind == "multi-source" and len(self.source_languages) < 2:
            raise ValueError("multi-source needs at least two source languages")
        return self

    def spec_hash(self) -> str:
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    @property
    def training_languages(self) -> Tuple[str, ...]:
        if self.setting == "multi_lingual" and self.target_language not in self.source_languages:
            return (*self.source_languages, self.target_language)
        return self.source_languages


class PrunePlan(BaseModel):
    model_config = ConfigDict(frozen=True)

    heads: Tuple[HeadCoordinate, ...]
    k: int = Field(ge=0)
    skipped: Tuple[HeadCoordinate, ...] = ()

    @model_validator(mode="after")
    def _length(self) -> "PrunePlan":
        if len(self.heads) != self.k:
            raise ValueError(f"plan lists {len(self.heads)} heads for k={self.k}")
        return self


class KScore(BaseModel):
    model_config = ConfigDict(frozen=True)

    k: int = Field(ge=0)
    score: float
    evaluation: EvalResult
    pruned_heads: Tuple[HeadCoordinate, ...] = ()
    skipped: Tuple[HeadCoordinate, ...] = ()


class SweepResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    spec_hash: str
    kind: ExperimentKind
    setting: Setting
    task_kind: TaskKind
    source_languages: Tuple[str, ...]
    target_language: str
    per_k_scores: Tuple[KScore, ...] = Field(min_length=1)
    best_k: int
    best_score: float
    pruned_heads: Tuple[HeadCoordinate, ...]
    ranking_provenance: str
    skipped_candidates: Tuple[HeadCoordinate, ...] = ()
    trainings: int
    stopped_early: bool = False

    @model_validator(mode="after")
    def _best_is_max(self) -> "SweepResult":
        if self.per_k_scores[0].k != 0:
            raise ValueError("per_k_scores must start with the unpruned k=0 run")
        top = max(entry.score for entry in self.per_k_scores)
        if self.best_score != top:
            raise ValueError(f"best_score {self.best_score} is not the maximum {top}")
        return self

    @property
    def unpruned_score(self) -> float:
        return self.per_k_scores[0].score


class MultiSourceResult(BaseModel):
    """FL (unpruned) and per-heuristic pruned sweeps for one multi-source spec."""

    model_config = ConfigDict(frozen=True)

    spec_hash: str
    task_kind: TaskKind
    source_languages: Tuple[str, ...]
    target_language: str
    unpruned_score: float
    sweeps: Dict[str, SweepResult]
    ec_language: Optional[str] = None
    trainings_required: Dict[str, int]


class SubsampleRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    tenths: int = Field(ge=1, le=9)
    target_train_sentences: int
    unpruned_score: float
    pruned_score: float
    best_k: int
    target_train_indices: Tuple[int, ...]


class SubsampleStudyResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    spec_hash: str
    task_kind: TaskKind
    source_languages: Tuple[str, ...]
    target_language: str
    rows: Tuple[SubsampleRow, ...]

    def peak_tenths(self) -> Tuple[int, int]:
        """Smallest tenths at which the unpruned and pruned curves reach their own maxima."""
        unpruned = max(row.unpruned_score for row in self.rows)
        pruned = max(row.pruned_score for row in self.rows)
        return (
            min(row.tenths for row in self.rows if row.unpruned_score == unpruned),
            min(row.tenths for row in self.rows if row.pruned_score == pruned),
        )
