from .corpus import (
    DEFAULT_ENTITY_TYPES,
    SPLIT_NAMES,
    UNIVERSAL_POS_TAGS,
    Corpus,
    LanguageProfile,
    Sentence,
    TaskKind,
)
from .importance import CorrelationResult, CorrelationTable, HeadCoordinate, HeadImportanceMatrix, HeadRanking
from .metrics import EvalResult
from .protocol import (
    ExperimentSpec,
    KScore,
    MultiSourceResult,
    PrunePlan,
    SubsampleRow,
    SubsampleStudyResult,
    SweepResult,
    TrainConfig,
)
from .runner import ReportSpec, ResultRecord, RunRecord

__all__ = [
    "DEFAULT_ENTITY_TYPES",
    "SPLIT_NAMES",
    "UNIVERSAL_POS_TAGS",
    "Corpus",
    "LanguageProfile",
    "Sentence",
    "TaskKind",
    "CorrelationResult",
    "CorrelationTable",
    "HeadCoordinate",
    "HeadImportanceMatrix",
    "HeadRanking",
    "EvalResult",
    "ExperimentSpec",
    "KScore",
    "MultiSourceResult",
    "PrunePlan",
    "SubsampleRow",
    "SubsampleStudyResult",
    "SweepResult",
    "TrainConfig",
    "ReportSpec",
    "ResultRecord",
    "RunRecord",
]
