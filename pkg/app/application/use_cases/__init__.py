from .corpus import GenerateCorpusUseCase
from .evaluation import EvaluateUseCase
from .importance import CorrelateUseCase
from .multi_source import MultiSourceUseCase
from .protocol import PruneSweepUseCase, RankPipelineUseCase, TrainUseCase
from .runner import ReportUseCase, RunExperimentUseCase, SubsampleStudyUseCase

__all__ = [
    "GenerateCorpusUseCase",
    "EvaluateUseCase",
    "CorrelateUseCase",
    "MultiSourceUseCase",
    "PruneSweepUseCase",
    "RankPipelineUseCase",
    "TrainUseCase",
    "ReportUseCase",
    "RunExperimentUseCase",
    "SubsampleStudyUseCase",
]
