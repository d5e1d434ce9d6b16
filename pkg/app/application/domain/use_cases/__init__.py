from .corpus import IGenerateCorpusUseCase
from .evaluation import IEvaluateUseCase
from .importance import ICorrelateUseCase
from .multi_source import IMultiSourceUseCase
from .protocol import IPruneSweepUseCase, IRankPipelineUseCase, ITrainUseCase
from .runner import IReportUseCase, IRunExperimentUseCase, ISubsampleStudyUseCase

__all__ = [
    "IGenerateCorpusUseCase",
    "IEvaluateUseCase",
    "ICorrelateUseCase",
    "IMultiSourceUseCase",
    "IPruneSweepUseCase",
    "IRankPipelineUseCase",
    "ITrainUseCase",
    "IReportUseCase",
    "IRunExperimentUseCase",
    "ISubsampleStudyUseCase",
]
