from .artifacts import ArtifactRepository
from .corpus import CorpusRepository
from .results import ResultsRepository

__all__ = [
    "ArtifactRepository",
    "CorpusRepository",
    "ResultsRepository",
]
