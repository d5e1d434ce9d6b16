from .artifacts import IArtifactRepository
from .corpus import ICorpusRepository
from .results import IResultsRepository

__all__ = ["IArtifactRepository", "ICorpusRepository", "IResultsRepository"]
