from .export_service import ExportService
from .seed_service import SyntheticCorpusService

__all__ = [
    "ExportService",
    "SyntheticCorpusService"
]
