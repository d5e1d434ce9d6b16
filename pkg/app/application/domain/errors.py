"""Toolkit exception hierarchy; each class carries the CLI exit code it maps to."""

from typing import Optional


class ToolkitError(Exception):
    exit_code = 1


class InputValidationError(ToolkitError):
    exit_code = 2


class CorpusFormatError(InputValidationError):
    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(f"{location}{message}")


class ArtifactFormatError(InputValidationError):
    pass


class HygieneViolationError(InputValidationError):
    """A cross-lingual run would read the target language's training split."""


class IdempotenceError(InputValidationError):
    def __init__(self, spec_hash: str):
        self.spec_hash = spec_hash
        super().__init__(f"spec {spec_hash} is already recorded in the results log; pass --force to rerun")


class MissingArtifactError(ToolkitError):
    exit_code = 3


class NumericFailureError(ToolkitError):
    exit_code = 4
