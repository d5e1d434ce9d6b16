import json
import logging
import os
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import ValidationError

from ai_engine import encoder as codec
from ai_engine.autodiff import ShapeError
from ai_engine.encoder import EncoderModel, HeadMask

from ...application.domain.entities.importance import IMPORTANCE_FORMAT_VERSION, CorrelationTable, HeadImportanceMatrix
from ...application.domain.errors import ArtifactFormatError, MissingArtifactError
from ...application.domain.interfaces.artifacts import IArtifactRepository
from ..utils.export_service import ExportService

logger = logging.getLogger(__name__)

MASK_FORMAT_VERSION = "1.0"


def _same_major(found: str, expected: str) -> bool:
    return str(found).split(".")[0] == expected.split(".")[0]


def _write_atomic(path: Path, data: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    staging = path.with_name(path.name + ".tmp")
    staging.write_text(data, encoding="utf-8")
    os.replace(staging, path)
    return path


def importance_document(matrix: HeadImportanceMatrix) -> dict:
    """The on-disk importance schema: scores flattened row-major."""
    return {
        "format_version": IMPORTANCE_FORMAT_VERSION,
        "language_code": matrix.language_code,
        "task_kind": matrix.task_kind,
        "model_config_hash": matrix.model_config_hash,
        "L": matrix.num_layers,
        "H": matrix.num_heads,
        "scores": [score for row in matrix.scores for score in row],
        "dev_sentence_count": matrix.dev_sentence_count,
        "seed": matrix.seed,
        "epochs": matrix.epochs,
        "degenerate": matrix.degenerate,
    }


class ArtifactRepository(IArtifactRepository):
    def __init__(self, artifacts_dir: Path):
        self.artifacts_dir = Path(artifacts_dir)

    def relative(self, path: Path) -> str:
        """Path as recorded in logs: relative to the artifact root when inside it."""
        path = Path(path)
        try:
            return path.relative_to(self.artifacts_dir).as_posix()
        except ValueError:
            return path.as_posix()

    def resolve(self, name: str) -> Path:
        path = Path(name)
        return path if path.is_absolute() else self.artifacts_dir / path

    def _read_json(self, path: Path) -> dict:
        try:
            return json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise MissingArtifactError(f"artifact {path} does not exist") from None
        except json.JSONDecodeError as exc:
            raise ArtifactFormatError(f"{path}: not valid JSON ({exc})") from None

    def importance_path(self, task_kind: str, language_code: str, key: str) -> Path:
        return self.artifacts_dir / "importance" / task_kind / language_code / f"{key}.json"

    def save_importance(self, matrix: HeadImportanceMatrix, path: Path) -> Path:
        text = json.dumps(importance_document(matrix), indent=2, sort_keys=True) + "\n"
        _write_atomic(Path(path), text)
        logger.info("Wrote importance matrix for %s to %s", matrix.language_code, path)
        return Path(path)

    def load_importance(self, path: Path) -> HeadImportanceMatrix:
        document = self._read_json(path)
        if not _same_major(document.get("format_version", ""), IMPORTANCE_FORMAT_VERSION):
            raise ArtifactFormatError(f"{path}: unsupported importance format_version {document.get('format_version')!r}")
        try:
            num_layers, num_heads = int(document["L"]), int(document["H"])
            flat = np.asarray(document["scores"], dtype=np.float64)
            if flat.size != num_layers * num_heads:
                raise ArtifactFormatError(f"{path}: {flat.size} scores for a {num_layers}x{num_heads} matrix")
            return HeadImportanceMatrix(
                scores=tuple(tuple(float(v) for v in row) for row in flat.reshape(num_layers, num_heads)),
                language_code=document["language_code"],
                task_kind=document["task_kind"],
                model_config_hash=document["model_config_hash"],
                dev_sentence_count=document["dev_sentence_count"],
                seed=document.get("seed", 0),
                epochs=document.get("epochs", 3),
                degenerate=document.get("degenerate", False),
            )
        except (KeyError, ValueError, ValidationError) as exc:
            raise ArtifactFormatError(f"{path}: malformed importance file ({exc})") from None

    def checkpoint_path(self, task_kind: str, language_code: str, key: str) -> Path:
        return self.artifacts_dir / "checkpoints" / task_kind / language_code / f"{key}.ckpt"

    def save_checkpoint(self, model: EncoderModel, path: Path) -> Path:
        return codec.save_checkpoint(model, path)

    def load_checkpoint(self, path: Path) -> EncoderModel:
        try:
            return codec.load_checkpoint(path)
        except FileNotFoundError:
            raise MissingArtifactError(f"checkpoint {path} does not exist") from None
        except (ValueError, ShapeError, KeyError) as exc:
            raise ArtifactFormatError(f"{path}: {exc}") from None

    def mask_path(self, task_kind: str, spec_hash: str, kind: str) -> Path:
        return self.artifacts_dir / "masks" / task_kind / f"{spec_hash}.{kind}.json"

    def save_mask(self, mask: HeadMask, path: Path) -> Path:
        num_layers, num_heads = mask.shape
        document = {
            "format_version": MASK_FORMAT_VERSION,
            "L": num_layers,
            "H": num_heads,
            "pruned": [list(head) for head in mask.pruned_heads()],
        }
        return _write_atomic(Path(path), json.dumps(document, sort_keys=True) + "\n")

    def load_mask(self, path: Path) -> HeadMask:
        document = self._read_json(path)
        if not _same_major(document.get("format_version", ""), MASK_FORMAT_VERSION):
            raise ArtifactFormatError(f"{path}: unsupported mask format_version {document.get('format_version')!r}")
        try:
            pruned = [(int(layer), int(head)) for layer, head in document["pruned"]]
            return HeadMask.from_pruned(int(document["L"]), int(document["H"]), pruned)
        except (KeyError, TypeError, ValueError) as exc:
            raise ArtifactFormatError(f"{path}: malformed mask file ({exc})") from None

    def correlation_path(self, task_kind: str) -> Path:
        return self.artifacts_dir / "correlation" / f"{task_kind}.csv"

    def save_correlation(self, table: CorrelationTable, path: Optional[Path] = None) -> Path:
        path = Path(path) if path is not None else self.correlation_path(table.task_kind)
        _write_atomic(path, ExportService.correlation_csv(table))
        logger.info("Wrote %dx%d correlation table to %s", len(table.languages), len(table.languages), path)
        return path

    def load_correlation(self, path: Path) -> CorrelationTable:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except FileNotFoundError:
            raise MissingArtifactError(f"correlation table {path} does not exist") from None
        return ExportService.parse_correlation_csv(text)

    def save_text(self, relative_path: str, text: str) -> Path:
        return _write_atomic(self.artifacts_dir / relative_path, text)
