"""Spec loading and override rules shared by the command handlers."""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional

from ai_engine.encoder import ModelConfig

from ...domain.entities.protocol import ExperimentSpec
from ...domain.errors import InputValidationError, MissingArtifactError
from ....infrastructure.config.settings import Settings

logger = logging.getLogger(__name__)


def read_json(path: Path) -> Dict[str, Any]:
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise MissingArtifactError(f"{path} does not exist") from None
    except json.JSONDecodeError as exc:
        raise InputValidationError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(document, dict):
        raise InputValidationError(f"{path}: expected a JSON object")
    return document


def load_spec(path: Path, kind: str, settings: Settings, seed: Optional[int] = None) -> ExperimentSpec:
    """Reads a spec file and applies overrides: the command picks the kind, --seed wins over the file,
    and settings fill fields the file leaves out."""
    document = read_json(path)
    document["kind"] = kind
    if seed is not None:
        document["seed"] = seed
    train = dict(document.get("train") or {})
    train.setdefault("epochs", settings.epochs)
    train.setdefault("learning_rate", settings.learning_rate)
    train.setdefault("batch_size", settings.batch_size)
    document["train"] = train
    if "prune_limit" not in document:
        encoder = ModelConfig.model_validate(document.get("encoder") or {})
        document["prune_limit"] = min(settings.prune_limit, encoder.total_heads - encoder.num_layers)
    document.setdefault("random_prune_seed", settings.random_prune_seed)
    spec = ExperimentSpec.model_validate(document)
    logger.info("Loaded %s spec %s from %s", kind, spec.spec_hash(), path)
    return spec


def add_spec_arguments(parser) -> None:
    parser.add_argument("--spec", type=Path, required=True, help="experiment spec (JSON)")
    parser.add_argument("--seed", type=int, default=None, help="override the spec seed")
    parser.add_argument("--force", action="store_true", help="rerun even if the spec hash is already recorded")
