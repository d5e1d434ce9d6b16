"""Miniature transformer encoder for token classification.

Each attention head's context output is multiplied by a gate scalar (always
1.0, only its gradient is read) and then by the head's mask bit before the
output projection, so a masked head contributes nothing and receives no
gradient.
"""

import hashlib
import json
import logging
import math
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict

from .autodiff import (
    AutodiffError,
    ShapeError,
    Tensor,
    add,
    concat_last_dim,
    embedding_lookup,
    gelu,
    layer_norm_rows,
    matmul,
    multiply,
    scale,
    slice_last_dim,
    softmax_rows,
)

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT_VERSION = "1.0"
ATTENTION_BLOCK = -1e9
INIT_STD = 0.02

Head = Tuple[int, int]


class ConfigError(ValueError):
    def __init__(self, violations: List[str]):
        self.violations = violations
        super().__init__("invalid model config: " + "; ".join(violations))


class MaskError(ValueError):
    """A head mask would leave some layer without an active head."""


class GradientsAbsentError(AutodiffError):
    """Gate gradients were requested before any backward pass."""


class ModelConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", protected_namespaces=())

    num_layers: int = 4
    num_heads_per_layer: int = 4
    model_dim: int = 64
    feedforward_dim: int = 128
    vocab_size: Optional[int] = None
    max_sequence_length: int = 64
    num_labels: Optional[int] = None
    seed: int = 0

    def violations(self) -> List[str]:
        problems = []
        if self.num_layers < 1:
            problems.append(f"num_layers must be >= 1, got {self.num_layers}")
        if self.num_heads_per_layer < 1:
            problems.append(f"num_heads_per_layer must be >= 1, got {self.num_heads_per_layer}")
        elif self.model_dim % self.num_heads_per_layer != 0:
            problems.append(f"model_dim {self.model_dim} is not divisible by {self.num_heads_per_layer} heads")
        if self.model_dim < 1:
            problems.append(f"model_dim must be >= 1, got {self.model_dim}")
        if self.feedforward_dim < 1:
            problems.append(f"feedforward_dim must be >= 1, got {self.feedforward_dim}")
        if self.max_sequence_length < 1:
            problems.append(f"max_sequence_length must be >= 1, got {self.max_sequence_length}")
        if self.vocab_size is None or self.vocab_size < 1:
            problems.append(f"vocab_size must be set and >= 1, got {self.vocab_size}")
        if self.num_labels is None or self.num_labels < 2:
            problems.append(f"num_labels must be set and >= 2, got {self.num_labels}")
        return problems

    def resolved(self, vocab_size: int, num_labels: int) -> "ModelConfig":
        return self.model_copy(update={"vocab_size": vocab_size, "num_labels": num_labels})

    @property
    def head_dim(self) -> int:
        return self.model_dim // self.num_heads_per_layer

    @property
    def total_heads(self) -> int:
        return self.num_layers * self.num_heads_per_layer

    def config_hash(self) -> str:
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class HeadMask:
    """L x H booleans; True means the head is active."""

    active: np.ndarray

    def __post_init__(self):
        active = np.array(self.active, dtype=bool)
        if active.ndim != 2 or active.size == 0:
            raise MaskError(f"head mask must be a non-empty L x H matrix, got shape {active.shape}")
        empty = [layer for layer in range(active.shape[0]) if not active[layer].any()]
        if empty:
            raise MaskError(f"head mask leaves layer(s) {empty} without an active head")
        active.setflags(write=False)
        object.__setattr__(self, "active", active)

    @classmethod
    def full(cls, num_layers: int, num_heads: int) -> "HeadMask":
        return cls(np.ones((num_layers, num_heads), dtype=bool))

    @classmethod
    def from_pruned(cls, num_layers: int, num_heads: int, pruned: Iterable[Head]) -> "HeadMask":
        return cls.full(num_layers, num_heads).without(pruned)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.active.shape

    def without(self, heads: Iterable[Head]) -> "HeadMask":
        active = self.active.copy()
        for layer, head in heads:
            if not (0 <= layer < active.shape[0] and 0 <= head < active.shape[1]):
                raise MaskError(f"head ({layer}, {head}) is outside a {active.shape} mask")
            active[layer, head] = False
        return HeadMask(active)

    def pruned_heads(self) -> List[Head]:
        return [(int(l), int(h)) for l, h in zip(*np.nonzero(~self.active))]

    def __eq__(self, other) -> bool:
        return isinstance(other, HeadMask) and np.array_equal(self.active, other.active)

    def __hash__(self) -> int:
        return hash(self.active.tobytes())


def parameter_shapes(config: ModelConfig) -> "OrderedDict[str, Tuple[int, ...]]":
    d, ff = config.model_dim, config.feedforward_dim
    shapes: "OrderedDict[str, Tuple[int, ...]]" = OrderedDict()
    shapes["embeddings.token"] = (config.vocab_size, d)
    shapes["embeddings.position"] = (config.max_sequence_length, d)
    shapes["embeddings.norm.gain"] = (d,)
    shapes["embeddings.norm.bias"] = (d,)
    for layer in range(config.num_layers):
        prefix = f"layers.{layer}"
        for proj in ("query", "key", "value", "output"):
            shapes[f"{prefix}.attention.{proj}.weight"] = (d, d)
            shapes[f"{prefix}.attention.{proj}.bias"] = (d,)
        shapes[f"{prefix}.attention_norm.gain"] = (d,)
        shapes[f"{prefix}.attention_norm.bias"] = (d,)
        shapes[f"{prefix}.feedforward.inner.weight"] = (d, ff)
        shapes[f"{prefix}.feedforward.inner.bias"] = (ff,)
        shapes[f"{prefix}.feedforward.outer.weight"] = (ff, d)
        shapes[f"{prefix}.feedforward.outer.bias"] = (d,)
        shapes[f"{prefix}.output_norm.gain"] = (d,)
        shapes[f"{prefix}.output_norm.bias"] = (d,)
    shapes["classifier.weight"] = (d, config.num_labels)
    shapes["classifier.bias"] = (config.num_labels,)
    return shapes


def parameter_count(config: ModelConfig) -> int:
    return sum(math.prod(shape) for shape in parameter_shapes(config).values())


class EncoderModel:
    def __init__(self, config: ModelConfig, parameters: "OrderedDict[str, Tensor]"):
        self.config = config
        self.parameters = parameters
        self.head_gates: List[List[Tensor]] = [
            [Tensor(np.ones(1), requires_grad=True, op="gate") for _ in range(config.num_heads_per_layer)]
            for _ in range(config.num_layers)
        ]

    def named_parameters(self) -> "OrderedDict[str, Tensor]":
        """Trainable parameters; head gates are deliberately absent."""
        return self.parameters

    def zero_grad(self) -> None:
        for param in self.parameters.values():
            param.zero_grad()
        for row in self.head_gates:
            for gate in row:
                gate.zero_grad()

    def full_mask(self) -> HeadMask:
        return HeadMask.full(self.config.num_layers, self.config.num_heads_per_layer)


def build_model(config: ModelConfig) -> EncoderModel:
    problems = config.violations()
    if problems:
        raise ConfigError(problems)
    rng = np.random.default_rng(config.seed)
    parameters: "OrderedDict[str, Tensor]" = OrderedDict()
    for name, shape in parameter_shapes(config).items():
        if name.endswith(".gain"):
            values = np.ones(shape)
        elif name.endswith(".bias"):
            values = np.zeros(shape)
        else:
            values = rng.normal(0.0, INIT_STD, size=shape)
        parameters[name] = Tensor(values, requires_grad=True, op="param")
    logger.debug("Built encoder %s with %d parameters", config.config_hash(), parameter_count(config))
    return EncoderModel(config, parameters)


def _linear(x: Tensor, params: Dict[str, Tensor], prefix: str) -> Tensor:
    return add(matmul(x, params[f"{prefix}.weight"]), params[f"{prefix}.bias"])


def _affine_norm(x: Tensor, params: Dict[str, Tensor], prefix: str) -> Tensor:
    return add(multiply(layer_norm_rows(x), params[f"{prefix}.gain"]), params[f"{prefix}.bias"])


def forward(
    model: EncoderModel,
    token_ids: np.ndarray,
    attention_mask: np.ndarray,
    head_mask: Optional[HeadMask] = None,
) -> Tensor:
    """Logits of shape batch x seq x labels."""
    config = model.config
    token_ids = np.asarray(token_ids)
    attention_mask = np.asarray(attention_mask, dtype=bool)
    if token_ids.ndim != 2 or attention_mask.shape != token_ids.shape:
        raise ShapeError("forward", (token_ids.shape, attention_mask.shape), "expected matching batch x seq matrices")
    batch_size, seq_len = token_ids.shape
    if seq_len > config.max_sequence_length:
        raise ShapeError("forward", (token_ids.shape,), f"sequence length {seq_len} exceeds {config.max_sequence_length}")
    head_mask = head_mask or model.full_mask()
    if head_mask.shape != (config.num_layers, config.num_heads_per_layer):
        raise ShapeError("forward", (head_mask.shape,), "head mask does not match the model")

    params = model.parameters
    positions = np.broadcast_to(np.arange(seq_len), (batch_size, seq_len))
    hidden = add(
        embedding_lookup(params["embeddings.token"], token_ids),
        embedding_lookup(params["embeddings.position"], positions),
    )
    hidden = _affine_norm(hidden, params, "embeddings.norm")

    key_block = Tensor(np.where(attention_mask, 0.0, ATTENTION_BLOCK)[:, None, :])
    query_keep = Tensor(attention_mask[:, :, None].astype(np.float64))
    head_dim = config.head_dim
    inv_sqrt = 1.0 / math.sqrt(head_dim)

    for layer in range(config.num_layers):
        prefix = f"layers.{layer}"
        query = _linear(hidden, params, f"{prefix}.attention.query")
        key = _linear(hidden, params, f"{prefix}.attention.key")
        value = _linear(hidden, params, f"{prefix}.attention.value")
        contexts = []
        for head in range(config.num_heads_per_layer):
            lo, hi = head * head_dim, (head + 1) * head_dim
            scores = scale(matmul(slice_last_dim(query, lo, hi), slice_last_dim(key, lo, hi), transpose_b=True), inv_sqrt)
            weights = softmax_rows(add(scores, key_block))
            context = multiply(matmul(weights, slice_last_dim(value, lo, hi)), query_keep)
            context = multiply(context, model.head_gates[layer][head])
            context = multiply(context, Tensor(np.array([1.0 if head_mask.active[layer, head] else 0.0])))
            contexts.append(context)
        attended = _linear(concat_last_dim(*contexts), params, f"{prefix}.attention.output")
        hidden = _affine_norm(add(hidden, attended), params, f"{prefix}.attention_norm")
        inner = gelu(_linear(hidden, params, f"{prefix}.feedforward.inner"))
        hidden = _affine_norm(add(hidden, _linear(inner, params, f"{prefix}.feedforward.outer")), params, f"{prefix}.output_norm")

    return _linear(hidden, params, "classifier")


def head_gate_grads(model: EncoderModel) -> np.ndarray:
    """|d loss / d gate| for every head, as an L x H matrix."""
    config = model.config
    out = np.zeros((config.num_layers, config.num_heads_per_layer))
    for layer, row in enumerate(model.head_gates):
        for head, gate in enumerate(row):
            if gate.grad is None:
                raise GradientsAbsentError(f"no gradient on gate ({layer}, {head}); run backward first")
            out[layer, head] = abs(float(gate.grad.reshape(-1)[0]))
    return out


def save_checkpoint(model: EncoderModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": model.config.model_dump(mode="json"),
        "parameters": [{"name": name, "shape": list(p.shape)} for name, p in model.parameters.items()],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for param in model.parameters.values():
            fh.write(param.values.astype("<f8").tobytes())
    return path


def load_checkpoint(path: Union[str, Path]) -> EncoderModel:
    path = Path(path)
    with open(path, "rb") as fh:
        header_line = fh.readline()
        payload = fh.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"{path}: unreadable checkpoint header ({exc})") from None
    version = str(header.get("format_version", ""))
    if version.split(".")[0] != CHECKPOINT_FORMAT_VERSION.split(".")[0]:
        raise ValueError(f"{path}: unsupported checkpoint format_version {version!r}")
    config = ModelConfig.model_validate(header["config"])
    expected = parameter_shapes(config)
    stored = [(entry["name"], tuple(entry["shape"])) for entry in header["parameters"]]
    if stored != list(expected.items()):
        raise ShapeError("load_checkpoint", (tuple(expected.items()), tuple(stored)), "parameter index does not match config")

    parameters: "OrderedDict[str, Tensor]" = OrderedDict()
    expected_bytes = 8 * sum(math.prod(shape) for shape in expected.values())
    if len(payload) != expected_bytes:
        raise ShapeError("load_checkpoint", (expected_bytes, len(payload)), "trailing or missing parameter bytes")
    offset = 0
    for name, shape in expected.items():
        count = math.prod(shape)
        values = np.frombuffer(payload, dtype="<f8", count=count, offset=offset).astype(np.float64).reshape(shape)
        parameters[name] = Tensor(values, requires_grad=True, op="param")
        offset += count * 8
    return EncoderModel(config, parameters)
