"""Reverse-mode automatic differentiation over float64 numpy arrays.

Every tensor produced by a primitive remembers its parents and a backward
closure that maps the upstream gradient to one gradient per parent. Calling
``backward`` on a scalar traces the graph once, walks it in reverse topological
order and accumulates gradients into every ``requires_grad`` tensor it reaches.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

_node_ids = itertools.count()

BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


class AutodiffError(Exception):
    """Raised when a graph is used outside its contract."""


class ShapeError(AutodiffError):
    """Input shapes do not conform to a primitive's contract."""

    def __init__(self, op: str, dims: Sequence, detail: str = ""):
        self.op = op
        self.dims = tuple(tuple(d) if isinstance(d, (tuple, list)) else d for d in dims)
        message = f"{op}: incompatible dimensions {self.dims}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)


class Tensor:
    """Dense float64 array with an optional gradient slot."""

    __slots__ = ("values", "grad", "requires_grad", "node_id", "op", "_parents", "_backward")

    def __init__(
        self,
        values,
        requires_grad: bool = False,
        *,
        op: str = "leaf",
        parents: Tuple["Tensor", ...] = (),
        backward: Optional[BackwardFn] = None,
    ):
        self.values = np.asarray(values, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.node_id = next(_node_ids)
        self.op = op
        self._parents = parents
        self._backward = backward

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    def item(self) -> float:
        if self.values.size != 1:
            raise AutodiffError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.values.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(op={self.op}, shape={self.shape}, requires_grad={self.requires_grad})"


@dataclass
class Graph:
    """Topologically ordered nodes reachable from one output."""

    nodes: List[Tensor] = field(default_factory=list)
    parameters: List[Tensor] = field(default_factory=list)

    @classmethod
    def trace(cls, output: Tensor) -> "Graph":
        order: List[Tensor] = []
        visited = set()
        stack: List[Tuple[Tensor, bool]] = [(output, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if node.node_id in visited:
                continue
            visited.add(node.node_id)
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and parent.node_id not in visited:
                    stack.append((parent, False))
        leaves = [node for node in order if node._backward is None]
        return cls(nodes=order, parameters=leaves)


def _make(op: str, values: np.ndarray, parents: Tuple[Tensor, ...], backward: BackwardFn) -> Tensor:
    tracked = any(parent.requires_grad for parent in parents)
    return Tensor(
        values,
        requires_grad=tracked,
        op=op,
        parents=parents if tracked else (),
        backward=backward if tracked else None,
    )


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_check(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, (a.shape, b.shape), "shapes do not broadcast") from None


_PRIMITIVES: Dict[str, Callable[..., Tensor]] = {}


def primitive(name: str):
    def register(fn):
        _PRIMITIVES[name] = fn
        return fn

    return register


def forward_primitive(op_kind: str, inputs: Sequence[Tensor], **attrs) -> Tensor:
    """Apply the named primitive and record it for backward."""
    try:
        fn = _PRIMITIVES[op_kind]
    except KeyError:
        raise AutodiffError(f"unknown primitive {op_kind!r}; known: {sorted(_PRIMITIVES)}") from None
    return fn(*inputs, **attrs)


@primitive("matmul")
def matmul(a: Tensor, b: Tensor, transpose_b: bool = False) -> Tensor:
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError("matmul", (a.shape, b.shape), "operands need at least 2 dimensions")
    right = np.swapaxes(b.values, -1, -2) if transpose_b else b.values
    if a.shape[-1] != right.shape[-2]:
        raise ShapeError("matmul", (a.shape, b.shape), f"inner dimensions {a.shape[-1]} != {right.shape[-2]}")
    try:
        values = a.values @ right
    except ValueError:
        raise ShapeError("matmul", (a.shape, b.shape), "batch dimensions do not broadcast") from None

    def backward(grad):
        grad_a = _unbroadcast(grad @ np.swapaxes(right, -1, -2), a.shape)
        grad_right = _unbroadcast(np.swapaxes(a.values, -1, -2) @ grad, right.shape)
        grad_b = np.swapaxes(grad_right, -1, -2) if transpose_b else grad_right
        return grad_a, grad_b

    return _make("matmul", values, (a, b), backward)


@primitive("add")
def add(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_check("add", a, b)

    def backward(grad):
        return _unbroadcast(grad, a.shape), _unbroadcast(grad, b.shape)

    return _make("add", a.values + b.values, (a, b), backward)


@primitive("multiply")
def multiply(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_check("multiply", a, b)

    def backward(grad):
        return _unbroadcast(grad * b.values, a.shape), _unbroadcast(grad * a.values, b.shape)

    return _make("multiply", a.values * b.values, (a, b), backward)


@primitive("embedding_lookup")
def embedding_lookup(table: Tensor, ids) -> Tensor:
    ids = np.asarray(ids)
    if table.ndim != 2:
        raise ShapeError("embedding_lookup", (table.shape, ids.shape), "table must be 2-dimensional")
    if not np.issubdtype(ids.dtype, np.integer):
        raise ShapeError("embedding_lookup", (table.shape, ids.shape), f"ids must be integers, got {ids.dtype}")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ShapeError(
            "embedding_lookup", (table.shape, ids.shape), f"ids span [{ids.min()}, {ids.max()}] outside table rows"
        )

    def backward(grad):
        grad_table = np.zeros_like(table.values)
        np.add.at(grad_table, ids, grad)
        return (grad_table,)

    return _make("embedding_lookup", table.values[ids], (table,), backward)


@primitive("softmax_rows")
def softmax_rows(x: Tensor) -> Tensor:
    if x.ndim < 1:
        raise ShapeError("softmax_rows", (x.shape,), "needs at least one dimension")
    shifted = x.values - x.values.max(axis=-1, keepdims=True)
    exps = np.exp(shifted)
    out = exps / exps.sum(axis=-1, keepdims=True)

    def backward(grad):
        return (out * (grad - (grad * out).sum(axis=-1, keepdims=True)),)

    return _make("softmax_rows", out, (x,), backward)


@primitive("layer_norm_rows")
def layer_norm_rows(x: Tensor, eps: float = 1e-5) -> Tensor:
    if x.ndim < 1 or x.shape[-1] < 1:
        raise ShapeError("layer_norm_rows", (x.shape,), "needs a non-empty last dimension")
    width = x.shape[-1]
    centered = x.values - x.values.mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt((centered**2).mean(axis=-1, keepdims=True) + eps)
    out = centered * inv_std

    def backward(grad):
        total = grad.sum(axis=-1, keepdims=True)
        projected = (grad * out).sum(axis=-1, keepdims=True)
        return (inv_std / width * (width * grad - total - out * projected),)

    return _make("layer_norm_rows", out, (x,), backward)


_GELU_C = math.sqrt(2.0 / math.pi)


@primitive("gelu")
def gelu(x: Tensor) -> Tensor:
    cubic = 0.044715 * x.values**3
    inner = np.tanh(_GELU_C * (x.values + cubic))
    out = 0.5 * x.values * (1.0 + inner)

    def backward(grad):
        d_inner = (1.0 - inner**2) * _GELU_C * (1.0 + 3 * 0.044715 * x.values**2)
        return (grad * (0.5 * (1.0 + inner) + 0.5 * x.values * d_inner),)

    return _make("gelu", out, (x,), backward)


@primitive("concat_last_dim")
def concat_last_dim(*parts: Tensor) -> Tensor:
    if not parts:
        raise ShapeError("concat_last_dim", (), "nothing to concatenate")
    leading = parts[0].shape[:-1]
    if any(part.shape[:-1] != leading for part in parts):
        raise ShapeError("concat_last_dim", tuple(part.shape for part in parts), "leading dimensions differ")
    widths = [part.shape[-1] for part in parts]
    bounds = np.cumsum(widths)[:-1]

    def backward(grad):
        return tuple(np.split(grad, bounds, axis=-1))

    return _make("concat_last_dim", np.concatenate([p.values for p in parts], axis=-1), tuple(parts), backward)


@primitive("slice_last_dim")
def slice_last_dim(x: Tensor, start: int, stop: int) -> Tensor:
    if x.ndim < 1 or not 0 <= start < stop <= x.shape[-1]:
        raise ShapeError("slice_last_dim", (x.shape, (start, stop)), "slice outside last dimension")

    def backward(grad):
        full = np.zeros_like(x.values)
        full[..., start:stop] = grad
        return (full,)

    return _make("slice_last_dim", x.values[..., start:stop], (x,), backward)


@primitive("scale")
def scale(x: Tensor, factor: float) -> Tensor:
    factor = float(factor)

    def backward(grad):
        return (grad * factor,)

    return _make("scale", x.values * factor, (x,), backward)


@primitive("sum")
def sum_all(x: Tensor) -> Tensor:
    def backward(grad):
        return (np.broadcast_to(grad, x.shape).copy(),)

    return _make("sum", np.asarray(x.values.sum()), (x,), backward)


def cross_entropy_loss(logits: Tensor, gold, ignore_index: int = -100, allow_empty: bool = False) -> Tensor:
    """Mean negative log-likelihood over positions whose gold id is not ``ignore_index``.

    With ``allow_empty`` an all-ignored batch yields a zero loss whose gradient
    is zero everywhere; otherwise it is an error.
    """
    gold = np.asarray(gold)
    if logits.ndim != 3 or gold.shape != logits.shape[:2]:
        raise ShapeError("cross_entropy_loss", (logits.shape, gold.shape), "expected logits B x T x labels and gold B x T")
    live = gold != ignore_index
    count = int(live.sum())
    num_labels = logits.shape[-1]
    if count == 0:
        if not allow_empty:
            raise AutodiffError("empty loss support")

        def zero_backward(grad):
            return (np.zeros_like(logits.values),)

        return _make("cross_entropy", np.asarray(0.0), (logits,), zero_backward)

    rows = np.nonzero(live)
    targets = gold[rows]
    if targets.min() < 0 or targets.max() >= num_labels:
        raise AutodiffError(f"gold label ids must lie in [0, {num_labels}) or equal {ignore_index}")
    live_logits = logits.values[rows]
    shifted = live_logits - live_logits.max(axis=-1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    picked = log_probs[np.arange(count), targets]
    loss = -picked.sum() / count

    def backward(grad):
        probs = np.exp(log_probs)
        probs[np.arange(count), targets] -= 1.0
        full = np.zeros_like(logits.values)
        full[rows] = probs * (float(grad) / count)
        return (full,)

    return _make("cross_entropy", np.asarray(loss), (logits,), backward)


def backward(loss: Tensor) -> Graph:
    """Populate ``grad`` on every requires_grad tensor reachable from ``loss``."""
    if loss.values.size != 1 or loss.ndim > 1:
        raise AutodiffError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise AutodiffError("loss does not depend on any tensor that requires grad")
    graph = Graph.trace(loss)
    pending: Dict[int, np.ndarray] = {loss.node_id: np.ones_like(loss.values)}
    for node in reversed(graph.nodes):
        grad = pending.pop(node.node_id, None)
        if grad is None:
            continue
        node.grad = grad if node.grad is None else node.grad + grad
        if node._backward is None:
            continue
        for parent, parent_grad in zip(node._parents, node._backward(grad)):
            if parent_grad is None or not parent.requires_grad:
                continue
            if parent.node_id in pending:
                pending[parent.node_id] = pending[parent.node_id] + parent_grad
            else:
                pending[parent.node_id] = parent_grad
    return graph
