"""Dense 2-D tensors with a reverse-mode tape.

Operations record themselves on the active :class:`Tape` (entered with
``with Tape() as tape:``) whenever one of their inputs requires a gradient.
Outside a tape block the same functions are plain forward math, which is
what inference uses.
"""

import contextvars
import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from lamp.services.exceptions import ContractError, NonFiniteError, ShapeError

logger = logging.getLogger(__name__)

_ACTIVE_TAPE: contextvars.ContextVar["Tape | None"] = contextvars.ContextVar(
    "lamp_active_tape", default=None
)

COSINE_EPS = 1e-12


class Tensor:
    __slots__ = ("value", "requires_grad", "name")

    def __init__(self, value, *, requires_grad: bool = False, name: str = ""):
        array = np.asarray(value, dtype=np.float64)
        if array.ndim == 0:
            array = array.reshape(1, 1)
        elif array.ndim == 1:
            array = array.reshape(1, -1)
        elif array.ndim != 2:
            raise ContractError(f"tensors are 2-D, got {array.ndim} dimensions")
        self.value = array
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape  # type: ignore[return-value]

    @property
    def rows(self) -> int:
        return self.value.shape[0]

    @property
    def cols(self) -> int:
        return self.value.shape[1]

    def item(self) -> float:
        if self.shape != (1, 1):
            raise ContractError(f"item() needs a 1x1 tensor, got {self.rows}x{self.cols}")
        return float(self.value[0, 0])

    def __repr__(self):
        label = f" {self.name}" if self.name else ""
        return f"<Tensor{label} {self.rows}x{self.cols}>"


class Parameter(Tensor):
    """Trainable tensor with its gradient accumulator and Adam moments."""

    __slots__ = ("grad", "adam_m", "adam_v", "step_count")

    def __init__(self, value, *, name: str = ""):
        super().__init__(np.array(value, dtype=np.float64, copy=True), requires_grad=True, name=name)
        self.grad = np.zeros_like(self.value)
        self.adam_m = np.zeros_like(self.value)
        self.adam_v = np.zeros_like(self.value)
        self.step_count = 0

    def zero_grad(self):
        self.grad[...] = 0.0


@dataclass
class TapeRecord:
    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    # maps the output gradient to one gradient (or None) per input
    backward: Callable[[np.ndarray], tuple]


class Tape:
    def __init__(self, check_finite: bool = False):
        self.records: list[TapeRecord] = []
        self.check_finite = check_finite
        self._token = None

    def __enter__(self):
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, *exc):
        _ACTIVE_TAPE.reset(self._token)
        self._token = None
        return False

    def __len__(self):
        return len(self.records)


def active_tape() -> Tape | None:
    return _ACTIVE_TAPE.get()


def constant(value, name: str = "") -> Tensor:
    return Tensor(value, name=name)


def _emit(op: str, inputs: tuple[Tensor, ...], value: np.ndarray, backward) -> Tensor:
    tape = _ACTIVE_TAPE.get()
    tracked = tape is not None and any(t.requires_grad for t in inputs)
    if tape is not None and tape.check_finite and not np.isfinite(value).all():
        raise NonFiniteError(f"{op} produced a non-finite value")
    out = Tensor(value, requires_grad=tracked)
    if tracked:
        tape.records.append(TapeRecord(op, inputs, out, backward))
    return out


def _same_shape(op: str, a: Tensor, b: Tensor):
    if a.shape != b.shape:
        raise ShapeError(op, a.shape, b.shape)


# =========================================================================
# ELEMENTARY OPS
# =========================================================================


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.cols != b.rows:
        raise ShapeError("matmul", a.shape, b.shape)
    av, bv = a.value, b.value
    return _emit("matmul", (a, b), av @ bv, lambda g: (g @ bv.T, av.T @ g))


def transpose(x: Tensor) -> Tensor:
    return _emit("transpose", (x,), x.value.T.copy(), lambda g: (g.T,))


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("add", a, b)
    return _emit("add", (a, b), a.value + b.value, lambda g: (g, g))


def subtract(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("subtract", a, b)
    return _emit("subtract", (a, b), a.value - b.value, lambda g: (g, -g))


def multiply(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product."""
    _same_shape("multiply", a, b)
    av, bv = a.value, b.value
    return _emit("multiply", (a, b), av * bv, lambda g: (g * bv, g * av))


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """x + b with the 1-row bias broadcast over rows (the only broadcast supported)."""
    if b.rows != 1 or b.cols != x.cols:
        raise ShapeError("add_bias", x.shape, b.shape)
    return _emit(
        "add_bias", (x, b), x.value + b.value, lambda g: (g, g.sum(axis=0, keepdims=True))
    )


def relu(x: Tensor) -> Tensor:
    active = x.value > 0
    return _emit("relu", (x,), np.where(active, x.value, 0.0), lambda g: (g * active,))


def scale(x: Tensor, c: float) -> Tensor:
    c = float(c)
    return _emit("scale", (x,), x.value * c, lambda g: (g * c,))


def concat_rows(tensors) -> Tensor:
    tensors = tuple(tensors)
    widths = {t.cols for t in tensors}
    if len(widths) != 1:
        raise ShapeError("concat_rows", *(t.shape for t in tensors))
    bounds = np.cumsum([0] + [t.rows for t in tensors])
    return _emit(
        "concat_rows",
        tensors,
        np.concatenate([t.value for t in tensors], axis=0),
        lambda g: tuple(g[bounds[i] : bounds[i + 1]] for i in range(len(tensors))),
    )


def select_rows(x: Tensor, index) -> Tensor:
    index = np.asarray(index, dtype=np.int64)
    rows = x.rows

    def backward(g):
        grad = np.zeros((rows, g.shape[1]))
        np.add.at(grad, index, g)
        return (grad,)

    return _emit("select_rows", (x,), x.value[index], backward)


def gather(x: Tensor, rows, cols) -> Tensor:
    """Entries x[rows[k], cols[k]] as a k x 1 column."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    shape = x.shape

    def backward(g):
        grad = np.zeros(shape)
        np.add.at(grad, (rows, cols), g[:, 0])
        return (grad,)

    return _emit("gather", (x,), x.value[rows, cols].reshape(-1, 1), backward)


def diagonal(x: Tensor) -> Tensor:
    if x.rows != x.cols:
        raise ShapeError("diagonal", x.shape)
    index = np.arange(x.rows)
    return gather(x, index, index)


def sum_all(x: Tensor) -> Tensor:
    shape = x.shape
    return _emit("sum_all", (x,), x.value.sum().reshape(1, 1), lambda g: (np.full(shape, g[0, 0]),))


def mean_all(x: Tensor) -> Tensor:
    shape = x.shape
    count = x.value.size
    return _emit(
        "mean_all",
        (x,),
        (x.value.sum() / count).reshape(1, 1),
        lambda g: (np.full(shape, g[0, 0] / count),),
    )


# =========================================================================
# GRAPH OPS
# =========================================================================


def _neighbor_sum(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    out = np.zeros_like(values)
    if edges.size:
        np.add.at(out, edges[:, 0], values[edges[:, 1]])
        np.add.at(out, edges[:, 1], values[edges[:, 0]])
    return out


def scatter_sum(node_feats: Tensor, edges) -> Tensor:
    """Row v of the result sums the rows of v's neighbours (both directions of each edge)."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.size and edges.max() >= node_feats.rows:
        raise ContractError(
            f"edge endpoint {edges.max()} outside a {node_feats.rows}-row feature matrix"
        )
    # the adjacency is symmetric, so the adjoint is the same neighbour sum
    return _emit(
        "scatter_sum",
        (node_feats,),
        _neighbor_sum(node_feats.value, edges),
        lambda g: (_neighbor_sum(g, edges),),
    )


def segment_sum(node_feats: Tensor, graph_ids, num_segments: int | None = None) -> Tensor:
    ids = np.asarray(graph_ids, dtype=np.int64)
    if ids.shape[0] != node_feats.rows:
        raise ShapeError("segment_sum", node_feats.shape, (ids.shape[0], 1))
    count = int(ids.max()) + 1 if num_segments is None else num_segments
    out = np.zeros((count, node_feats.cols))
    np.add.at(out, ids, node_feats.value)
    return _emit("segment_sum", (node_feats,), out, lambda g: (g[ids],))


def segment_mean(node_feats: Tensor, graph_ids, num_segments: int | None = None) -> Tensor:
    ids = np.asarray(graph_ids, dtype=np.int64)
    if ids.shape[0] != node_feats.rows:
        raise ShapeError("segment_mean", node_feats.shape, (ids.shape[0], 1))
    count = int(ids.max()) + 1 if num_segments is None else num_segments
    sizes = np.maximum(np.bincount(ids, minlength=count), 1).astype(np.float64)[:, None]
    out = np.zeros((count, node_feats.cols))
    np.add.at(out, ids, node_feats.value)
    return _emit("segment_mean", (node_feats,), out / sizes, lambda g: ((g / sizes)[ids],))


# =========================================================================
# SIMILARITY AND REDUCTIONS FOR LOSSES
# =========================================================================


def cosine_sim_matrix(a: Tensor, b: Tensor, eps: float = COSINE_EPS) -> Tensor:
    """(i, j) = a_i . b_j / ((|a_i| + eps)(|b_j| + eps)); zero rows give similarity 0."""
    if a.cols != b.cols:
        raise ShapeError("cosine_sim_matrix", a.shape, b.shape)
    av, bv = a.value, b.value
    a_norm = np.sqrt((av * av).sum(axis=1, keepdims=True))
    b_norm = np.sqrt((bv * bv).sum(axis=1, keepdims=True))
    a_unit = av / (a_norm + eps)
    b_unit = bv / (b_norm + eps)

    def unit_adjoint(d_unit, raw, norm):
        # d/dx [x / (|x| + eps)]; the radial term vanishes for zero rows
        shifted = norm + eps
        safe = np.where(norm > 0, norm, 1.0)
        radial = (d_unit * raw).sum(axis=1, keepdims=True) / (shifted * shifted * safe)
        return d_unit / shifted - radial * raw

    def backward(g):
        return (
            unit_adjoint(g @ b_unit, av, a_norm),
            unit_adjoint(g.T @ a_unit, bv, b_norm),
        )

    return _emit("cosine_sim_matrix", (a, b), a_unit @ b_unit.T, backward)


def masked_logsumexp(x: Tensor, mask) -> Tensor:
    """Per row, log of the sum of exp(x) over entries where ``mask`` is True (k x 1)."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != x.shape:
        raise ShapeError("masked_logsumexp", x.shape, mask.shape)
    if not mask.any(axis=1).all():
        raise ContractError("masked_logsumexp: a row has an empty denominator")
    masked = np.where(mask, x.value, -np.inf)
    peak = masked.max(axis=1, keepdims=True)
    weights = np.where(mask, np.exp(masked - peak), 0.0)
    total = weights.sum(axis=1, keepdims=True)
    softmax = weights / total
    return _emit(
        "masked_logsumexp", (x,), peak + np.log(total), lambda g: (softmax * g,)
    )


# =========================================================================
# BACKWARD AND OPTIMIZER
# =========================================================================


def backward(loss: Tensor, tape: Tape):
    """Accumulate d(loss)/d(parameter) into every Parameter.grad reachable on the tape."""
    if loss.shape != (1, 1):
        raise ContractError(f"backward needs a scalar loss, got {loss.rows}x{loss.cols}")
    grads: dict[int, np.ndarray] = {id(loss): np.ones((1, 1))}
    for record in reversed(tape.records):
        upstream = grads.pop(id(record.output), None)
        if upstream is None:
            continue
        for tensor, grad in zip(record.inputs, record.backward(upstream)):
            if grad is None or not tensor.requires_grad:
                continue
            if isinstance(tensor, Parameter):
                tensor.grad += grad
            else:
                key = id(tensor)
                grads[key] = grads[key] + grad if key in grads else grad
    if isinstance(loss, Parameter):
        loss.grad += 1.0


def adam_step(params, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """Bias-corrected Adam update, then zero the gradients."""
    for param in params:
        param.step_count += 1
        t = param.step_count
        g = param.grad
        param.adam_m *= beta1
        param.adam_m += (1.0 - beta1) * g
        param.adam_v *= beta2
        param.adam_v += (1.0 - beta2) * (g * g)
        m_hat = param.adam_m / (1.0 - beta1**t)
        v_hat = param.adam_v / (1.0 - beta2**t)
        param.value -= lr * m_hat / (np.sqrt(v_hat) + eps)
        param.zero_grad()


def zero_grads(params):
    for param in params:
        param.zero_grad()


# =========================================================================
# GRADIENT CHECKING
# =========================================================================


def finite_difference_grad(fn: Callable[[], float], param: Parameter, h: float = 1e-4) -> np.ndarray:
    """Central differences of ``fn`` with respect to every entry of ``param`` (values restored)."""
    grad = np.zeros_like(param.value)
    flat = param.value.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + h
        upper = fn()
        flat[i] = original - h
        lower = fn()
        flat[i] = original
        grad.reshape(-1)[i] = (upper - lower) / (2.0 * h)
    return grad


def max_relative_error(analytic, numeric) -> float:
    """Largest entry-wise deviation, relative to the largest gradient magnitude involved."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    magnitude = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0), 1e-12)
    return float(np.abs(analytic - numeric).max(initial=0.0) / magnitude)
