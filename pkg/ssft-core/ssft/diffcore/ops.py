"""
Differentiable primitives.

Every primitive computes its output from the input node values, checks shapes
and records a vector-Jacobian product on the tape of its inputs. All inputs of
one primitive must live on the same tape; constants are created with
:meth:`Tape.constant`.
"""
import typing as tp

import numpy as np

from ssft.diffcore.tape import Matrix, Node
from ssft.utils.exceptions import ShapeError

NORM_EPS = 1e-12

IndexArray = tp.Union[tp.Sequence[int], np.ndarray]


def _require_same_shape(operation: str, a: Node, b: Node) -> None:
    if a.shape != b.shape:
        raise ShapeError(operation, a.shape, b.shape)


def matmul(a: Node, b: Node) -> Node:
    """
    Matrix product ``a @ b``.

    Test:
    >>> from ssft.diffcore.tape import Tape
    >>> tape = Tape()
    >>> matmul(tape.constant([[1, 2], [3, 4]]), tape.constant(np.eye(2))).value
    array([[1., 2.],
           [3., 4.]])
    """
    if a.shape[1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)
    a_val, b_val = a.value, b.value
    return a.tape.record(
        "matmul", a_val @ b_val, (a, b), lambda g: (g @ b_val.T, a_val.T @ g)
    )


def add(a: Node, b: Node) -> Node:
    _require_same_shape("add", a, b)
    return a.tape.record("add", a.value + b.value, (a, b), lambda g: (g, g))


def subtract(a: Node, b: Node) -> Node:
    _require_same_shape("subtract", a, b)
    return a.tape.record(
        "subtract", a.value - b.value, (a, b), lambda g: (g, -g)
    )


def scale(a: Node, factor: float) -> Node:
    """Multiply every entry by the constant ``factor``."""
    factor = float(factor)
    return a.tape.record(
        "scale", a.value * factor, (a,), lambda g: (g * factor,)
    )


def add_scalar(a: Node, constant: float) -> Node:
    constant = float(constant)
    return a.tape.record(
        "add_scalar", a.value + constant, (a,), lambda g: (g,)
    )


def multiply(a: Node, b: Node) -> Node:
    """Elementwise product."""
    _require_same_shape("multiply", a, b)
    a_val, b_val = a.value, b.value
    return a.tape.record(
        "multiply", a_val * b_val, (a, b), lambda g: (g * b_val, g * a_val)
    )


def reduce_sum(a: Node) -> Node:
    """Sum of all entries as 1x1 node."""
    shape = a.shape
    return a.tape.record(
        "sum",
        np.array([[a.value.sum()]]), (a,),
        lambda g: (np.full(shape, g[0, 0]),)
    )


def reduce_mean(a: Node) -> Node:
    """Mean of all entries as 1x1 node."""
    shape = a.shape
    count = a.value.size
    if count == 0:
        raise ShapeError("mean", shape)
    return a.tape.record(
        "mean",
        np.array([[a.value.mean()]]), (a,),
        lambda g: (np.full(shape, g[0, 0] / count),)
    )


def concat_columns(*nodes: Node) -> Node:
    """Concatenate nodes with equal row counts side by side."""
    rows = {node.shape[0] for node in nodes}
    if len(rows) != 1:
        raise ShapeError("concat_columns", *[node.shape for node in nodes])
    bounds = np.cumsum([0] + [node.shape[1] for node in nodes])
    return nodes[0].tape.record(
        "concat_columns",
        np.concatenate([node.value for node in nodes], axis=1), nodes,
        lambda g: [
            g[:, start:stop] for start, stop in zip(bounds[:-1], bounds[1:])
        ]
    )


def concat_rows(*nodes: Node) -> Node:
    """Stack nodes with equal column counts on top of each other."""
    cols = {node.shape[1] for node in nodes}
    if len(cols) != 1:
        raise ShapeError("concat_rows", *[node.shape for node in nodes])
    bounds = np.cumsum([0] + [node.shape[0] for node in nodes])
    return nodes[0].tape.record(
        "concat_rows",
        np.concatenate([node.value for node in nodes], axis=0), nodes,
        lambda g: [
            g[start:stop, :] for start, stop in zip(bounds[:-1], bounds[1:])
        ]
    )


def row_slice(a: Node, start: int, stop: int) -> Node:
    """Rows ``start`` (inclusive) to ``stop`` (exclusive)."""
    if not 0 <= start <= stop <= a.shape[0]:
        raise ShapeError("row_slice", a.shape, (start, stop))
    shape = a.shape

    def vjp(g: Matrix) -> tp.Sequence[Matrix]:
        grad = np.zeros(shape)
        grad[start:stop, :] = g
        return (grad,)

    return a.tape.record("row_slice", a.value[start:stop, :], (a,), vjp)


def pairwise_sq_distances(a: Node, b: Node) -> Node:
    """
    Squared Euclidean distances between all rows of ``a`` and ``b``.

    Test:
    >>> from ssft.diffcore.tape import Tape
    >>> tape = Tape()
    >>> pairwise_sq_distances(tape.constant([[0, 0]]),
    ...                       tape.constant([[3, 4], [0, 1]])).value
    array([[25.,  1.]])
    """
    if a.shape[1] != b.shape[1]:
        raise ShapeError("pairwise_sq_distances", a.shape, b.shape)
    a_val, b_val = a.value, b.value
    diff = a_val[:, None, :] - b_val[None, :, :]
    dists = np.einsum("ijk,ijk->ij", diff, diff)

    def vjp(g: Matrix) -> tp.Sequence[Matrix]:
        grad_a = 2.0 * (g.sum(axis=1)[:, None] * a_val - g @ b_val)
        grad_b = 2.0 * (g.sum(axis=0)[:, None] * b_val - g.T @ a_val)
        return grad_a, grad_b

    return a.tape.record("pairwise_sq_distances", dists, (a, b), vjp)


def sqrt(a: Node, eps: float = NORM_EPS) -> Node:
    """Elementwise ``sqrt(a + eps)``; ``a`` has to be non-negative."""
    root = np.sqrt(np.maximum(a.value, 0.0) + eps)
    return a.tape.record("sqrt", root, (a,), lambda g: (0.5 * g / root,))


def relu(a: Node) -> Node:
    """
    Elementwise ``max(0, x)`` with subgradient 0 at 0.

    Test:
    >>> from ssft.diffcore.tape import Tape
    >>> relu(Tape().constant([-1, 0, 2])).value
    array([[0., 0., 2.]])
    """
    mask = a.value > 0
    return a.tape.record(
        "relu", np.where(mask, a.value, 0.0), (a,), lambda g: (g * mask,)
    )


def hinge(a: Node) -> Node:
    """Elementwise ``max(x, 0)`` of margin terms."""
    mask = a.value > 0
    return a.tape.record(
        "hinge", np.where(mask, a.value, 0.0), (a,), lambda g: (g * mask,)
    )


def bias_add(a: Node, bias: Node) -> Node:
    """Add the 1xm row ``bias`` to every row of ``a``."""
    if bias.shape != (1, a.shape[1]):
        raise ShapeError("bias_add", a.shape, bias.shape)
    return a.tape.record(
        "bias_add",
        a.value + bias.value, (a, bias),
        lambda g: (g, g.sum(axis=0, keepdims=True))
    )


def row_norms(a: Node, eps: float = NORM_EPS) -> Node:
    """Euclidean norm of every row as a nx1 column, ``sqrt(|a_i|^2 + eps)``."""
    a_val = a.value
    norms = np.sqrt((a_val * a_val).sum(axis=1, keepdims=True) + eps)
    return a.tape.record(
        "row_norms", norms, (a,), lambda g: (g * a_val / norms,)
    )


def l2_normalize_rows(a: Node, eps: float = NORM_EPS) -> Node:
    """
    Scale every row to unit Euclidean norm.

    Test:
    >>> from ssft.diffcore.tape import Tape
    >>> l2_normalize_rows(Tape().constant([[3, 4]])).value
    array([[0.6, 0.8]])
    """
    norms = np.sqrt((a.value * a.value).sum(axis=1, keepdims=True) + eps)
    unit = a.value / norms

    def vjp(g: Matrix) -> tp.Sequence[Matrix]:
        return ((g - unit * (g * unit).sum(axis=1, keepdims=True)) / norms,)

    return a.tape.record("l2_normalize_rows", unit, (a,), vjp)


def softmax_cross_entropy(logits: Node, labels: IndexArray) -> Node:
    """
    Mean over rows of ``-log softmax(logits)[label]``.

    Test:
    >>> from ssft.diffcore.tape import Tape
    >>> loss = softmax_cross_entropy(Tape().constant(np.zeros((2, 4))), [0, 3])
    >>> bool(np.isclose(loss.item(), np.log(4)))
    True
    """
    label_arr = np.asarray(labels, dtype=np.int64).reshape(-1)
    n_rows, n_classes = logits.shape
    if label_arr.shape[0] != n_rows:
        raise ShapeError("softmax_cross_entropy", logits.shape, label_arr.shape)
    if n_rows == 0:
        raise ShapeError("softmax_cross_entropy", logits.shape)
    if np.any(label_arr < 0) or np.any(label_arr >= n_classes):
        raise IndexError(
            f"Labels must lie in [0, {n_classes}), got "
            f"[{label_arr.min()}, {label_arr.max()}]"
        )

    shifted = logits.value - logits.value.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    rows = np.arange(n_rows)
    loss = -log_probs[rows, label_arr].mean()

    def vjp(g: Matrix) -> tp.Sequence[Matrix]:
        grad = np.exp(log_probs)
        grad[rows, label_arr] -= 1.0
        return (grad * (g[0, 0] / n_rows),)

    return logits.tape.record(
        "softmax_cross_entropy", np.array([[loss]]), (logits,), vjp
    )


def gather(a: Node, rows: IndexArray, cols: IndexArray) -> Node:
    """
    Collect the entries ``a[rows[t], cols[t]]`` into a kx1 column.

    Test:
    >>> from ssft.diffcore.tape import Tape
    >>> gather(Tape().constant([[1, 2], [3, 4]]), [1, 0], [0, 1]).value
    array([[3.],
           [2.]])
    """
    row_arr = np.asarray(rows, dtype=np.int64).reshape(-1)
    col_arr = np.asarray(cols, dtype=np.int64).reshape(-1)
    if row_arr.shape != col_arr.shape:
        raise ShapeError("gather", row_arr.shape, col_arr.shape)
    shape = a.shape

    def vjp(g: Matrix) -> tp.Sequence[Matrix]:
        grad = np.zeros(shape)
        np.add.at(grad, (row_arr, col_arr), g[:, 0])
        return (grad,)

    return a.tape.record(
        "gather", a.value[row_arr, col_arr].reshape(-1, 1), (a,), vjp
    )
