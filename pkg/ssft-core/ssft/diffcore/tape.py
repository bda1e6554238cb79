"""
Reverse-mode differentiation tape.

A :class:`Tape` records every executed primitive together with a function
that maps the upstream gradient of the primitive's output to the gradients of
its inputs. Running :meth:`Tape.backward` replays the records in exact reverse
order and accumulates the gradients of all parameters used on the tape into
their :class:`ParamLeaf`.
"""
import logging
import typing as tp

import numpy as np

from ssft.utils.exceptions import ShapeError, TapeError

LOG = logging.getLogger(__name__)

Matrix = np.ndarray
VJP = tp.Callable[[Matrix], tp.Sequence[tp.Optional[Matrix]]]


def as_matrix(value: tp.Any) -> Matrix:
    """
    Converts ``value`` into a rank 2 float64 matrix.

    Test:
    >>> as_matrix([1, 2]).shape
    (1, 2)
    >>> as_matrix(3.0).shape
    (1, 1)
    """
    matrix = np.array(value, dtype=np.float64)
    if matrix.ndim == 0:
        matrix = matrix.reshape(1, 1)
    elif matrix.ndim == 1:
        matrix = matrix.reshape(1, -1)
    elif matrix.ndim != 2:
        raise ShapeError("as_matrix", matrix.shape)
    return matrix


class ParamLeaf():
    """A learnable parameter: its value, its accumulated gradient and a unique
    name."""

    def __init__(self, name: str, value: tp.Any) -> None:
        self.__name = name
        self.value = as_matrix(value)
        self.grad = np.zeros_like(self.value)

    @property
    def name(self) -> str:
        """Unique name of the parameter, e.g., ``extractor/stem_R/weight``."""
        return self.__name

    @property
    def shape(self) -> tp.Tuple[int, int]:
        return tp.cast(tp.Tuple[int, int], self.value.shape)

    def zero_grad(self) -> None:
        """Reset the accumulated gradient to zero."""
        self.grad = np.zeros_like(self.value)

    def __repr__(self) -> str:
        return f"ParamLeaf({self.name}, shape={self.shape})"


def zero_grads(params: tp.Iterable[ParamLeaf]) -> None:
    """Reset the gradients of all ``params``."""
    for param in params:
        param.zero_grad()


class Node():
    """A value computed on a tape."""

    __slots__ = ("value", "grad", "tape", "param", "requires_grad")

    def __init__(
        self,
        value: Matrix,
        tape: 'Tape',
        requires_grad: bool,
        param: tp.Optional[ParamLeaf] = None
    ) -> None:
        self.value = value
        self.grad: tp.Optional[Matrix] = None
        self.tape = tape
        self.param = param
        self.requires_grad = requires_grad

    @property
    def shape(self) -> tp.Tuple[int, int]:
        return tp.cast(tp.Tuple[int, int], self.value.shape)

    def item(self) -> float:
        """Value of a 1x1 node as float."""
        if self.value.shape != (1, 1):
            raise ShapeError("item", self.value.shape)
        return float(self.value[0, 0])

    def accumulate(self, grad: Matrix) -> None:
        if grad.shape != self.value.shape:
            raise ShapeError("accumulate", self.value.shape, grad.shape)
        if self.grad is None:
            self.grad = grad.copy()
        else:
            self.grad += grad


class _Record(tp.NamedTuple):
    name: str
    output: Node
    inputs: tp.Tuple[Node, ...]
    vjp: VJP


class Tape():
    """
    Ordered record of the executed primitives of one forward pass.

    Args:
        grad_enabled: if False, parameters enter the tape as constants and
                      nothing is recorded, e.g., for evaluation
    """

    def __init__(self, grad_enabled: bool = True) -> None:
        self.__grad_enabled = grad_enabled
        self.__records: tp.List[_Record] = []
        self.__leaves: tp.Dict[int, Node] = {}
        self.__backward_order: tp.List[str] = []
        self.__consumed = False

    def param(self, leaf: ParamLeaf) -> Node:
        """
        The node of ``leaf`` on this tape.

        Repeated calls return the same node, so a parameter that is used
        several times, e.g., a shared trunk, accumulates all its gradients.
        """
        node = self.__leaves.get(id(leaf))
        if node is None:
            node = Node(leaf.value, self, self.__grad_enabled, leaf)
            self.__leaves[id(leaf)] = node
        return node

    def constant(self, value: tp.Any) -> Node:
        """A node that does not receive gradients."""
        return Node(as_matrix(value), self, False)

    def record(
        self, name: str, value: Matrix, inputs: tp.Sequence[Node], vjp: VJP
    ) -> Node:
        """
        Record the execution of a primitive.

        Args:
            name: primitive name
            value: the computed output
            inputs: input nodes of the primitive
            vjp: maps the output gradient to one gradient per input

        Returns:
            the output node
        """
        if self.__consumed:
            raise TapeError("Tape was already used for a backward pass")
        for node in inputs:
            if node.tape is not self:
                raise TapeError(f"'{name}' mixes nodes of different tapes")
        requires_grad = any(node.requires_grad for node in inputs)
        output = Node(value, self, requires_grad)
        if requires_grad:
            self.__records.append(_Record(name, output, tuple(inputs), vjp))
        return output

    @property
    def grad_enabled(self) -> bool:
        return self.__grad_enabled

    @property
    def operations(self) -> tp.List[str]:
        """Names of the recorded primitives in execution order."""
        return [record.name for record in self.__records]

    @property
    def backward_order(self) -> tp.List[str]:
        """Names of the primitives in the order the last backward pass visited
        them."""
        return list(self.__backward_order)

    def __len__(self) -> int:
        return len(self.__records)

    def backward(self, loss: Node) -> None:
        """
        Reverse-mode pass from the scalar ``loss``; gradients are added to the
        ``grad`` of every parameter used on this tape.

        Args:
            loss: a 1x1 node recorded on this tape
        """
        if loss.tape is not self:
            raise TapeError("Loss node was not recorded on this tape")
        if self.__consumed:
            raise TapeError("Backward can only run once per tape")
        if loss.value.shape != (1, 1):
            raise ShapeError("backward", loss.value.shape)
        self.__consumed = True

        if not loss.requires_grad:
            LOG.debug("Loss does not depend on any parameter")
            return

        loss.grad = np.ones((1, 1))
        for record in reversed(self.__records):
            self.__backward_order.append(record.name)
            if record.output.grad is None:
                continue
            input_grads = record.vjp(record.output.grad)
            for node, grad in zip(record.inputs, input_grads):
                if grad is not None and node.requires_grad:
                    node.accumulate(grad)

        for node in self.__leaves.values():
            if node.grad is not None and node.param is not None:
                node.param.grad += node.grad
