"""Named parameter storage and dense layers."""
import logging
import typing as tp

import numpy as np

from ssft.diffcore import ops
from ssft.diffcore.tape import Matrix, Node, ParamLeaf, Tape
from ssft.utils.exceptions import CheckpointShapeError, SsftError

LOG = logging.getLogger(__name__)

# parameters of the discriminator and the projectors, updated by the
# adversarial (max) step only
ADVERSARY_PREFIX = "adv/"


class ParameterStore():
    """
    Ordered collection of named parameters.

    Names are hierarchical, e.g., ``extractor/trunk_shared/weight``. Every
    name starting with ``adv/`` belongs to the adversary partition, all other
    parameters to the network partition.
    """

    def __init__(self) -> None:
        self.__params: tp.Dict[str, ParamLeaf] = {}

    def add(self, name: str, value: tp.Any) -> ParamLeaf:
        if name in self.__params:
            raise SsftError(f"Parameter '{name}' exists already")
        leaf = ParamLeaf(name, value)
        self.__params[name] = leaf
        return leaf

    def __getitem__(self, name: str) -> ParamLeaf:
        return self.__params[name]

    def __contains__(self, name: object) -> bool:
        return name in self.__params

    def __iter__(self) -> tp.Iterator[ParamLeaf]:
        return iter(self.__params.values())

    def __len__(self) -> int:
        return len(self.__params)

    def names(self) -> tp.List[str]:
        return list(self.__params.keys())

    def network_params(self) -> tp.List[ParamLeaf]:
        """Parameters updated by the minimization step."""
        return [
            leaf for name, leaf in self.__params.items()
            if not name.startswith(ADVERSARY_PREFIX)
        ]

    def adversary_params(self) -> tp.List[ParamLeaf]:
        """Parameters updated by the maximization step."""
        return [
            leaf for name, leaf in self.__params.items()
            if name.startswith(ADVERSARY_PREFIX)
        ]

    def entries(self) -> tp.Dict[str, Matrix]:
        """Copies of all parameter values by name."""
        return {
            name: leaf.value.copy() for name, leaf in self.__params.items()
        }

    def load_entries(self, entries: tp.Mapping[str, Matrix]) -> None:
        """
        Overwrite all parameter values from ``entries``.

        Every parameter of this store has to be present with its exact shape.
        """
        for name, leaf in self.__params.items():
            if name not in entries:
                raise CheckpointShapeError(name, leaf.shape, ())
            value = np.asarray(entries[name], dtype=np.float64)
            if value.shape != leaf.shape:
                raise CheckpointShapeError(name, leaf.shape, value.shape)
            leaf.value[...] = value

    def n_values(self) -> int:
        """Total number of scalar parameters."""
        return sum(leaf.value.size for leaf in self.__params.values())


def add_linear(
    store: ParameterStore, name: str, fan_in: int, fan_out: int,
    rng: np.random.Generator
) -> None:
    """
    Register weight and bias of a dense layer; weights are uniform in
    ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]``, biases zero.
    """
    bound = 1.0 / np.sqrt(fan_in)
    store.add(f"{name}/weight", rng.uniform(-bound, bound, (fan_in, fan_out)))
    store.add(f"{name}/bias", np.zeros((1, fan_out)))


def add_linear_copies(
    store: ParameterStore, names: tp.Sequence[str], fan_in: int,
    fan_out: int, rng: np.random.Generator
) -> None:
    """
    Register one dense layer per name; all of them start from the same
    initial values but are trained independently.
    """
    bound = 1.0 / np.sqrt(fan_in)
    weight = rng.uniform(-bound, bound, (fan_in, fan_out))
    for name in names:
        store.add(f"{name}/weight", weight.copy())
        store.add(f"{name}/bias", np.zeros((1, fan_out)))


def add_matrix(
    store: ParameterStore, name: str, rows: int, cols: int,
    rng: np.random.Generator
) -> None:
    """Register a bias free ``rows x cols`` map."""
    bound = 1.0 / np.sqrt(rows)
    store.add(name, rng.uniform(-bound, bound, (rows, cols)))


def linear(tape: Tape, store: ParameterStore, name: str, inputs: Node) -> Node:
    """Apply the dense layer ``name`` to every row of ``inputs``."""
    weight = tape.param(store[f"{name}/weight"])
    bias = tape.param(store[f"{name}/bias"])
    return ops.bias_add(ops.matmul(inputs, weight), bias)


def linear_relu(
    tape: Tape, store: ParameterStore, name: str, inputs: Node
) -> Node:
    return ops.relu(linear(tape, store, name, inputs))
