"""Adaptive first-moment/second-moment gradient optimizer (Adam)."""
import typing as tp

import numpy as np

from ssft.diffcore.tape import Matrix, ParamLeaf, zero_grads


class _Moments():
    """Optimizer state of a single parameter."""

    def __init__(self, shape: tp.Tuple[int, ...]) -> None:
        self.first = np.zeros(shape)
        self.second = np.zeros(shape)
        self.steps = 0


class Adam():
    """
    Adam optimizer over a fixed set of parameters.

    The moment state is kept per :class:`ParamLeaf` and persists across
    calls of :meth:`step`.
    """

    def __init__(
        self,
        params: tp.Sequence[ParamLeaf],
        lr: float,
        betas: tp.Tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8
    ) -> None:
        self.__params = list(params)
        self.lr = float(lr)
        self.__betas = (float(betas[0]), float(betas[1]))
        self.__eps = float(eps)
        self.__state = {
            param.name: _Moments(param.shape) for param in self.__params
        }

    @property
    def params(self) -> tp.List[ParamLeaf]:
        return list(self.__params)

    def zero_grad(self) -> None:
        zero_grads(self.__params)

    def step(self) -> None:
        """In-place update of all parameters from their current gradients."""
        beta1, beta2 = self.__betas
        for param in self.__params:
            state = self.__state[param.name]
            state.steps += 1
            grad = param.grad
            state.first *= beta1
            state.first += (1.0 - beta1) * grad
            state.second *= beta2
            state.second += (1.0 - beta2) * grad * grad
            first_hat = state.first / (1.0 - beta1**state.steps)
            second_hat = state.second / (1.0 - beta2**state.steps)
            param.value -= self.lr * first_hat / (
                np.sqrt(second_hat) + self.__eps
            )

    def moments(self, name: str) -> tp.Tuple[Matrix, Matrix, int]:
        """First moment, second moment and step count of parameter
        ``name``."""
        state = self.__state[name]
        return state.first, state.second, state.steps

    def state_entries(self, prefix: str) -> tp.Dict[str, Matrix]:
        """
        Optimizer state as named matrices, e.g., for checkpoints.

        Args:
            prefix: prepended to every entry name
        """
        entries: tp.Dict[str, Matrix] = {}
        for name, state in self.__state.items():
            entries[f"{prefix}m/{name}"] = state.first.copy()
            entries[f"{prefix}v/{name}"] = state.second.copy()
            entries[f"{prefix}t/{name}"] = np.array([[float(state.steps)]])
        return entries

    def load_state_entries(
        self, prefix: str, entries: tp.Mapping[str, Matrix]
    ) -> None:
        """Inverse of :meth:`state_entries`."""
        for name, state in self.__state.items():
            state.first = np.array(entries[f"{prefix}m/{name}"], copy=True)
            state.second = np.array(entries[f"{prefix}v/{name}"], copy=True)
            state.steps = int(entries[f"{prefix}t/{name}"][0, 0])
