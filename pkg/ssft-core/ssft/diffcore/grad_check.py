"""Finite-difference gradient checker."""
import logging
import typing as tp

import attr
import numpy as np

from ssft.diffcore.tape import Node, ParamLeaf, Tape, zero_grads
from ssft.utils.exceptions import GradCheckFailure

LOG = logging.getLogger(__name__)

FD_STEP = 1e-5
# gradients smaller than this are compared absolutely
SCALE_FLOOR = 1e-3

ScalarFunction = tp.Callable[[Tape], Node]


@attr.s(frozen=True)
class GradCheckReport():
    """Per-parameter maximal relative error between analytic and numeric
    gradients."""

    errors: tp.Dict[str, float] = attr.ib()
    tol: float = attr.ib()

    @property
    def passed(self) -> bool:
        return all(error < self.tol for error in self.errors.values())

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    def failures(self) -> tp.Dict[str, float]:
        """Parameters whose error is not below the tolerance."""
        return {
            name: error
            for name, error in self.errors.items()
            if not error < self.tol
        }


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """
    Maximal entrywise relative error.

    Test:
    >>> relative_error(np.array([[1.0, 0.0]]), np.array([[1.0, 0.0]]))
    0.0
    """
    if analytic.size == 0:
        return 0.0
    scale = np.maximum(
        np.maximum(np.abs(analytic), np.abs(numeric)), SCALE_FLOOR
    )
    return float((np.abs(analytic - numeric) / scale).max())


def _evaluate(func: ScalarFunction, location: str) -> float:
    value = func(Tape()).item()
    if not np.isfinite(value):
        raise GradCheckFailure(location)
    return value


def grad_check(
    func: ScalarFunction,
    params: tp.Sequence[ParamLeaf],
    tol: float = 1e-4,
    step: float = FD_STEP
) -> GradCheckReport:
    """
    Compare the analytic gradients of ``func`` with central differences.

    Args:
        func: deterministic function that builds a scalar node on the given
              tape
        params: parameters to check, perturbed in place one entry at a time
        tol: maximal accepted relative error
        step: finite-difference step

    Returns:
        a report with the maximal relative error per parameter
    """
    zero_grads(params)
    tape = Tape()
    loss = func(tape)
    if not np.isfinite(loss.item()):
        raise GradCheckFailure("loss at the unperturbed point")
    tape.backward(loss)
    for param in params:
        if not np.all(np.isfinite(param.grad)):
            raise GradCheckFailure(f"analytic gradient of '{param.name}'")

    errors: tp.Dict[str, float] = {}
    for param in params:
        numeric = np.zeros_like(param.value)
        for index in np.ndindex(*param.value.shape):
            original = param.value[index]
            location = f"'{param.name}'{list(index)}"
            try:
                param.value[index] = original + step
                upper = _evaluate(func, location)
                param.value[index] = original - step
                lower = _evaluate(func, location)
            finally:
                param.value[index] = original
            numeric[index] = (upper - lower) / (2.0 * step)
        errors[param.name] = relative_error(param.grad, numeric)
        LOG.debug(f"grad check {param.name}: {errors[param.name]:.3e}")

    return GradCheckReport(errors, tol)
