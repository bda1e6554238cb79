"""Finite-difference checks of the primitives."""

import typing as tp
import unittest

import numpy as np

from ssft.diffcore import ops
from ssft.diffcore.grad_check import grad_check, relative_error
from ssft.diffcore.tape import Node, ParamLeaf, Tape
from ssft.utils.exceptions import GradCheckFailure


def _leaf(name: str, rows: int, cols: int, seed: int) -> ParamLeaf:
    return ParamLeaf(
        name, np.random.default_rng(seed).normal(size=(rows, cols))
    )


class TestPrimitiveGradients(unittest.TestCase):
    """Analytic vs central-difference gradients of every primitive."""

    def __check(
        self, func: tp.Callable[[Tape], Node], params: tp.List[ParamLeaf]
    ) -> None:
        report = grad_check(func, params)
        self.assertTrue(report.passed, report.failures())

    def test_matmul_bias(self) -> None:
        x, w, b = _leaf("x", 3, 4, 0), _leaf("w", 4, 2, 1), _leaf("b", 1, 2, 2)

        def func(tape: Tape) -> Node:
            out = ops.bias_add(
                ops.matmul(tape.param(x), tape.param(w)), tape.param(b)
            )
            return ops.reduce_sum(ops.multiply(out, out))

        self.__check(func, [x, w, b])

    def test_pairwise_distances(self) -> None:
        a, b = _leaf("a", 3, 2, 3), _leaf("b", 4, 2, 4)

        def func(tape: Tape) -> Node:
            return ops.reduce_mean(
                ops.sqrt(ops.pairwise_sq_distances(tape.param(a),
                                                   tape.param(b)))
            )

        self.__check(func, [a, b])

    def test_normalization(self) -> None:
        a = _leaf("a", 3, 4, 5)
        target = np.random.default_rng(6).normal(size=(3, 4))

        def func(tape: Tape) -> Node:
            unit = ops.l2_normalize_rows(tape.param(a))
            return ops.add(
                ops.reduce_sum(ops.multiply(unit, tape.constant(target))),
                ops.reduce_mean(ops.row_norms(tape.param(a)))
            )

        self.__check(func, [a])

    def test_cross_entropy_and_gather(self) -> None:
        logits = _leaf("logits", 4, 3, 7)

        def func(tape: Tape) -> Node:
            node = tape.param(logits)
            picked = ops.gather(node, [0, 1, 3], [2, 0, 1])
            return ops.add(
                ops.softmax_cross_entropy(node, [0, 2, 1, 1]),
                ops.reduce_sum(ops.hinge(ops.add_scalar(picked, 0.5)))
            )

        self.__check(func, [logits])

    def test_concat_and_slices(self) -> None:
        a, b = _leaf("a", 2, 3, 8), _leaf("b", 2, 2, 9)

        def func(tape: Tape) -> Node:
            wide = ops.concat_columns(tape.param(a), tape.param(b))
            tall = ops.concat_rows(wide, ops.scale(wide, -2.0))
            part = ops.row_slice(tall, 1, 3)
            return ops.reduce_sum(
                ops.multiply(part, ops.add_scalar(part, -1.0))
            )

        self.__check(func, [a, b])


Trial = tp.Tuple[tp.Callable[[Tape], Node], tp.List[ParamLeaf]]


def _away_from_zero(rng: np.random.Generator, rows: int,
                    cols: int) -> np.ndarray:
    """Normal entries pushed at least 0.1 away from zero."""
    values = rng.normal(size=(rows, cols))
    return np.where(values < 0, values - 0.1, values + 0.1)


def _readout(node: Node) -> Node:
    """Scalar with a non constant upstream gradient."""
    return ops.reduce_sum(ops.multiply(node, ops.add_scalar(node, 0.7)))


class TestRandomTrials(unittest.TestCase):
    """Every primitive on 20 random shapes and values."""

    TRIALS = 20

    def __trials(
        self, seed: int, make: tp.Callable[[np.random.Generator], Trial]
    ) -> None:
        for trial in range(self.TRIALS):
            rng = np.random.default_rng([seed, trial])
            func, params = make(rng)
            report = grad_check(func, params)
            self.assertTrue(
                report.passed, f"trial {trial}: {report.failures()}"
            )

    @staticmethod
    def __dims(rng: np.random.Generator, count: int) -> tp.List[int]:
        return [int(dim) for dim in rng.integers(1, 5, size=count)]

    def test_matmul(self) -> None:

        def make(rng: np.random.Generator) -> Trial:
            n, m, k = self.__dims(rng, 3)
            a = ParamLeaf("a", rng.normal(size=(n, m)))
            b = ParamLeaf("b", rng.normal(size=(m, k)))
            return lambda tape: _readout(
                ops.matmul(tape.param(a), tape.param(b))
            ), [a, b]

        self.__trials(1, make)

    def test_elementwise(self) -> None:
        """add, subtract, multiply, scale and add_scalar."""

        def make(rng: np.random.Generator) -> Trial:
            n, m = self.__dims(rng, 2)
            a = ParamLeaf("a", rng.normal(size=(n, m)))
            b = ParamLeaf("b", rng.normal(size=(n, m)))
            factor = float(rng.normal())

            def func(tape: Tape) -> Node:
                a_node, b_node = tape.param(a), tape.param(b)
                return _readout(
                    ops.add(
                        ops.multiply(a_node, ops.scale(b_node, factor)),
                        ops.add_scalar(ops.subtract(a_node, b_node), 0.3)
                    )
                )

            return func, [a, b]

        self.__trials(2, make)

    def test_reductions(self) -> None:

        def make(rng: np.random.Generator) -> Trial:
            n, m = self.__dims(rng, 2)
            a = ParamLeaf("a", rng.normal(size=(n, m)))
            return lambda tape: _readout(
                ops.add(
                    ops.reduce_mean(tape.param(a)),
                    ops.scale(ops.reduce_sum(tape.param(a)), 0.5)
                )
            ), [a]

        self.__trials(3, make)

    def test_concat_and_slice(self) -> None:

        def make(rng: np.random.Generator) -> Trial:
            n, m, k = self.__dims(rng, 3)
            a = ParamLeaf("a", rng.normal(size=(n, m)))
            b = ParamLeaf("b", rng.normal(size=(n, k)))
            start = int(rng.integers(0, 2 * n))
            stop = int(rng.integers(start + 1, 2 * n + 1))

            def func(tape: Tape) -> Node:
                wide = ops.concat_columns(tape.param(a), tape.param(b))
                tall = ops.concat_rows(wide, ops.scale(wide, -1.5))
                return _readout(ops.row_slice(tall, start, stop))

            return func, [a, b]

        self.__trials(4, make)

    def test_pairwise_sq_distances(self) -> None:

        def make(rng: np.random.Generator) -> Trial:
            n, m, k = self.__dims(rng, 3)
            a = ParamLeaf("a", rng.normal(size=(n, k)))
            b = ParamLeaf("b", rng.normal(size=(m, k)))
            return lambda tape: _readout(
                ops.pairwise_sq_distances(tape.param(a), tape.param(b))
            ), [a, b]

        self.__trials(5, make)

    def test_sqrt(self) -> None:

        def make(rng: np.random.Generator) -> Trial:
            n, m = self.__dims(rng, 2)
            a = ParamLeaf("a", 0.2 + np.abs(rng.normal(size=(n, m))))
            return lambda tape: _readout(ops.sqrt(tape.param(a))), [a]

        self.__trials(6, make)

    def test_relu(self) -> None:

        def make(rng: np.random.Generator) -> Trial:
            n, m = self.__dims(rng, 2)
            a = ParamLeaf("a", _away_from_zero(rng, n, m))
            return lambda tape: _readout(ops.relu(tape.param(a))), [a]

        self.__trials(7, make)

    def test_hinge(self) -> None:

        def make(rng: np.random.Generator) -> Trial:
            n, m = self.__dims(rng, 2)
            a = ParamLeaf("a", _away_from_zero(rng, n, m))
            return lambda tape: _readout(ops.hinge(tape.param(a))), [a]

        self.__trials(8, make)

    def test_bias_add(self) -> None:

        def make(rng: np.random.Generator) -> Trial:
            n, m = self.__dims(rng, 2)
            a = ParamLeaf("a", rng.normal(size=(n, m)))
            b = ParamLeaf("b", rng.normal(size=(1, m)))
            return lambda tape: _readout(
                ops.bias_add(tape.param(a), tape.param(b))
            ), [a, b]

        self.__trials(9, make)

    def test_row_norms_and_normalization(self) -> None:

        def make(rng: np.random.Generator) -> Trial:
            n, m = self.__dims(rng, 2)
            a = ParamLeaf("a", _away_from_zero(rng, n, m))
            return lambda tape: ops.add(
                _readout(ops.l2_normalize_rows(tape.param(a))),
                _readout(ops.row_norms(tape.param(a)))
            ), [a]

        self.__trials(10, make)

    def test_softmax_cross_entropy(self) -> None:

        def make(rng: np.random.Generator) -> Trial:
            n, m = self.__dims(rng, 2)
            logits = ParamLeaf("logits", 2.0 * rng.normal(size=(n, m + 1)))
            labels = rng.integers(0, m + 1, size=n)
            return lambda tape: ops.softmax_cross_entropy(
                tape.param(logits), labels
            ), [logits]

        self.__trials(11, make)

    def test_gather(self) -> None:
        """Repeated index pairs accumulate."""

        def make(rng: np.random.Generator) -> Trial:
            n, m, k = self.__dims(rng, 3)
            a = ParamLeaf("a", rng.normal(size=(n, m)))
            rows = rng.integers(0, n, size=2 * k)
            cols = rng.integers(0, m, size=2 * k)
            return lambda tape: _readout(
                ops.gather(tape.param(a), rows, cols)
            ), [a]

        self.__trials(12, make)


class TestGradCheck(unittest.TestCase):
    """Behavior of the checker itself."""

    def test_detects_wrong_gradient(self) -> None:
        """A primitive with a wrong vector-Jacobian product fails."""
        leaf = _leaf("x", 2, 2, 10)

        def func(tape: Tape) -> Node:
            node = tape.param(leaf)
            doubled = tape.record(
                "wrong", node.value * 2.0, (node,), lambda g: (g,)
            )
            return ops.reduce_sum(doubled)

        report = grad_check(func, [leaf])

        self.assertFalse(report.passed)
        self.assertIn("x", report.failures())

    def test_parameters_are_restored(self) -> None:
        leaf = _leaf("x", 2, 3, 11)
        before = leaf.value.copy()

        grad_check(lambda tape: ops.reduce_sum(tape.param(leaf)), [leaf])

        np.testing.assert_array_equal(leaf.value, before)

    def test_non_finite_loss(self) -> None:
        leaf = ParamLeaf("x", [[0.0]])

        def func(tape: Tape) -> Node:
            node = tape.param(leaf)
            return tape.record("inf", node.value + np.inf, (node,),
                               lambda g: (g,))

        with self.assertRaises(GradCheckFailure):
            grad_check(func, [leaf])

    def test_relative_error_floor(self) -> None:
        """Tiny gradients are compared absolutely."""
        self.assertLess(
            relative_error(np.array([[1e-9]]), np.array([[0.0]])), 1e-4
        )
