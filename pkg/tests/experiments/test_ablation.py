"""Test the ablation study runner."""

import unittest

import pytest

from ssft.base.configuration import ABLATION_ROWS
from ssft.experiments.ablation import AblationRowResult, parse_row, run_ablation
from ssft.utils.exceptions import ConfigValidationError
from tests.test_utils import tiny_datasets, tiny_run_config


class TestParseRow(unittest.TestCase):
    """Row numbers and component label combinations."""

    def test_row_number(self) -> None:
        name, switches = parse_row(" 7 ")

        self.assertEqual(name, "7")
        self.assertEqual(switches, ABLATION_ROWS[7])

    def test_labels(self) -> None:
        _, switches = parse_row("ShL+SpL+SaS+ShT")

        self.assertEqual(switches.labels(), ["ShL", "SpL", "SaS", "ShT"])
        self.assertFalse(switches.moa)

    def test_unknown_row(self) -> None:
        with self.assertRaises(ConfigValidationError):
            parse_row("13")

    def test_unknown_label(self) -> None:
        with self.assertRaises(ConfigValidationError) as context:
            parse_row("ShL+XyZ")
        self.assertIn("XyZ", context.exception.violations[0])

    def test_rule_violation(self) -> None:
        """SpT needs the specific stream."""
        with self.assertRaises(ConfigValidationError):
            parse_row("ShL+SpT")


class TestAblationRowResult(unittest.TestCase):

    def test_medians(self) -> None:
        result = AblationRowResult(
            "1", ABLATION_ROWS[1], [0, 1, 2], [0.1, 0.5, 0.3], [0.2, 0.4, 0.9]
        )

        self.assertEqual(result.median_r1, 0.3)
        self.assertEqual(result.median_map, 0.4)


class TestRunAblation(unittest.TestCase):
    """Complete tiny ablation runs."""

    @classmethod
    def setUpClass(cls) -> None:
        cls.run_config = tiny_run_config(
            schedule={
                "epochs": 1,
                "batches_per_epoch": 2,
                "decay_epochs": []
            }
        )
        cls.train_set, cls.test_set = tiny_datasets(cls.run_config)

    def test_rows_and_seeds(self) -> None:
        results = run_ablation(
            self.run_config, self.train_set, self.test_set, ["12", "1"],
            [0, 1]
        )

        self.assertEqual([result.row for result in results], ["12", "1"])
        self.assertEqual(results[1].switches, ABLATION_ROWS[1])
        for result in results:
            self.assertEqual(result.seeds, (0, 1))
            self.assertEqual(len(result.r1), 2)
            self.assertTrue(all(0.0 <= value <= 1.0 for value in result.maps))

    def test_repeated_rows_are_rejected(self) -> None:
        """Rows equal after stripping would share their results."""
        with self.assertRaises(ConfigValidationError) as context:
            run_ablation(
                self.run_config, self.train_set, self.test_set,
                ["1", " 1 ", "12"], [0]
            )

        self.assertEqual(
            context.exception.violations,
            ["ablation row '1' is given more than once"]
        )

    def test_repeated_seeds_are_rejected(self) -> None:
        with self.assertRaises(ConfigValidationError):
            run_ablation(
                self.run_config, self.train_set, self.test_set, ["1"], [2, 2]
            )

    def test_reproducible(self) -> None:
        first = run_ablation(
            self.run_config, self.train_set, self.test_set, ["6"], [3]
        )
        second = run_ablation(
            self.run_config, self.train_set, self.test_set, ["6"], [3]
        )

        self.assertEqual(first[0].maps, second[0].maps)

    @pytest.mark.slow
    def test_worker_pool(self) -> None:
        """Worker processes produce the results of a sequential run."""
        sequential = run_ablation(
            self.run_config, self.train_set, self.test_set, ["9", "12"], [0]
        )
        parallel = run_ablation(
            self.run_config,
            self.train_set,
            self.test_set, ["9", "12"], [0],
            workers=2
        )

        for seq, par in zip(sequential, parallel):
            self.assertEqual(seq.r1, par.r1)
            self.assertEqual(seq.maps, par.maps)
