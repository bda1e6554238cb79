"""Trends of the default synthetic benchmark over five training seeds."""

import typing as tp
import unittest

import attr
import numpy as np
import pytest

from ssft.base.configuration import ABLATION_ROWS, RunConfig
from ssft.data.generator import generate
from ssft.evaluation.evaluator import (
    RetrievalEvaluator,
    aux_sweep,
    split_direction,
)
from ssft.training.trainer import train

ROWS = (1, 10, 11, 12)
FULL_MODEL = 12
BASELINE = 1


@pytest.mark.slow
class TestBenchmarkTrends(unittest.TestCase):
    """Every row is trained once per seed; the tests compare medians."""

    all_queries: tp.Dict[int, tp.List[float]]
    single_query: tp.Dict[int, tp.List[float]]
    sweeps: tp.List[tp.Dict[int, float]]
    reconstruction: tp.List[tp.Tuple[float, float]]

    @classmethod
    def setUpClass(cls) -> None:
        run_config = RunConfig()
        train_set, test_set = generate(run_config.generator)
        query_set, gallery_set = split_direction(
            test_set, run_config.eval.direction
        )

        cls.all_queries = {row: [] for row in ROWS}
        cls.single_query = {row: [] for row in ROWS}
        cls.sweeps = []
        cls.reconstruction = []
        for row in ROWS:
            for seed in run_config.eval.seeds:
                config = attr.evolve(
                    run_config, ablation=ABLATION_ROWS[row], seed=seed
                )
                result = train(train_set, config, show_progress=False)
                network = result.state.network
                evaluator = RetrievalEvaluator(
                    network, query_set, gallery_set, config.eval.k,
                    config.eval.feature
                )
                cls.all_queries[row].append(
                    evaluator.evaluate_all_queries().map
                )
                cls.single_query[row].append(
                    evaluator.evaluate_single_query().map
                )
                if row != FULL_MODEL:
                    continue

                sweep: tp.Dict[int, float] = {}
                for count, report in aux_sweep(
                    network, query_set, gallery_set, config.eval.aux_sizes,
                    config.eval.aux_trials, seed, config.eval.k,
                    config.eval.feature
                ):
                    # the single-query entry follows the size 1 grouping
                    sweep.setdefault(count, report.map)
                cls.sweeps.append(sweep)

                epochs = [entry["epoch"] for entry in result.history]
                re_values = np.array([
                    entry["L_re"] for entry in result.history
                ])
                cls.reconstruction.append((
                    float(re_values[np.equal(epochs, min(epochs))].mean()),
                    float(re_values[np.equal(epochs, max(epochs))].mean())
                ))

    @staticmethod
    def __median(values: tp.Sequence[float]) -> float:
        return float(np.median(values))

    def test_full_model_beats_baseline(self) -> None:
        """At least five mAP points over the shared-only row."""
        self.assertGreaterEqual(
            self.__median(self.all_queries[FULL_MODEL]),
            self.__median(self.all_queries[BASELINE]) + 0.05
        )

    def test_full_model_beats_partial_transfer(self) -> None:
        full = self.__median(self.all_queries[FULL_MODEL])

        self.assertGreaterEqual(full, self.__median(self.all_queries[10]))
        self.assertGreaterEqual(full, self.__median(self.all_queries[11]))

    def test_single_query_trend(self) -> None:
        self.assertLessEqual(
            self.__median(self.single_query[FULL_MODEL]),
            self.__median(self.all_queries[FULL_MODEL])
        )
        self.assertGreaterEqual(
            self.__median(self.single_query[FULL_MODEL]),
            self.__median(self.single_query[BASELINE])
        )

    def test_aux_sweep_saturates(self) -> None:
        """mAP grows with the auxiliary set and most of the gain is reached
        at half of the queries."""
        counts = sorted(self.sweeps[0])
        medians = [
            self.__median([sweep[count] for sweep in self.sweeps])
            for count in counts
        ]
        self.assertEqual(len(counts), 4)
        for smaller, larger in zip(medians, medians[1:]):
            self.assertGreaterEqual(larger, smaller)

        one, _, half, full = medians
        self.assertLess(full - half, half - one)

    def test_reconstruction_halves(self) -> None:
        """Mean L_re of the last epoch is below half of the first epoch's."""
        for seed, (first, last) in enumerate(self.reconstruction):
            self.assertLess(last, 0.5 * first, f"seed {seed}")
