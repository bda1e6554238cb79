"""Test the retrieval protocols."""

import tempfile
import unittest
from pathlib import Path

import numpy as np

from ssft.base.configuration import ABLATION_ROWS, AblationSwitches
from ssft.data.sample_set import Modality
from ssft.evaluation.evaluator import (
    RetrievalEvaluator,
    aux_sweep,
    evaluate_all_queries,
    resolve_aux_size,
    split_direction,
)
from ssft.evaluation.reconstruction import (
    VARIANTS,
    reconstruction_report,
)
from ssft.evaluation.report import ALL_QUERIES, SINGLE_QUERY
from ssft.model.network import SsftNetwork
from ssft.utils.exceptions import ConfigurationError
from tests.test_utils import tiny_datasets, tiny_run_config


def _network(switches: AblationSwitches = AblationSwitches()) -> SsftNetwork:
    run_config = tiny_run_config()
    train_set, _ = tiny_datasets(run_config)
    return SsftNetwork.create(
        run_config.model, switches, train_set.d_in,
        sorted(train_set.identity_set()), np.random.default_rng(0)
    )


class TestRetrievalEvaluator(unittest.TestCase):
    """All-queries, single-query and auxiliary set protocols."""

    @classmethod
    def setUpClass(cls) -> None:
        _, cls.test_set = tiny_datasets()
        cls.network = _network()
        cls.query_set, cls.gallery_set = split_direction(cls.test_set, "r2i")

    def test_split_direction(self) -> None:
        query_set, gallery_set = split_direction(self.test_set, "i2r")

        self.assertEqual(set(query_set.modalities), {Modality.I})
        self.assertEqual(set(gallery_set.modalities), {Modality.R})
        with self.assertRaises(ConfigurationError):
            split_direction(self.test_set, "r2r")

    def test_all_queries_report(self) -> None:
        report = evaluate_all_queries(
            self.network, self.query_set, self.gallery_set, 2
        )

        self.assertEqual(report.mode, ALL_QUERIES)
        self.assertEqual(report.n_query, 16)
        self.assertEqual(report.n_gallery, 16)
        self.assertEqual(len(report.cmc), 16)
        self.assertTrue(np.all(np.diff(report.cmc) >= 0))
        self.assertEqual(report.cmc[-1], 1.0)
        self.assertTrue(0.0 < report.map <= 1.0)

    def test_both_directions(self) -> None:
        for direction in ("r2i", "i2r"):
            query_set, gallery_set = split_direction(self.test_set, direction)
            report = evaluate_all_queries(
                self.network, query_set, gallery_set, 2
            )
            self.assertEqual(report.direction, direction)

    def test_network_unchanged(self) -> None:
        before = self.network.store.entries()
        evaluator = RetrievalEvaluator(
            self.network, self.query_set, self.gallery_set, 2
        )
        evaluator.evaluate_all_queries()
        evaluator.evaluate_single_query()

        for name, value in self.network.store.entries().items():
            np.testing.assert_array_equal(before[name], value, err_msg=name)

    def test_full_aux_set_equals_all_queries(self) -> None:
        """One group of all queries is the all-queries protocol."""
        evaluator = RetrievalEvaluator(
            self.network, self.query_set, self.gallery_set, 2
        )
        all_queries = evaluator.evaluate_all_queries()
        full_aux = evaluator.evaluate_with_aux_set(
            evaluator.n_query, np.random.default_rng(3)
        )

        self.assertEqual(full_aux.cmc, all_queries.cmc)
        self.assertEqual(full_aux.map, all_queries.map)

    def test_single_query(self) -> None:
        report = RetrievalEvaluator(
            self.network, self.query_set, self.gallery_set, 2
        ).evaluate_single_query()

        self.assertEqual(report.mode, SINGLE_QUERY)
        self.assertEqual(report.aux_size, 1)
        self.assertEqual(report.cmc[-1], 1.0)

    def test_without_transfer(self) -> None:
        """Without a transfer network both protocols rank the same shared
        features."""
        evaluator = RetrievalEvaluator(
            _network(ABLATION_ROWS[6]), self.query_set, self.gallery_set, 2
        )
        all_queries = evaluator.evaluate_all_queries()
        single = evaluator.evaluate_single_query()

        self.assertFalse(evaluator.uses_transfer)
        self.assertIsNone(evaluator.affinity())
        self.assertEqual(all_queries.cmc, single.cmc)
        self.assertEqual(all_queries.map, single.map)

    def test_shared_feature(self) -> None:
        evaluator = RetrievalEvaluator(
            self.network, self.query_set, self.gallery_set, 2, "shared"
        )

        self.assertFalse(evaluator.uses_transfer)
        self.assertEqual(evaluator.evaluate_all_queries().feature, "shared")

    def test_concat_feature(self) -> None:
        report = RetrievalEvaluator(
            self.network, self.query_set, self.gallery_set, 2, "concat"
        ).evaluate_all_queries()

        self.assertEqual(report.feature, "concat")
        self.assertEqual(report.cmc[-1], 1.0)

    def test_affinity_layout(self) -> None:
        """RGB rows come first, whatever the query modality."""
        query_set, gallery_set = split_direction(self.test_set, "i2r")
        affinity = RetrievalEvaluator(
            self.network, query_set, gallery_set, 2
        ).affinity()

        self.assertEqual(affinity.matrix.shape, (32, 32))
        self.assertEqual(affinity.modalities[0], Modality.R)
        self.assertEqual(affinity.modalities[-1], Modality.I)

    def test_invalid_sets(self) -> None:
        with self.assertRaises(ConfigurationError):
            RetrievalEvaluator(
                self.network, self.query_set, self.query_set, 2
            )
        with self.assertRaises(ConfigurationError):
            RetrievalEvaluator(
                self.network, self.test_set, self.gallery_set, 2
            )
        with self.assertRaises(ConfigurationError):
            RetrievalEvaluator(
                self.network, self.query_set, self.gallery_set, 0
            )

    def test_aux_size_bounds(self) -> None:
        evaluator = RetrievalEvaluator(
            self.network, self.query_set, self.gallery_set, 2
        )

        with self.assertRaises(ConfigurationError):
            evaluator.evaluate_with_aux_set(0, np.random.default_rng(0))
        with self.assertRaises(ConfigurationError):
            evaluator.evaluate_with_aux_set(17, np.random.default_rng(0))


class TestAuxSweep(unittest.TestCase):
    """Sweep over the auxiliary set size."""

    @classmethod
    def setUpClass(cls) -> None:
        _, test_set = tiny_datasets()
        cls.network = _network()
        cls.query_set, cls.gallery_set = split_direction(test_set, "r2i")

    def test_sorted_sizes_with_single_query(self) -> None:
        results = aux_sweep(
            self.network, self.query_set, self.gallery_set,
            ["all", "1", "50%"], 2, 0, 2
        )

        self.assertEqual([size for size, _ in results], [1, 1, 8, 16])
        self.assertEqual(results[0][1].mode, ALL_QUERIES)
        self.assertEqual(results[1][1].mode, SINGLE_QUERY)

    def test_full_size_single_trial(self) -> None:
        results = aux_sweep(
            self.network, self.query_set, self.gallery_set, ["all"], 1, 0, 2
        )
        all_queries = evaluate_all_queries(
            self.network, self.query_set, self.gallery_set, 2
        )

        self.assertEqual(results[0][1].map, all_queries.map)

    def test_deterministic(self) -> None:
        first = aux_sweep(
            self.network, self.query_set, self.gallery_set, ["4"], 3, 5, 2
        )
        second = aux_sweep(
            self.network, self.query_set, self.gallery_set, ["4"], 3, 5, 2
        )

        self.assertEqual(first[0][1].map, second[0][1].map)

    def test_no_trials(self) -> None:
        with self.assertRaises(ConfigurationError):
            aux_sweep(
                self.network, self.query_set, self.gallery_set, ["1"], 0, 0,
                2
            )


class TestResolveAuxSize(unittest.TestCase):
    """Counts, percentages and ``all``."""

    def test_values(self) -> None:
        self.assertEqual(resolve_aux_size("3", 10), 3)
        self.assertEqual(resolve_aux_size("50%", 10), 5)
        self.assertEqual(resolve_aux_size("1%", 10), 1)
        self.assertEqual(resolve_aux_size("all", 10), 10)

    def test_invalid(self) -> None:
        for size in ("0", "11", "abc", "200%"):
            with self.subTest(size=size):
                with self.assertRaises(ConfigurationError):
                    resolve_aux_size(size, 10)


class TestReconstruction(unittest.TestCase):
    """Reconstruction errors of partial decoder inputs."""

    def test_report(self) -> None:
        _, test_set = tiny_datasets()
        report = reconstruction_report(_network(), test_set)
        errors = report.to_dict()

        self.assertEqual(set(errors), {"R", "I"})
        for variants in errors.values():
            self.assertEqual(set(variants), {name for name, _, _ in VARIANTS})
            self.assertTrue(all(np.isfinite(list(variants.values()))))

        with tempfile.TemporaryDirectory() as tmp_dir:
            path = Path(tmp_dir) / "reconstruction.json"
            report.save(path)
            self.assertTrue(path.exists())

    def test_without_decoders(self) -> None:
        _, test_set = tiny_datasets()

        with self.assertRaises(ConfigurationError):
            reconstruction_report(_network(ABLATION_ROWS[5]), test_set)
