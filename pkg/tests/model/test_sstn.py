"""Test the affinity graphs and the feature propagation."""

import typing as tp
import unittest

import numpy as np

from ssft.base.configuration import ModelConfig
from ssft.data.sample_set import Modality
from ssft.diffcore.tape import Tape
from ssft.model import sstn
from ssft.model.extractor import FeatureBundle
from ssft.model.parameters import ParameterStore
from ssft.utils.exceptions import ConfigurationError, ShapeError


def _bundle(
    tape: Tape,
    modality: Modality,
    rng: np.random.Generator,
    rows: int,
    d_h: int = 4,
    d_p: tp.Optional[int] = 3
) -> FeatureBundle:
    specific = None
    if d_p is not None:
        specific = tape.constant(rng.normal(size=(rows, d_p)))
    return FeatureBundle(
        modality, tape.constant(rng.normal(size=(rows, d_h))), specific,
        np.arange(rows)
    )


def _oracle_topk_block(rows: np.ndarray, cols: np.ndarray,
                       k: int) -> np.ndarray:
    """Per-row brute force: all similarities, sorted, the first k kept."""
    block = np.zeros((len(rows), len(cols)))
    for i, row in enumerate(rows):
        scored = [(sstn.normalized_distance(row, col), j)
                  for j, col in enumerate(cols)]
        scored.sort(key=lambda entry: (-entry[0], entry[1]))
        for value, j in scored[:k]:
            block[i, j] = value
    return block


class TestAffinity(unittest.TestCase):
    """Top-k sparsified block affinities."""

    def test_matches_brute_force(self) -> None:
        """20 random instances against per-row sorting."""
        for seed in range(20):
            rng = np.random.default_rng(seed)
            tape = Tape()
            k = int(rng.integers(1, 5))
            rgb = _bundle(tape, Modality.R, rng, int(rng.integers(1, 7)))
            ir = _bundle(tape, Modality.I, rng, int(rng.integers(1, 7)))

            aff = sstn.build_affinity(rgb, ir, k)
            n_r = len(rgb)
            expected = np.block([
                [
                    _oracle_topk_block(rgb.specific.value,
                                       rgb.specific.value, k),
                    _oracle_topk_block(rgb.shared.value, ir.shared.value, k)
                ],
                [
                    _oracle_topk_block(ir.shared.value, rgb.shared.value, k),
                    _oracle_topk_block(ir.specific.value,
                                       ir.specific.value, k)
                ],
            ])
            np.testing.assert_allclose(
                aff.matrix, expected, rtol=0.0, atol=1e-12
            )

            blocks = [
                aff.matrix[:n_r, :n_r], aff.matrix[:n_r, n_r:],
                aff.matrix[n_r:, :n_r], aff.matrix[n_r:, n_r:]
            ]
            for block in blocks:
                self.assertTrue(np.all((block != 0).sum(axis=1) <= k))
            self.assertTrue(np.all(np.diag(aff.matrix) > 0))

    def test_block_layout(self) -> None:
        rng = np.random.default_rng(3)
        tape = Tape()
        aff = sstn.build_affinity(
            _bundle(tape, Modality.R, rng, 3), _bundle(tape, Modality.I, rng,
                                                       2), 2
        )

        self.assertEqual(aff.matrix.shape, (5, 5))
        self.assertEqual(
            aff.modalities, (Modality.R,) * 3 + (Modality.I,) * 2
        )

    def test_similarity_range(self) -> None:
        rng = np.random.default_rng(4)
        sims = sstn.similarity_matrix(
            rng.normal(size=(5, 3)), rng.normal(size=(6, 3))
        )

        self.assertTrue(np.all(sims >= 0.0))
        self.assertTrue(np.all(sims <= 1.0))

    def test_shared_fallback_without_specific_stream(self) -> None:
        """Without specific features, shared features define the intra
        blocks."""
        rng = np.random.default_rng(5)
        tape = Tape()
        rgb = _bundle(tape, Modality.R, rng, 3, d_p=None)
        ir = _bundle(tape, Modality.I, rng, 3, d_p=None)
        aff = sstn.build_affinity(rgb, ir, 2)

        np.testing.assert_allclose(
            aff.matrix[:3, :3],
            _oracle_topk_block(rgb.shared.value, rgb.shared.value, 2)
        )

    def test_k_zero(self) -> None:
        rng = np.random.default_rng(6)
        tape = Tape()
        with self.assertRaises(ConfigurationError):
            sstn.build_affinity(
                _bundle(tape, Modality.R, rng, 2),
                _bundle(tape, Modality.I, rng, 2), 0
            )

    def test_empty_modality(self) -> None:
        rng = np.random.default_rng(7)
        tape = Tape()
        with self.assertRaises(ConfigurationError):
            sstn.build_affinity(
                _bundle(tape, Modality.R, rng, 2),
                _bundle(tape, Modality.I, rng, 0), 1
            )

    def test_modalities_swapped(self) -> None:
        rng = np.random.default_rng(8)
        tape = Tape()
        with self.assertRaises(ConfigurationError):
            sstn.build_affinity(
                _bundle(tape, Modality.I, rng, 2),
                _bundle(tape, Modality.R, rng, 2), 1
            )

    def test_symmetric_normalization(self) -> None:
        rng = np.random.default_rng(9)
        tape = Tape()
        aff = sstn.build_affinity(
            _bundle(tape, Modality.R, rng, 4), _bundle(tape, Modality.I, rng,
                                                       4), 2
        )
        normalized = aff.normalized()
        degrees = aff.degrees

        for i in range(8):
            for j in range(8):
                self.assertAlmostEqual(
                    normalized[i, j],
                    aff.matrix[i, j] / np.sqrt(degrees[i] * degrees[j])
                )


def _permuted(tape: Tape, bundle: FeatureBundle,
              order: np.ndarray) -> FeatureBundle:
    return FeatureBundle(
        bundle.modality, tape.constant(bundle.shared.value[order]),
        tape.constant(bundle.specific.value[order]),
        bundle.identities[order]
    )


def _with_zeroed(tape: Tape, bundle: FeatureBundle,
                 shared: bool) -> FeatureBundle:
    if shared:
        return FeatureBundle(
            bundle.modality, tape.constant(np.zeros(bundle.shared.shape)),
            bundle.specific, bundle.identities
        )
    return FeatureBundle(
        bundle.modality, bundle.shared,
        tape.constant(np.zeros(bundle.specific.shape)), bundle.identities
    )


class TestGraphSymmetries(unittest.TestCase):
    """Reordering samples and blanking one feature kind."""

    def test_permutation_equivariance(self) -> None:
        """Shuffling the samples within each modality shuffles the graph
        and the transferred features the same way."""
        cfg = ModelConfig(d_h=4, d_p=3, d_t=5, hidden=6)
        for seed in range(20):
            rng = np.random.default_rng(200 + seed)
            store = ParameterStore()
            sstn.add_sstn_params(store, cfg, rng)
            params = sstn.SstnParams.from_store(store)
            tape = Tape()
            n_r, n_i = int(rng.integers(2, 7)), int(rng.integers(2, 7))
            k = int(rng.integers(1, 4))
            rgb = _bundle(tape, Modality.R, rng, n_r)
            ir = _bundle(tape, Modality.I, rng, n_i)
            order_r, order_i = rng.permutation(n_r), rng.permutation(n_i)
            order = np.concatenate([order_r, n_r + order_i])

            aff = sstn.build_affinity(rgb, ir, k)
            transferred = sstn.propagate(
                tape, params, sstn.pad_features([rgb, ir], cfg.d_p), aff
            )
            rgb_p = _permuted(tape, rgb, order_r)
            ir_p = _permuted(tape, ir, order_i)
            aff_p = sstn.build_affinity(rgb_p, ir_p, k)
            transferred_p = sstn.propagate(
                tape, params, sstn.pad_features([rgb_p, ir_p], cfg.d_p), aff_p
            )

            np.testing.assert_allclose(
                aff_p.matrix, aff.matrix[np.ix_(order, order)], atol=1e-12
            )
            np.testing.assert_allclose(
                transferred_p.value, transferred.value[order], atol=1e-10
            )

    def test_zeroed_shared_keeps_intra_blocks(self) -> None:
        for seed in range(5):
            rng = np.random.default_rng(300 + seed)
            tape = Tape()
            rgb = _bundle(tape, Modality.R, rng, 4)
            ir = _bundle(tape, Modality.I, rng, 3)

            full = sstn.build_affinity(rgb, ir, 2).matrix
            blanked = sstn.build_affinity(
                _with_zeroed(tape, rgb, True), _with_zeroed(tape, ir, True), 2
            ).matrix

            np.testing.assert_array_equal(blanked[:4, :4], full[:4, :4])
            np.testing.assert_array_equal(blanked[4:, 4:], full[4:, 4:])

    def test_zeroed_specific_keeps_inter_blocks(self) -> None:
        for seed in range(5):
            rng = np.random.default_rng(400 + seed)
            tape = Tape()
            rgb = _bundle(tape, Modality.R, rng, 4)
            ir = _bundle(tape, Modality.I, rng, 3)

            full = sstn.build_affinity(rgb, ir, 2).matrix
            blanked = sstn.build_affinity(
                _with_zeroed(tape, rgb, False), _with_zeroed(tape, ir, False),
                2
            ).matrix

            np.testing.assert_array_equal(blanked[:4, 4:], full[:4, 4:])
            np.testing.assert_array_equal(blanked[4:, :4], full[4:, :4])


class TestSingleQueryAffinity(unittest.TestCase):
    """Graph of a single query and the gallery."""

    def test_layout_and_amplification(self) -> None:
        rng = np.random.default_rng(10)
        tape = Tape()
        query = _bundle(tape, Modality.R, rng, 1)
        gallery = _bundle(tape, Modality.I, rng, 5)
        k = 3
        aff = sstn.single_query_affinity(query, gallery, k)

        self.assertEqual(aff.matrix.shape, (6, 6))
        self.assertAlmostEqual(aff.matrix[0, 0], k * 1.0)
        self.assertEqual((aff.matrix[0, 1:] != 0).sum(), k)
        np.testing.assert_allclose(
            aff.matrix[1:, 0],
            k * sstn.similarity_matrix(gallery.shared.value,
                                       query.shared.value)[:, 0]
        )
        np.testing.assert_allclose(
            aff.matrix[1:, 1:], sstn.gallery_intra_block(gallery, k)
        )

    def test_needs_exactly_one_query(self) -> None:
        rng = np.random.default_rng(11)
        tape = Tape()
        with self.assertRaises(ShapeError):
            sstn.single_query_affinity(
                _bundle(tape, Modality.R, rng, 2),
                _bundle(tape, Modality.I, rng, 3), 2
            )

    def test_same_modality(self) -> None:
        rng = np.random.default_rng(12)
        tape = Tape()
        with self.assertRaises(ConfigurationError):
            sstn.single_query_affinity(
                _bundle(tape, Modality.I, rng, 1),
                _bundle(tape, Modality.I, rng, 3), 2
            )


class TestPropagation(unittest.TestCase):
    """Propagation against a per-node summation."""

    @staticmethod
    def __oracle(
        matrix: np.ndarray, features: np.ndarray, params: sstn.SstnParams
    ) -> np.ndarray:
        n_rows = matrix.shape[0]
        degrees = [sum(matrix[i, j] for j in range(n_rows))
                   for i in range(n_rows)]
        out = []
        for i in range(n_rows):
            mixed = np.zeros(features.shape[1])
            for j in range(n_rows):
                mixed += matrix[i, j] / np.sqrt(degrees[i] *
                                                degrees[j]) * features[j]
            fused = np.maximum(mixed @ params.fusion.value, 0.0)
            out.append(
                np.maximum(
                    fused @ params.head_weight.value +
                    params.head_bias.value[0], 0.0
                )
            )
        return np.stack(out)

    def test_matches_per_node_oracle(self) -> None:
        """20 random instances with up to 12 nodes."""
        cfg = ModelConfig(d_h=4, d_p=3, d_t=5, hidden=6)
        for seed in range(20):
            rng = np.random.default_rng(100 + seed)
            store = ParameterStore()
            sstn.add_sstn_params(store, cfg, rng)
            store[f"{sstn.TRANSFER_HEAD}/bias"].value[...] = rng.normal(
                size=(1, cfg.d_t)
            )
            params = sstn.SstnParams.from_store(store)
            tape = Tape()
            rgb = _bundle(tape, Modality.R, rng, int(rng.integers(1, 7)))
            ir = _bundle(tape, Modality.I, rng, int(rng.integers(1, 7)))
            aff = sstn.build_affinity(rgb, ir, int(rng.integers(1, 4)))
            padded = sstn.pad_features([rgb, ir], cfg.d_p)

            result = sstn.propagate(tape, params, padded, aff)

            np.testing.assert_allclose(
                result.value,
                self.__oracle(aff.matrix, padded.features.value, params),
                rtol=0.0,
                atol=1e-10
            )

    def test_padded_layout(self) -> None:
        """RGB rows are [P | H | 0], IR rows [0 | H | P]."""
        rng = np.random.default_rng(13)
        tape = Tape()
        rgb = _bundle(tape, Modality.R, rng, 2)
        ir = _bundle(tape, Modality.I, rng, 1)
        padded = sstn.pad_features([rgb, ir], 3).features.value

        np.testing.assert_array_equal(padded[:2, :3], rgb.specific.value)
        np.testing.assert_array_equal(padded[:2, 3:7], rgb.shared.value)
        np.testing.assert_array_equal(padded[:2, 7:], np.zeros((2, 3)))
        np.testing.assert_array_equal(padded[2:, :3], np.zeros((1, 3)))
        np.testing.assert_array_equal(padded[2:, 7:], ir.specific.value)

    def test_zeroed_segments(self) -> None:
        rng = np.random.default_rng(14)
        tape = Tape()
        rgb = _bundle(tape, Modality.R, rng, 2)
        ir = _bundle(tape, Modality.I, rng, 2)

        no_shared = sstn.pad_features([rgb, ir], 3, use_shared=False)
        no_specific = sstn.pad_features([rgb, ir], 3, use_specific=False)

        self.assertFalse(np.any(no_shared.features.value[:, 3:7]))
        self.assertFalse(np.any(no_specific.features.value[:, :3]))
        self.assertFalse(np.any(no_specific.features.value[:, 7:]))

    def test_shape_mismatch(self) -> None:
        cfg = ModelConfig(d_h=4, d_p=3, d_t=5, hidden=6)
        rng = np.random.default_rng(15)
        store = ParameterStore()
        sstn.add_sstn_params(store, cfg, rng)
        tape = Tape()
        rgb = _bundle(tape, Modality.R, rng, 2)
        ir = _bundle(tape, Modality.I, rng, 2)
        aff = sstn.build_affinity(rgb, ir, 1)
        padded = sstn.pad_features([rgb, ir, ir], cfg.d_p)

        with self.assertRaises(ShapeError):
            sstn.propagate(
                tape, sstn.SstnParams.from_store(store), padded, aff
            )
