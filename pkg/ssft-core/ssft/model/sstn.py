"""
Shared-specific transfer network.

The features of a set of samples of both modalities are laid out in a
three-segment padded matrix ``Z = [RGB-specific | shared | IR-specific]``.
Samples are linked by a sparse affinity graph: specific features define the
links inside a modality, shared features the links across modalities. The
graph propagates ``Z`` with symmetric normalization, a learnable fusion map
mixes the result and the transfer head maps it to the transferred features
``T``.

Affinities are constants of the backward pass.
"""
import logging
import typing as tp

import attr
import numpy as np

from ssft.base.configuration import ModelConfig
from ssft.data.sample_set import Modality
from ssft.diffcore import ops
from ssft.diffcore.ops import NORM_EPS
from ssft.diffcore.tape import Matrix, Node, ParamLeaf, Tape
from ssft.model.extractor import FeatureBundle
from ssft.model.parameters import ParameterStore, add_linear, add_matrix
from ssft.utils.exceptions import ConfigurationError, ShapeError

LOG = logging.getLogger(__name__)

FUSION = "sstn/fusion"
TRANSFER_HEAD = "sstn/feat_t"


def _unit_rows(features: Matrix) -> Matrix:
    norms = np.sqrt((features * features).sum(axis=1, keepdims=True))
    return features / np.maximum(norms, NORM_EPS)


def similarity_matrix(rows: Matrix, cols: Matrix) -> Matrix:
    """
    Normalized distance between every row of ``rows`` and every row of
    ``cols``.
    """
    if rows.shape[1] != cols.shape[1]:
        raise ShapeError("similarity_matrix", rows.shape, cols.shape)
    diff = _unit_rows(rows)[:, None, :] - _unit_rows(cols)[None, :, :]
    return 1.0 - 0.5 * np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def normalized_distance(a: tp.Sequence[float], b: tp.Sequence[float]) -> float:
    """
    ``1 - 0.5 * |a/|a| - b/|b||``, 1 for equal directions and 0 for opposite
    ones.

    Test:
    >>> normalized_distance([1.0, 0.0], [2.0, 0.0])
    1.0
    >>> normalized_distance([1.0, 0.0], [-1.0, 0.0])
    0.0
    """
    a_row = np.asarray(a, dtype=np.float64).reshape(1, -1)
    b_row = np.asarray(b, dtype=np.float64).reshape(1, -1)
    return float(similarity_matrix(a_row, b_row)[0, 0])


def topk_rows(matrix: Matrix, k: int) -> Matrix:
    """
    Keep the ``k`` largest entries of every row and zero the others; ties go
    to the lower column index.

    Test:
    >>> topk_rows(np.array([[0.9, 0.1, 0.5, 0.7]]), 2)
    array([[0.9, 0. , 0. , 0.7]])
    >>> topk_rows(np.array([[0.5, 0.5, 0.5]]), 1)
    array([[0.5, 0. , 0. ]])
    """
    if k < 1:
        raise ConfigurationError(
            f"Top-k sparsification needs k >= 1, got k = {k}"
        )
    if k >= matrix.shape[1]:
        return matrix.copy()
    keep = np.argsort(-matrix, axis=1, kind="stable")[:, :k]
    sparse = np.zeros_like(matrix)
    np.put_along_axis(
        sparse, keep, np.take_along_axis(matrix, keep, axis=1), axis=1
    )
    return sparse


@attr.s(frozen=True, eq=False)
class AffinityModel():
    """Sparse affinity graph over the rows of a padded matrix."""

    matrix: Matrix = attr.ib()
    k: int = attr.ib()
    modalities: tp.Tuple[Modality, ...] = attr.ib(converter=tuple)

    def __attrs_post_init__(self) -> None:
        if self.matrix.shape != (len(self.modalities), len(self.modalities)):
            raise ShapeError(
                "AffinityModel", self.matrix.shape, (len(self.modalities),)
            )
        if np.any(self.degrees <= 0):
            raise ConfigurationError("Affinity graph has isolated samples")

    @property
    def degrees(self) -> np.ndarray:
        """Row sums of the affinity matrix."""
        return self.matrix.sum(axis=1)

    def normalized(self) -> Matrix:
        """``D^-1/2 A D^-1/2``"""
        inv_sqrt = 1.0 / np.sqrt(self.degrees)
        return inv_sqrt[:, None] * self.matrix * inv_sqrt[None, :]

    def to_dict(self) -> tp.Dict[str, tp.Any]:
        return {
            "k": self.k,
            "modalities": [modality.value for modality in self.modalities],
            "degrees": self.degrees.tolist(),
            "matrix": self.matrix.tolist(),
        }


def _require_nonempty(bundle: FeatureBundle) -> None:
    if len(bundle) == 0:
        raise ConfigurationError(
            f"No samples of modality {bundle.modality.value}, use the "
            "single-query affinity instead"
        )


def build_affinity(
    rgb: FeatureBundle, ir: FeatureBundle, k: int
) -> AffinityModel:
    """
    Affinity graph of all RGB rows followed by all IR rows.

    Intra-modality blocks compare specific features, inter-modality blocks
    compare shared features; every block is sparsified to the ``k`` largest
    entries per row.
    """
    if rgb.modality is not Modality.R or ir.modality is not Modality.I:
        raise ConfigurationError("build_affinity expects an RGB and an IR set")
    _require_nonempty(rgb)
    _require_nonempty(ir)

    rgb_spec = rgb.specific_or_shared().value
    ir_spec = ir.specific_or_shared().value
    matrix = np.block([
        [
            topk_rows(similarity_matrix(rgb_spec, rgb_spec), k),
            topk_rows(similarity_matrix(rgb.shared.value, ir.shared.value), k)
        ],
        [
            topk_rows(similarity_matrix(ir.shared.value, rgb.shared.value), k),
            topk_rows(similarity_matrix(ir_spec, ir_spec), k)
        ],
    ])
    return AffinityModel(
        matrix, k, [Modality.R] * len(rgb) + [Modality.I] * len(ir)
    )


def gallery_intra_block(gallery: FeatureBundle, k: int) -> Matrix:
    """Sparsified intra-modality block of a gallery; reusable across
    single-query graphs."""
    gallery_spec = gallery.specific_or_shared().value
    return topk_rows(similarity_matrix(gallery_spec, gallery_spec), k)


def single_query_affinity(
    query: FeatureBundle,
    gallery: FeatureBundle,
    k: int,
    gallery_intra: tp.Optional[Matrix] = None
) -> AffinityModel:
    """
    Affinity graph of one query followed by the gallery.

    The column of the query is amplified ``k`` times and not sparsified, so
    the single query still carries weight against the ``k`` neighbors every
    gallery row keeps in its intra block.

    Args:
        query: features of exactly one query sample
        gallery: features of the gallery, the other modality
        k: neighbor count
        gallery_intra: precomputed :func:`gallery_intra_block`
    """
    if len(query) != 1:
        raise ShapeError("single_query_affinity", query.shared.shape)
    if query.modality is gallery.modality:
        raise ConfigurationError(
            "Query and gallery have to be of different modalities"
        )
    _require_nonempty(gallery)
    if k < 1:
        raise ConfigurationError(f"Affinity needs k >= 1, got k = {k}")
    if gallery_intra is None:
        gallery_intra = gallery_intra_block(gallery, k)

    query_spec = query.specific_or_shared().value
    query_self = similarity_matrix(query_spec, query_spec)
    query_row = topk_rows(
        similarity_matrix(query.shared.value, gallery.shared.value), k
    )
    gallery_col = similarity_matrix(gallery.shared.value, query.shared.value)
    matrix = np.block([
        [k * query_self, query_row],
        [k * gallery_col, gallery_intra],
    ])
    return AffinityModel(
        matrix, k, [query.modality] + [gallery.modality] * len(gallery)
    )


@attr.s(frozen=True, eq=False)
class PaddedMatrix():
    """Three-segment layout ``[RGB-specific | shared | IR-specific]`` of the
    features of both modalities."""

    features: Node = attr.ib()
    modalities: tp.Tuple[Modality, ...] = attr.ib(converter=tuple)
    row_order: np.ndarray = attr.ib()


def _padded_rows(
    bundle: FeatureBundle, d_p: int, use_shared: bool, use_specific: bool
) -> Node:
    tape = bundle.shared.tape
    rows = len(bundle)
    zeros = tape.constant(np.zeros((rows, d_p)))
    if use_specific and bundle.specific is not None:
        specific = bundle.specific
    else:
        specific = zeros
    shared = bundle.shared if use_shared else tape.constant(
        np.zeros(bundle.shared.shape)
    )
    if bundle.modality is Modality.R:
        return ops.concat_columns(specific, shared, zeros)
    return ops.concat_columns(zeros, shared, specific)


def pad_features(
    bundles: tp.Sequence[FeatureBundle],
    d_p: int,
    use_shared: bool = True,
    use_specific: bool = True,
    row_order: tp.Optional[np.ndarray] = None
) -> PaddedMatrix:
    """
    Stack the padded rows of ``bundles`` in the given order.

    Args:
        bundles: feature bundles, e.g., all RGB and then all IR samples
        d_p: width of the specific segments
        use_shared: if False, the shared segment is zero
        use_specific: if False, both specific segments are zero
        row_order: sample ids of the rows, defaults to row indices
    """
    rows = [_padded_rows(b, d_p, use_shared, use_specific) for b in bundles]
    stacked = rows[0] if len(rows) == 1 else ops.concat_rows(*rows)
    modalities = [b.modality for b in bundles for _ in range(len(b))]
    if row_order is None:
        row_order = np.arange(len(modalities))
    return PaddedMatrix(stacked, modalities, np.asarray(row_order))


@attr.s(frozen=True)
class SstnParams():
    """Fusion map and transfer head of the transfer network."""

    fusion: ParamLeaf = attr.ib()
    head_weight: ParamLeaf = attr.ib()
    head_bias: ParamLeaf = attr.ib()

    def __attrs_post_init__(self) -> None:
        rows, cols = self.fusion.shape
        if rows != cols or self.head_weight.shape[0] != cols:
            raise ShapeError(
                "SstnParams", self.fusion.shape, self.head_weight.shape
            )

    @staticmethod
    def from_store(store: ParameterStore) -> 'SstnParams':
        return SstnParams(
            store[FUSION], store[f"{TRANSFER_HEAD}/weight"],
            store[f"{TRANSFER_HEAD}/bias"]
        )


def add_sstn_params(
    store: ParameterStore, cfg: ModelConfig, rng: np.random.Generator
) -> None:
    width = cfg.padded_width
    add_matrix(store, FUSION, width, width, rng)
    add_linear(store, TRANSFER_HEAD, width, cfg.d_t, rng)


def propagate(
    tape: Tape, params: SstnParams, padded: PaddedMatrix, aff: AffinityModel
) -> Node:
    """
    Transferred features ``T = Feat_t(ReLU(D^-1/2 A D^-1/2 Z W))``.

    Args:
        tape: tape of the padded features
        params: fusion map and transfer head
        padded: the padded feature matrix Z
        aff: affinity graph over the rows of Z
    """
    features = padded.features
    if aff.matrix.shape[0] != features.shape[0]:
        raise ShapeError("propagate", aff.matrix.shape, features.shape)
    if params.fusion.shape[0] != features.shape[1]:
        raise ShapeError("propagate", features.shape, params.fusion.shape)

    propagated = ops.matmul(tape.constant(aff.normalized()), features)
    fused = ops.relu(ops.matmul(propagated, tape.param(params.fusion)))
    return ops.relu(
        ops.bias_add(
            ops.matmul(fused, tape.param(params.head_weight)),
            tape.param(params.head_bias)
        )
    )
