"""
Objective terms and their fixed-weight mixing.

Triplet losses average the hinge terms of all valid (anchor, positive,
negative) triplets of a batch on plain Euclidean distances.
"""
import json
import logging
import typing as tp

import attr
import numpy as np

from ssft.base.configuration import TrainConfig
from ssft.data.sample_set import Modality
from ssft.diffcore import ops
from ssft.diffcore.tape import Node, Tape
from ssft.utils.exceptions import ShapeError

LOG = logging.getLogger(__name__)

# weight of the triplet term inside the shared and the specific loss
TRIPLET_WEIGHT = 0.5
# weight of the classification of the specific features per modality
SPECIFIC_CLASSIFICATION_WEIGHT = 0.5
# weight of the transferred triplet loss
TRANSFER_TRIPLET_WEIGHT = 0.25


class LossTerm(tp.NamedTuple):
    """A scalar loss node; ``degenerate`` marks a batch without a single
    valid triplet."""
    node: Node
    degenerate: bool = False


def euclidean_distances(a: Node, b: Node) -> Node:
    """Pairwise Euclidean distances between the rows of ``a`` and ``b``."""
    return ops.sqrt(ops.pairwise_sq_distances(a, b))


def triplet_indices(
    anchor_ids: np.ndarray,
    other_ids: np.ndarray,
    exclude_self: bool = False
) -> tp.Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    All valid triplets between an anchor set and a candidate set.

    Args:
        anchor_ids: identity per anchor row
        other_ids: identity per candidate row
        exclude_self: if True, both sets are the same and an anchor is not
                      its own positive

    Returns:
        anchor, positive and negative indices of every valid triplet

    Test:
    >>> a, p, n = triplet_indices(np.array([0, 1]), np.array([0, 1]))
    >>> list(zip(a, p, n))
    [(0, 0, 1), (1, 1, 0)]
    """
    anchor_ids = np.asarray(anchor_ids).reshape(-1)
    other_ids = np.asarray(other_ids).reshape(-1)
    same = anchor_ids[:, None] == other_ids[None, :]
    positive = same.copy()
    if exclude_self:
        np.fill_diagonal(positive, False)
    valid = positive[:, :, None] & ~same[:, None, :]
    anchors, positives, negatives = np.nonzero(valid)
    return anchors, positives, negatives


def _margin_terms(
    dists: Node, anchor_ids: np.ndarray, other_ids: np.ndarray,
    margin: float, exclude_self: bool
) -> tp.Optional[Node]:
    anchors, positives, negatives = triplet_indices(
        anchor_ids, other_ids, exclude_self
    )
    if anchors.size == 0:
        return None
    return ops.add_scalar(
        ops.subtract(
            ops.gather(dists, anchors, positives),
            ops.gather(dists, anchors, negatives)
        ), margin
    )


def _mean_hinge(
    tape: Tape, terms: tp.Sequence[tp.Optional[Node]], name: str
) -> LossTerm:
    present = [term for term in terms if term is not None]
    if not present:
        LOG.warning(f"{name}: batch has no valid triplet")
        return LossTerm(tape.constant(0.0), True)
    stacked = present[0] if len(present) == 1 else ops.concat_rows(*present)
    return LossTerm(ops.reduce_mean(ops.hinge(stacked)))


def cm_triplet(
    feats_r: Node, feats_i: Node, ids_r: np.ndarray, ids_i: np.ndarray,
    margin: float
) -> LossTerm:
    """
    Cross-modality triplet loss: anchors of one modality, positives and
    negatives of the other, in both directions.
    """
    if feats_r.shape[1] != feats_i.shape[1]:
        raise ShapeError("cm_triplet", feats_r.shape, feats_i.shape)
    terms = [
        _margin_terms(
            euclidean_distances(feats_r, feats_i), ids_r, ids_i, margin, False
        ),
        _margin_terms(
            euclidean_distances(feats_i, feats_r), ids_i, ids_r, margin, False
        ),
    ]
    return _mean_hinge(feats_r.tape, terms, "cm_triplet")


def sm_triplet(
    feats: tp.Mapping[Modality, Node], ids: tp.Mapping[Modality, np.ndarray],
    margin: float
) -> LossTerm:
    """Single-modality triplet loss over the modalities in ``feats``."""
    terms = [
        _margin_terms(
            euclidean_distances(node, node), ids[modality], ids[modality],
            margin, True
        ) for modality, node in feats.items()
    ]
    tape = next(iter(feats.values())).tape
    return _mean_hinge(tape, terms, "sm_triplet")


def transfer_loss(
    feats_r: Node, feats_i: Node, ids_r: np.ndarray, ids_i: np.ndarray,
    rho1: float, rho2: float
) -> LossTerm:
    """Both triplet losses on the transferred features."""
    cross = cm_triplet(feats_r, feats_i, ids_r, ids_i, rho1)
    single = sm_triplet({
        Modality.R: feats_r,
        Modality.I: feats_i
    }, {
        Modality.R: ids_r,
        Modality.I: ids_i
    }, rho2)
    return LossTerm(
        ops.add(cross.node, single.node), cross.degenerate and
        single.degenerate
    )


def classification_loss(logits: Node, labels: np.ndarray) -> Node:
    """Mean identity cross-entropy."""
    return ops.softmax_cross_entropy(logits, labels)


def modality_adversarial(
    logits: Node, modalities: tp.Sequence[Modality]
) -> Node:
    """
    Mean cross-entropy of the modality discriminator against the true
    modality.

    Test:
    >>> from ssft.diffcore.tape import Tape
    >>> loss = modality_adversarial(Tape().constant(np.zeros((2, 2))),
    ...                             [Modality.R, Modality.I])
    >>> round(loss.item(), 6)
    0.693147
    """
    return ops.softmax_cross_entropy(
        logits, [modality.label for modality in modalities]
    )


def project_adversarial(projected: Node, shared: Node) -> Node:
    """Mean Euclidean distance between projected specific and shared
    features."""
    return ops.reduce_mean(ops.row_norms(ops.subtract(projected, shared)))


def reconstruction_loss(inputs: Node, reconstruction: Node) -> Node:
    """Mean over samples of the squared reconstruction error divided by the
    input dimension."""
    if inputs.shape != reconstruction.shape:
        raise ShapeError(
            "reconstruction_loss", inputs.shape, reconstruction.shape
        )
    diff = ops.subtract(inputs, reconstruction)
    return ops.reduce_mean(ops.multiply(diff, diff))


@attr.s(frozen=True, eq=False)
class LossComponents():
    """
    All objective terms of one batch. Terms of disabled components are
    zero constants.
    """

    cls_shared: Node = attr.ib()
    cls_specific_r: Node = attr.ib()
    cls_specific_i: Node = attr.ib()
    cls_transfer: Node = attr.ib()
    cm_triplet_shared: Node = attr.ib()
    sm_triplet_specific: Node = attr.ib()
    triplet_transfer: Node = attr.ib()
    modality_adv: Node = attr.ib()
    project_adv: Node = attr.ib()
    reconstruction: Node = attr.ib()


REPORT_KEYS = (
    "Lc_H", "Lc_P", "Lc_T", "L_cmT_H", "L_smT_P", "L_t_T", "L_ma", "L_pa",
    "L_re", "L_feat", "L_min", "L_max"
)


@attr.s(frozen=True)
class LossReport():
    """Scalar values of all terms of one step plus the mixing weights that
    produced them."""

    values: tp.Dict[str, float] = attr.ib()
    weights: tp.Dict[str, float] = attr.ib()

    def __getitem__(self, key: str) -> float:
        return self.values[key]

    def non_finite_terms(self) -> tp.List[str]:
        return [
            key for key, value in self.values.items()
            if not np.isfinite(value)
        ]

    def to_json(self, step: int, epoch: tp.Optional[int] = None) -> str:
        """One line of the training log."""
        line: tp.Dict[str, tp.Any] = {"step": step}
        if epoch is not None:
            line["epoch"] = epoch
        line.update(self.values)
        return json.dumps(line)


@attr.s(frozen=True, eq=False)
class MixedLosses():
    """Mixed objectives of one forward pass."""

    feat: Node = attr.ib()
    minimized: Node = attr.ib()
    maximized: Node = attr.ib()
    report: LossReport = attr.ib()


def mix(components: LossComponents, cfg: TrainConfig) -> MixedLosses:
    """
    Combine the terms into the feature loss, the objective of the network
    (minimized) and the objective of the adversaries (maximized).

    Args:
        components: terms of one batch
        cfg: the (effective) loss weights

    Returns:
        the mixed objectives with their report
    """
    c = components
    shared = ops.add(
        c.cls_shared, ops.scale(c.cm_triplet_shared, TRIPLET_WEIGHT)
    )
    cls_specific = ops.scale(
        ops.add(c.cls_specific_r, c.cls_specific_i),
        SPECIFIC_CLASSIFICATION_WEIGHT
    )
    specific = ops.add(
        cls_specific, ops.scale(c.sm_triplet_specific, TRIPLET_WEIGHT)
    )
    transfer = ops.add(
        c.cls_transfer,
        ops.scale(c.triplet_transfer, TRANSFER_TRIPLET_WEIGHT)
    )
    feat = ops.add(ops.add(shared, specific), transfer)
    adversarial = ops.add(
        ops.scale(c.modality_adv, cfg.lambda2),
        ops.scale(c.project_adv, cfg.lambda3)
    )
    maximized = ops.scale(adversarial, -1.0)
    minimized = ops.add(
        ops.add(feat, ops.scale(c.reconstruction, cfg.lambda1)), maximized
    )

    values = {
        "Lc_H": c.cls_shared.item(),
        "Lc_P": cls_specific.item(),
        "Lc_T": c.cls_transfer.item(),
        "L_cmT_H": c.cm_triplet_shared.item(),
        "L_smT_P": c.sm_triplet_specific.item(),
        "L_t_T": c.triplet_transfer.item(),
        "L_ma": c.modality_adv.item(),
        "L_pa": c.project_adv.item(),
        "L_re": c.reconstruction.item(),
        "L_feat": feat.item(),
        "L_min": minimized.item(),
        "L_max": maximized.item(),
    }
    weights = {
        "triplet": TRIPLET_WEIGHT,
        "specific_classification": SPECIFIC_CLASSIFICATION_WEIGHT,
        "transfer_triplet": TRANSFER_TRIPLET_WEIGHT,
        "lambda1": cfg.lambda1,
        "lambda2": cfg.lambda2,
        "lambda3": cfg.lambda3,
    }
    return MixedLosses(feat, minimized, maximized, LossReport(values, weights))