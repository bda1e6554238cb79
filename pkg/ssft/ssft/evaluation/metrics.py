"""Ranking and retrieval metrics (CMC and mean average precision)."""
import logging
import typing as tp

import attr
import numpy as np

from ssft.utils.exceptions import ShapeError

LOG = logging.getLogger(__name__)

SUMMARY_RANKS = (1, 5, 10, 20)


def l2_normalize(features: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    """Scale every row to unit length."""
    norms = np.sqrt((features * features).sum(axis=1, keepdims=True))
    return features / np.maximum(norms, eps)


def squared_distances(query: np.ndarray, gallery: np.ndarray) -> np.ndarray:
    if query.shape[1] != gallery.shape[1]:
        raise ShapeError("squared_distances", query.shape, gallery.shape)
    diff = query[:, None, :] - gallery[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def rank_gallery(
    query_feats: np.ndarray, gallery_feats: np.ndarray,
    gallery_sample_ids: np.ndarray
) -> np.ndarray:
    """
    Gallery indices per query, ordered by ascending Euclidean distance of the
    L2-normalized features; equal distances are ordered by gallery sample id.

    Returns:
        ``n_query x n_gallery`` index matrix

    Test:
    >>> rank_gallery(np.array([[1.0, 0.0]]),
    ...              np.array([[0.0, 1.0], [2.0, 0.0]]), np.array([7, 8]))
    array([[1, 0]])
    """
    dists = squared_distances(
        l2_normalize(query_feats), l2_normalize(gallery_feats)
    )
    if not len(dists):
        return np.zeros((0, gallery_feats.shape[0]), dtype=np.int64)
    return np.stack([np.lexsort((gallery_sample_ids, row)) for row in dists])


def relevance_matrix(
    ranking: np.ndarray, query_ids: np.ndarray, gallery_ids: np.ndarray
) -> np.ndarray:
    """Boolean matrix: True where the ranked gallery item shares the identity
    of the query."""
    return gallery_ids[ranking] == np.asarray(query_ids)[:, None]


def average_precision(relevance: tp.Sequence[bool]) -> float:
    """
    Mean of the precision at every relevant position of a ranked list.

    Test:
    >>> round(average_precision([True, False, True]), 6)
    0.833333
    >>> average_precision([False, False])
    0.0
    """
    relevant = np.asarray(relevance, dtype=bool)
    hits = np.flatnonzero(relevant)
    if hits.size == 0:
        return 0.0
    precisions = np.arange(1, hits.size + 1) / (hits + 1)
    return float(precisions.mean())


def first_hit(relevance: tp.Sequence[bool]) -> tp.Optional[int]:
    """0-based rank of the first relevant item, None if there is none."""
    hits = np.flatnonzero(np.asarray(relevance, dtype=bool))
    return int(hits[0]) if hits.size else None


def cmc_curve(first_hits: tp.Sequence[int], n_gallery: int) -> np.ndarray:
    """
    Fraction of queries whose first relevant item is within rank r, for
    r = 1..n_gallery.

    Test:
    >>> cmc_curve([0, 2], 3).tolist()
    [0.5, 0.5, 1.0]
    """
    curve = np.zeros(n_gallery)
    if not first_hits:
        return curve
    for hit in first_hits:
        curve[hit:] += 1
    return curve / len(first_hits)


def compute_metrics(
    relevance: np.ndarray
) -> tp.Tuple[np.ndarray, float, int]:
    """
    CMC curve and mAP of ranked relevance lists.

    Queries without any relevant gallery item are skipped.

    Args:
        relevance: ``n_query x n_gallery`` relevance in ranked order

    Returns:
        the CMC curve, the mAP and the number of evaluated queries
    """
    first_hits: tp.List[int] = []
    aps: tp.List[float] = []
    for row in relevance:
        hit = first_hit(row)
        if hit is None:
            continue
        first_hits.append(hit)
        aps.append(average_precision(row))
    skipped = relevance.shape[0] - len(first_hits)
    if skipped:
        LOG.warning(f"{skipped} queries have no relevant gallery item")
    mean_ap = float(np.mean(aps)) if aps else 0.0
    return cmc_curve(first_hits, relevance.shape[1]), mean_ap, len(aps)


@attr.s(frozen=True)
class RankingOracleCase():
    """Hand-checkable ranked relevance lists with their expected metrics."""

    relevance: tp.List[tp.List[bool]] = attr.ib()
    expected_aps: tp.List[float] = attr.ib()
    expected_cmc: tp.List[float] = attr.ib()

    def evaluate(self) -> tp.Tuple[tp.List[float], tp.List[float]]:
        """Per-query APs and the CMC curve computed by this module."""
        matrix = np.asarray(self.relevance, dtype=bool)
        cmc, _, _ = compute_metrics(matrix)
        return [average_precision(row) for row in matrix], cmc.tolist()

    def matches(self, tol: float = 1e-12) -> bool:
        aps, cmc = self.evaluate()
        return bool(
            np.allclose(aps, self.expected_aps, rtol=0.0, atol=tol) and
            np.allclose(cmc, self.expected_cmc, rtol=0.0, atol=tol)
        )
