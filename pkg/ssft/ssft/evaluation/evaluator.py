"""
Cross-modality retrieval evaluation.

Queries of one modality rank the gallery of the other modality. With feature
transfer, queries and gallery are first propagated through a common affinity
graph: in all-queries mode one graph holds every query and the gallery, in
single-query mode every query gets its own graph with the gallery, and the
auxiliary sweep places random groups of ``n`` queries into the graph.
"""
import logging
import math
import typing as tp

import numpy as np

from ssft.data.sample_set import Modality, SampleSet
from ssft.diffcore.tape import Tape
from ssft.evaluation.metrics import (
    compute_metrics,
    l2_normalize,
    rank_gallery,
    relevance_matrix,
)
from ssft.evaluation.report import (
    ALL_QUERIES,
    SINGLE_QUERY,
    RetrievalReport,
    mean_report,
)
from ssft.model import sstn
from ssft.model.extractor import FeatureBundle
from ssft.model.network import SsftNetwork
from ssft.utils.exceptions import ConfigurationError

LOG = logging.getLogger(__name__)

DIRECTIONS = {
    "r2i": (Modality.R, Modality.I),
    "i2r": (Modality.I, Modality.R),
}


def split_direction(test_set: SampleSet,
                    direction: str) -> tp.Tuple[SampleSet, SampleSet]:
    """
    Query and gallery set of a retrieval direction.

    Args:
        test_set: samples of both modalities
        direction: ``r2i`` (RGB queries, IR gallery) or ``i2r``
    """
    if direction not in DIRECTIONS:
        raise ConfigurationError(f"Unknown query direction '{direction}'")
    query_modality, gallery_modality = DIRECTIONS[direction]
    return (
        test_set.of_modality(query_modality),
        test_set.of_modality(gallery_modality)
    )


def _set_modality(sample_set: SampleSet, role: str) -> Modality:
    modalities = set(sample_set.modalities)
    if len(modalities) != 1:
        raise ConfigurationError(
            f"The {role} set must hold exactly one modality, found "
            f"{sorted(m.value for m in modalities)}"
        )
    return modalities.pop()


def _check_sets(query_set: SampleSet, gallery_set: SampleSet) -> None:
    if _set_modality(query_set, "query") is _set_modality(
        gallery_set, "gallery"
    ):
        raise ConfigurationError(
            "Query and gallery have to be of different modalities"
        )


def _direction_of(query_modality: Modality) -> str:
    return "r2i" if query_modality is Modality.R else "i2r"


def _rows(tape: Tape, bundle: FeatureBundle,
          rows: np.ndarray) -> FeatureBundle:
    """Sub-bundle of the given rows as constants of ``tape``."""
    specific = None
    if bundle.specific is not None:
        specific = tape.constant(bundle.specific.value[rows])
    return FeatureBundle(
        bundle.modality, tape.constant(bundle.shared.value[rows]), specific,
        bundle.identities[rows]
    )


class RetrievalEvaluator():
    """
    Evaluates a trained network on a query and a gallery set.

    Features of both sets are extracted once; the evaluation never modifies
    the network.

    Args:
        network: the trained network
        query_set: samples of the query modality
        gallery_set: samples of the other modality
        k: neighbor count of the affinity graphs
        feature: ``transfer`` (T), ``concat`` (T and H) or ``shared`` (H)
    """

    def __init__(
        self,
        network: SsftNetwork,
        query_set: SampleSet,
        gallery_set: SampleSet,
        k: int,
        feature: str = "transfer"
    ) -> None:
        _check_sets(query_set, gallery_set)
        if k < 1:
            raise ConfigurationError(f"Evaluation needs k >= 1, got k = {k}")
        self.__network = network
        self.__query_set = query_set
        self.__gallery_set = gallery_set
        self.__k = k
        self.__feature = feature
        self.__tape = Tape(grad_enabled=False)
        self.__query = network.extract(
            self.__tape, query_set.features, _set_modality(query_set, "query"),
            query_set.identities
        )
        self.__gallery = network.extract(
            self.__tape, gallery_set.features,
            _set_modality(gallery_set, "gallery"), gallery_set.identities
        )
        if feature != "shared" and not network.switches.transfer_enabled:
            LOG.info("Feature transfer is disabled, ranking shared features")

    @property
    def uses_transfer(self) -> bool:
        return (
            self.__feature != "shared" and
            self.__network.switches.transfer_enabled
        )

    @property
    def n_query(self) -> int:
        return len(self.__query_set)

    def __report(
        self, mode: str, relevance: np.ndarray, aux_size: tp.Union[int, str]
    ) -> RetrievalReport:
        cmc, mean_ap, _ = compute_metrics(relevance)
        return RetrievalReport(
            mode=mode,
            cmc=cmc,
            map=mean_ap,
            n_query=len(self.__query_set),
            n_gallery=len(self.__gallery_set),
            k=self.__k,
            aux_size=aux_size,
            direction=_direction_of(self.__query.modality),
            feature=self.__feature
        )

    def __retrieval_features(
        self, transferred: np.ndarray, shared: np.ndarray
    ) -> np.ndarray:
        if self.__feature == "concat":
            return np.concatenate(
                [l2_normalize(transferred),
                 l2_normalize(shared)], axis=1
            )
        return transferred

    def __graph_features(
        self,
        query: FeatureBundle,
        gallery: FeatureBundle,
        gallery_intra: tp.Optional[np.ndarray] = None
    ) -> tp.Tuple[np.ndarray, np.ndarray]:
        """Features of queries and gallery after propagation through their
        common graph."""
        if not self.uses_transfer:
            return query.shared.value, gallery.shared.value

        network, tape = self.__network, self.__tape
        if len(query) == 1 and gallery_intra is not None:
            aff = sstn.single_query_affinity(
                query, gallery, self.__k, gallery_intra
            )
            bundles = [query, gallery]
        elif query.modality is Modality.R:
            aff = sstn.build_affinity(query, gallery, self.__k)
            bundles = [query, gallery]
        else:
            aff = sstn.build_affinity(gallery, query, self.__k)
            bundles = [gallery, query]

        transferred = network.transfer(tape, network.pad(bundles), aff).value
        first = len(bundles[0])
        if bundles[0] is query:
            query_t, gallery_t = transferred[:first], transferred[first:]
        else:
            gallery_t, query_t = transferred[:first], transferred[first:]
        return (
            self.__retrieval_features(query_t, query.shared.value),
            self.__retrieval_features(gallery_t, gallery.shared.value)
        )

    def __relevance(
        self, query_feats: np.ndarray, gallery_feats: np.ndarray,
        query_ids: np.ndarray
    ) -> np.ndarray:
        ranking = rank_gallery(
            query_feats, gallery_feats, self.__gallery_set.sample_ids
        )
        return relevance_matrix(
            ranking, query_ids, self.__gallery_set.identities
        )

    def affinity(self) -> tp.Optional[sstn.AffinityModel]:
        """Affinity graph of the all-queries evaluation."""
        if not self.uses_transfer:
            return None
        if self.__query.modality is Modality.R:
            return sstn.build_affinity(self.__query, self.__gallery, self.__k)
        return sstn.build_affinity(self.__gallery, self.__query, self.__k)

    def evaluate_all_queries(self) -> RetrievalReport:
        """All queries and the gallery share one graph."""
        query_feats, gallery_feats = self.__graph_features(
            self.__query, self.__gallery
        )
        relevance = self.__relevance(
            query_feats, gallery_feats, self.__query.identities
        )
        return self.__report(ALL_QUERIES, relevance, "all")

    def evaluate_single_query(self) -> RetrievalReport:
        """Every query is propagated with the gallery alone, using the
        amplified single-query affinity."""
        if not self.uses_transfer:
            return self.__report(
                SINGLE_QUERY,
                self.__relevance(
                    self.__query.shared.value, self.__gallery.shared.value,
                    self.__query.identities
                ), 1
            )

        gallery_intra = sstn.gallery_intra_block(self.__gallery, self.__k)
        rows = []
        for idx in range(len(self.__query)):
            query = _rows(self.__tape, self.__query, np.array([idx]))
            query_feats, gallery_feats = self.__graph_features(
                query, self.__gallery, gallery_intra
            )
            rows.append(
                self.__relevance(query_feats, gallery_feats,
                                 query.identities)[0]
            )
        return self.__report(SINGLE_QUERY, np.stack(rows), 1)

    def evaluate_with_aux_set(
        self, size: int, rng: np.random.Generator
    ) -> RetrievalReport:
        """
        Queries are split at random into groups of (about) ``size``; each
        group is propagated together with the gallery, so the other queries
        of a group act as auxiliary set.
        """
        n_query = len(self.__query)
        if not 1 <= size <= n_query:
            raise ConfigurationError(
                f"Auxiliary set size must lie in [1, {n_query}], got {size}"
            )
        groups = np.array_split(
            rng.permutation(n_query), math.ceil(n_query / size)
        )
        relevance = np.zeros((n_query, len(self.__gallery)), dtype=bool)
        for group in groups:
            rows = np.sort(group)
            query = _rows(self.__tape, self.__query, rows)
            query_feats, gallery_feats = self.__graph_features(
                query, self.__gallery
            )
            relevance[rows] = self.__relevance(
                query_feats, gallery_feats, query.identities
            )
        return self.__report(ALL_QUERIES, relevance, size)


def evaluate_all_queries(
    network: SsftNetwork,
    query_set: SampleSet,
    gallery_set: SampleSet,
    k: int,
    feature: str = "transfer"
) -> RetrievalReport:
    return RetrievalEvaluator(
        network, query_set, gallery_set, k, feature
    ).evaluate_all_queries()


def evaluate_single_query(
    network: SsftNetwork,
    query_set: SampleSet,
    gallery_set: SampleSet,
    k: int,
    feature: str = "transfer"
) -> RetrievalReport:
    return RetrievalEvaluator(
        network, query_set, gallery_set, k, feature
    ).evaluate_single_query()


def resolve_aux_size(size: str, n_query: int) -> int:
    """
    Number of queries of an auxiliary set size given as count, percentage or
    ``all``.

    Test:
    >>> [resolve_aux_size(s, 40) for s in ("1", "25%", "all")]
    [1, 10, 40]
    """
    size = str(size).strip()
    try:
        if size == "all":
            count = n_query
        elif size.endswith("%"):
            count = max(1, int(round(n_query * float(size[:-1]) / 100.0)))
        else:
            count = int(size)
    except ValueError as err:
        raise ConfigurationError(
            f"Invalid auxiliary set size '{size}'"
        ) from err
    if not 1 <= count <= n_query:
        raise ConfigurationError(
            f"Auxiliary set size must lie in [1, {n_query}], got {size}"
        )
    return count


def aux_sweep(
    network: SsftNetwork,
    query_set: SampleSet,
    gallery_set: SampleSet,
    sizes: tp.Sequence[tp.Union[int, str]],
    trials: int,
    seed: int,
    k: int,
    feature: str = "transfer"
) -> tp.List[tp.Tuple[int, RetrievalReport]]:
    """
    Retrieval performance over the size of the auxiliary query set.

    For every size, the reports of ``trials`` random query groupings are
    averaged. For size 1, the single-query evaluation with the amplified
    affinity is added as an extra entry.

    Args:
        network: the trained network
        query_set: samples of the query modality
        gallery_set: samples of the other modality
        sizes: counts, percentages (``25%``) or ``all``
        trials: resamplings per size
        seed: seed of the groupings
        k: neighbor count
        feature: retrieval feature

    Returns:
        (size, mean report) pairs, sorted by size
    """
    if trials < 1:
        raise ConfigurationError("The sweep needs at least one trial")
    evaluator = RetrievalEvaluator(network, query_set, gallery_set, k, feature)
    counts = sorted({
        resolve_aux_size(str(size), evaluator.n_query) for size in sizes
    })

    results: tp.List[tp.Tuple[int, RetrievalReport]] = []
    for count in counts:
        reports = [
            evaluator.evaluate_with_aux_set(
                count, np.random.default_rng([seed, count, trial])
            ) for trial in range(trials)
        ]
        results.append((count, mean_report(reports)))
        LOG.info(f"aux size {count}: mAP={results[-1][1].map:.4f}")
        if count == 1:
            results.append((1, evaluator.evaluate_single_query()))
    return results
