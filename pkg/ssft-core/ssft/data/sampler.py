"""Identity balanced (P x K) batch sampling over both modalities."""
import logging
import typing as tp

import attr
import numpy as np

from ssft.data.sample_set import Modality, SampleSet
from ssft.utils.exceptions import ConfigurationError

LOG = logging.getLogger(__name__)


@attr.s(frozen=True, eq=False)
class Batch():
    """
    A training batch: ``n_ids`` identities with ``n_per_modality`` samples in
    each modality.

    Rows of the per-modality matrices are grouped by identity, in the order
    the identities were drawn.
    """

    features: tp.Dict[Modality, np.ndarray] = attr.ib()
    identities: tp.Dict[Modality, np.ndarray] = attr.ib()
    sample_ids: tp.Dict[Modality, np.ndarray] = attr.ib()

    def size(self, modality: Modality) -> int:
        return int(self.identities[modality].shape[0])

    def __len__(self) -> int:
        return sum(self.size(modality) for modality in Modality)


class _PermutationQueue():
    """Hands out the items of a sequence in random order, reshuffling once
    all items were used."""

    def __init__(
        self, items: tp.Sequence[int], rng: np.random.Generator
    ) -> None:
        self.__items = np.asarray(items, dtype=np.int64)
        self.__rng = rng
        self.__pending: tp.List[int] = []

    def __reshuffled(self) -> tp.List[int]:
        return [int(item) for item in self.__rng.permutation(self.__items)]

    def __last_pending_not_in(self, taken: tp.List[int]) -> tp.Optional[int]:
        for pos in reversed(range(len(self.__pending))):
            if self.__pending[pos] not in taken:
                return pos
        return None

    def take(self, count: int) -> tp.List[int]:
        """``count`` distinct items; requires ``count <= len(items)``."""
        taken: tp.List[int] = []
        while len(taken) < count:
            position = self.__last_pending_not_in(taken)
            if position is None:
                self.__pending = self.__reshuffled() + self.__pending
                continue
            taken.append(self.__pending.pop(position))
        return taken


class PKBatchSampler():
    """
    Draws identity balanced batches from a sample set.

    Within an epoch, identities and the samples of every identity are drawn
    from running permutations, so no sample is repeated before all samples of
    its identity and modality were used.

    Args:
        sample_set: the training set
        n_ids: identities per batch
        n_per_modality: samples per identity and modality
        rng: the random stream of the epoch
    """

    def __init__(
        self, sample_set: SampleSet, n_ids: int, n_per_modality: int,
        rng: np.random.Generator
    ) -> None:
        if n_ids < 1 or n_per_modality < 1:
            raise ConfigurationError(
                "Batches need at least one identity and sample"
            )
        eligible = sorted(
            identity
            for identity, per_modality in sample_set.identity_index.items()
            if all(
                len(per_modality[modality]) >= n_per_modality
                for modality in Modality
            )
        )
        if len(eligible) < n_ids:
            raise ConfigurationError(
                f"Batch needs {n_ids} identities with at least "
                f"{n_per_modality} samples per modality, but the set "
                f"only has {len(eligible)}"
            )

        self.__sample_set = sample_set
        self.__n_ids = n_ids
        self.__n_per_modality = n_per_modality
        self.__identity_queue = _PermutationQueue(eligible, rng)
        self.__sample_queues = {
            (identity, modality): _PermutationQueue(
                sample_set.identity_index[identity][modality], rng
            ) for identity in eligible for modality in Modality
        }

    def next_batch(self) -> Batch:
        identities = self.__identity_queue.take(self.__n_ids)
        indices: tp.Dict[Modality, tp.List[int]] = {
            modality: [] for modality in Modality
        }
        for identity in identities:
            for modality in Modality:
                indices[modality] += self.__sample_queues[
                    (identity, modality)].take(self.__n_per_modality)

        sample_set = self.__sample_set
        return Batch(
            features={
                modality: sample_set.features[rows]
                for modality, rows in indices.items()
            },
            identities={
                modality: sample_set.identities[rows]
                for modality, rows in indices.items()
            },
            sample_ids={
                modality: sample_set.sample_ids[rows]
                for modality, rows in indices.items()
            }
        )

    def __iter__(self) -> tp.Iterator[Batch]:
        while True:
            yield self.next_batch()


def sample_pk_batch(
    sample_set: SampleSet, n_ids: int, n_per_modality: int,
    rng: np.random.Generator
) -> Batch:
    """
    Draw a single identity balanced batch.

    Args:
        sample_set: the set to draw from
        n_ids: identities per batch
        n_per_modality: samples per identity and modality
        rng: random stream

    Returns:
        a batch with ``n_ids * n_per_modality`` rows per modality
    """
    return PKBatchSampler(sample_set, n_ids, n_per_modality, rng).next_batch()
