"""
Labeled two-modality sample sets and their JSON-lines file format.

A dataset file starts with a header line, e.g.,
``{"doc_type": "SampleSet", "version": 1, "d_in": 64, "split": "train",
"n_records": 1280}``, followed by one record per line:
``{"sample_id": 0, "identity": 3, "modality": "R", "features": [...]}``.
Floats are written with 17 significant digits, which round-trips float64
exactly.
"""
import json
import logging
import typing as tp
from enum import Enum
from pathlib import Path

import attr
import numpy as np

from ssft.base.version_header import (
    NoVersionHeader,
    VersionHeader,
    WrongFileType,
    WrongFileVersion,
)
from ssft.utils.exceptions import (
    DatasetParseError,
    DatasetSchemaError,
    ShapeError,
)

LOG = logging.getLogger(__name__)

DOC_TYPE = "SampleSet"
FILE_VERSION = 1


class Modality(Enum):
    """Sensing domain of a sample."""
    value: str

    R = "R"
    I = "I"

    @property
    def label(self) -> int:
        """
        Class index used by the modality discriminator.

        Test:
        >>> Modality.R.label, Modality.I.label
        (0, 1)
        """
        return 0 if self is Modality.R else 1

    @property
    def other(self) -> 'Modality':
        """The opposite modality."""
        return Modality.I if self is Modality.R else Modality.R


class Split(Enum):
    """Dataset split."""
    value: str

    train = "train"
    test = "test"


@attr.s(frozen=True, eq=False)
class SampleRecord():
    """One labeled observation."""

    sample_id: int = attr.ib()
    identity: int = attr.ib()
    modality: Modality = attr.ib()
    features: np.ndarray = attr.ib()


class SampleSet():
    """
    Immutable collection of samples, stored column wise.

    Args:
        split: the split the samples belong to
        d_in: declared feature dimension
        sample_ids: unique sample ids
        identities: identity label per sample
        modalities: modality per sample
        features: n x d_in feature matrix
    """

    def __init__(
        self, split: Split, d_in: int, sample_ids: tp.Sequence[int],
        identities: tp.Sequence[int], modalities: tp.Sequence[Modality],
        features: np.ndarray
    ) -> None:
        self.__split = split
        self.__d_in = int(d_in)
        self.__sample_ids = np.array(sample_ids, dtype=np.int64).reshape(-1)
        self.__identities = np.array(identities, dtype=np.int64).reshape(-1)
        self.__modalities = tuple(modalities)
        self.__features = np.array(features, dtype=np.float64).reshape(
            len(self.__sample_ids), self.__d_in
        )

        if not len(self.__identities) == len(self.__modalities) == len(
            self.__sample_ids
        ):
            raise ShapeError(
                "SampleSet", self.__sample_ids.shape, self.__identities.shape,
                (len(self.__modalities),)
            )
        for array in (self.__sample_ids, self.__identities, self.__features):
            array.setflags(write=False)

        self.__identity_index: tp.Dict[int, tp.Dict[Modality,
                                                    tp.List[int]]] = {}
        for idx, (identity, modality) in enumerate(
            zip(self.__identities, self.__modalities)
        ):
            per_modality = self.__identity_index.setdefault(
                int(identity), {Modality.R: [], Modality.I: []}
            )
            per_modality[modality].append(idx)

    @property
    def split(self) -> Split:
        return self.__split

    @property
    def d_in(self) -> int:
        return self.__d_in

    @property
    def sample_ids(self) -> np.ndarray:
        return self.__sample_ids

    @property
    def identities(self) -> np.ndarray:
        return self.__identities

    @property
    def modalities(self) -> tp.Tuple[Modality, ...]:
        return self.__modalities

    @property
    def features(self) -> np.ndarray:
        return self.__features

    @property
    def identity_index(
        self
    ) -> tp.Dict[int, tp.Dict[Modality, tp.List[int]]]:
        """Maps every identity to its record indices per modality."""
        return self.__identity_index

    def identity_set(self) -> tp.Set[int]:
        return set(self.__identity_index.keys())

    def __len__(self) -> int:
        return len(self.__sample_ids)

    def __getitem__(self, idx: int) -> SampleRecord:
        return SampleRecord(
            int(self.__sample_ids[idx]), int(self.__identities[idx]),
            self.__modalities[idx], self.__features[idx]
        )

    def records(self) -> tp.Iterator[SampleRecord]:
        for idx in range(len(self)):
            yield self[idx]

    def subset(self, indices: tp.Sequence[int]) -> 'SampleSet':
        """New sample set with the records at ``indices``, in that order."""
        index_arr = np.asarray(indices, dtype=np.int64).reshape(-1)
        return SampleSet(
            self.__split, self.__d_in, self.__sample_ids[index_arr],
            self.__identities[index_arr],
            [self.__modalities[idx] for idx in index_arr],
            self.__features[index_arr]
        )

    def of_modality(self, modality: Modality) -> 'SampleSet':
        """All records of ``modality``, in file order."""
        return self.subset([
            idx for idx, mod in enumerate(self.__modalities) if mod is modality
        ])

    def __eq__(self, other: tp.Any) -> bool:
        if not isinstance(other, SampleSet):
            return False
        return (
            self.split == other.split and self.d_in == other.d_in and
            self.modalities == other.modalities and
            np.array_equal(self.sample_ids, other.sample_ids) and
            np.array_equal(self.identities, other.identities) and
            self.features.tobytes() == other.features.tobytes()
        )

    def __ne__(self, other: tp.Any) -> bool:
        return not self == other

    def __repr__(self) -> str:
        return (
            f"SampleSet(split={self.split.value}, records={len(self)}, "
            f"identities={len(self.identity_index)}, d_in={self.d_in})"
        )


def _format_features(features: np.ndarray) -> str:
    return "[" + ",".join(format(float(x), ".17g") for x in features) + "]"


def save_sample_set(sample_set: SampleSet, file_path: Path) -> None:
    """
    Store a sample set as JSON-lines file.

    Args:
        sample_set: the set to store
        file_path: the file to write
    """
    header = VersionHeader.from_version_number(DOC_TYPE,
                                               FILE_VERSION).get_dict()
    header.update({
        "d_in": sample_set.d_in,
        "split": sample_set.split.value,
        "n_records": len(sample_set),
    })
    with open(file_path, "w") as out_file:
        out_file.write(json.dumps(header) + "\n")
        for record in sample_set.records():
            out_file.write(
                f'{{"sample_id": {record.sample_id}, '
                f'"identity": {record.identity}, '
                f'"modality": "{record.modality.value}", '
                f'"features": {_format_features(record.features)}}}\n'
            )


def _parse_line(file_path: Path, line_no: int, line: str) -> tp.Any:
    try:
        return json.loads(line)
    except json.JSONDecodeError as err:
        raise DatasetParseError(file_path, line_no, str(err)) from err


def load_sample_set(file_path: Path) -> SampleSet:
    """
    Load a sample set from a JSON-lines file.

    Nothing is returned if the file is malformed, i.e., either the whole set
    is loaded or an exception is raised.

    Args:
        file_path: the file to read

    Returns:
        the loaded sample set
    """
    with open(file_path, "r") as in_file:
        lines = in_file.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise DatasetParseError(file_path, 1, "missing header line")

    header = _parse_line(file_path, 1, lines[0])
    if not isinstance(header, dict):
        raise DatasetParseError(file_path, 1, "header is not an object")
    try:
        version_header = VersionHeader(header)
        version_header.raise_if_not_type(DOC_TYPE)
        version_header.raise_if_version_is_less_than(FILE_VERSION)
        d_in = int(header["d_in"])
        split = Split(header["split"])
        n_records = int(header["n_records"])
    except (
        NoVersionHeader, WrongFileType, WrongFileVersion, KeyError,
        ValueError, TypeError
    ) as err:
        raise DatasetParseError(file_path, 1, f"bad header: {err}") from err

    if len(lines) - 1 != n_records:
        raise DatasetParseError(
            file_path, len(lines),
            f"expected {n_records} records but found {len(lines) - 1}"
        )

    sample_ids: tp.List[int] = []
    identities: tp.List[int] = []
    modalities: tp.List[Modality] = []
    features = np.zeros((n_records, d_in))
    for idx, line in enumerate(lines[1:]):
        line_no = idx + 2
        record = _parse_line(file_path, line_no, line)
        try:
            sample_ids.append(int(record["sample_id"]))
            identities.append(int(record["identity"]))
            modalities.append(Modality(record["modality"]))
            values = record["features"]
        except (KeyError, ValueError, TypeError) as err:
            raise DatasetParseError(
                file_path, line_no, f"bad record: {err}"
            ) from err
        if not isinstance(values, list) or len(values) != d_in:
            raise DatasetSchemaError(
                file_path, line_no,
                f"expected {d_in} features but got "
                f"{len(values) if isinstance(values, list) else values}"
            )
        features[idx] = np.array(values, dtype=np.float64)

    LOG.debug(f"Loaded {n_records} records from {file_path}")
    return SampleSet(split, d_in, sample_ids, identities, modalities, features)
