"""
Binary checkpoints of a training state.

Layout (little-endian): magic ``SSFT``, version u32, entry count u32, then
per entry the name length u32, the UTF-8 name, rows u32, cols u32 and
rows x cols float64 values. A CRC32 of everything before it closes the file.

Entries are the parameters (adversaries under ``adv/``), the optimizer
moments of both partitions (``opt/net/`` and ``opt/adv/``) and the counters
of the run (``state/``).
"""
import logging
import struct
import typing as tp
import zlib
from pathlib import Path

import numpy as np

from ssft.base.configuration import RunConfig
from ssft.diffcore.tape import Matrix
from ssft.training.state import TrainState
from ssft.utils.exceptions import (
    CheckpointChecksumError,
    CheckpointShapeError,
    CheckpointVersionError,
)

LOG = logging.getLogger(__name__)

MAGIC = b"SSFT"
CHECKPOINT_VERSION = 1

NET_OPTIMIZER_PREFIX = "opt/net/"
ADV_OPTIMIZER_PREFIX = "opt/adv/"

_U32 = struct.Struct("<I")


def state_entries(state: TrainState) -> tp.Dict[str, Matrix]:
    """All named matrices of ``state``, in file order."""
    entries: tp.Dict[str, Matrix] = {
        "state/seed": np.array([[float(state.seed)]]),
        "state/epoch": np.array([[float(state.epoch)]]),
        "state/step": np.array([[float(state.step)]]),
        "state/class_ids":
            state.network.class_ids.astype(np.float64).reshape(1, -1),
    }
    entries.update(state.network.store.entries())
    entries.update(state.net_optimizer.state_entries(NET_OPTIMIZER_PREFIX))
    entries.update(state.adv_optimizer.state_entries(ADV_OPTIMIZER_PREFIX))
    return entries


def encode_entries(entries: tp.Mapping[str, Matrix]) -> bytes:
    chunks = [MAGIC, _U32.pack(CHECKPOINT_VERSION), _U32.pack(len(entries))]
    for name, value in entries.items():
        encoded_name = name.encode("utf-8")
        matrix = np.ascontiguousarray(value, dtype="<f8")
        rows, cols = matrix.shape
        chunks += [
            _U32.pack(len(encoded_name)), encoded_name,
            _U32.pack(rows),
            _U32.pack(cols),
            matrix.tobytes()
        ]
    payload = b"".join(chunks)
    return payload + _U32.pack(zlib.crc32(payload))


def decode_entries(data: bytes, path: Path) -> tp.Dict[str, Matrix]:
    """
    Parse the bytes of a checkpoint file.

    Raises:
        CheckpointChecksumError: truncated or corrupted data
        CheckpointVersionError: unsupported version
    """
    if len(data) < len(MAGIC) + 3 * _U32.size or not data.startswith(MAGIC):
        raise CheckpointChecksumError(path, "not a checkpoint file")
    version = _U32.unpack_from(data, len(MAGIC))[0]
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(CHECKPOINT_VERSION, version)

    payload, checksum = data[:-_U32.size], _U32.unpack(data[-_U32.size:])[0]
    if zlib.crc32(payload) != checksum:
        raise CheckpointChecksumError(path, "checksum mismatch")

    entries: tp.Dict[str, Matrix] = {}
    offset = len(MAGIC) + _U32.size
    try:
        count = _U32.unpack_from(payload, offset)[0]
        offset += _U32.size
        for _ in range(count):
            name_len = _U32.unpack_from(payload, offset)[0]
            offset += _U32.size
            name = payload[offset:offset + name_len].decode("utf-8")
            offset += name_len
            rows, cols = struct.unpack_from("<II", payload, offset)
            offset += 2 * _U32.size
            n_bytes = rows * cols * 8
            if offset + n_bytes > len(payload):
                raise CheckpointChecksumError(path, f"entry '{name}' is cut")
            entries[name] = np.frombuffer(
                payload, dtype="<f8", count=rows * cols, offset=offset
            ).astype(np.float64).reshape(rows, cols)
            offset += n_bytes
    except (struct.error, UnicodeDecodeError) as err:
        raise CheckpointChecksumError(path, str(err)) from err
    if offset != len(payload):
        raise CheckpointChecksumError(path, "trailing bytes")
    return entries


def save_checkpoint(state: TrainState, path: Path) -> None:
    """Write ``state`` to ``path``."""
    with open(path, "wb") as out_file:
        out_file.write(encode_entries(state_entries(state)))
    LOG.info(f"Wrote checkpoint {path} (epoch {state.epoch})")


def _scalar(entries: tp.Mapping[str, Matrix], name: str) -> int:
    if name not in entries:
        raise CheckpointShapeError(name, (1, 1), ())
    value = entries[name]
    if value.shape != (1, 1):
        raise CheckpointShapeError(name, (1, 1), value.shape)
    return int(value[0, 0])


def _check_shapes(
    expected: tp.Mapping[str, Matrix], entries: tp.Mapping[str, Matrix]
) -> None:
    for name, value in expected.items():
        if name not in entries:
            raise CheckpointShapeError(name, value.shape, ())
        if entries[name].shape != value.shape:
            raise CheckpointShapeError(name, value.shape, entries[name].shape)


def load_checkpoint(path: Path, run_config: RunConfig) -> TrainState:
    """
    Restore a training state.

    Args:
        path: the checkpoint file
        run_config: config of the run that wrote the checkpoint, defines the
                    architecture

    Returns:
        the restored state, bit-identical to the saved one
    """
    with open(path, "rb") as in_file:
        entries = decode_entries(in_file.read(), path)

    if "state/class_ids" not in entries:
        raise CheckpointShapeError("state/class_ids", (1, 0), ())
    class_ids = entries["state/class_ids"].reshape(-1).astype(np.int64)
    seed = _scalar(entries, "state/seed")
    if seed != run_config.seed:
        LOG.warning(
            f"Checkpoint was trained with seed {seed}, not {run_config.seed}"
        )

    state = TrainState.create(run_config, class_ids, seed=seed)
    net_prefix, adv_prefix = NET_OPTIMIZER_PREFIX, ADV_OPTIMIZER_PREFIX
    _check_shapes(state.network.store.entries(), entries)
    _check_shapes(state.net_optimizer.state_entries(net_prefix), entries)
    _check_shapes(state.adv_optimizer.state_entries(adv_prefix), entries)

    state.network.store.load_entries(entries)
    state.net_optimizer.load_state_entries(net_prefix, entries)
    state.adv_optimizer.load_state_entries(adv_prefix, entries)
    state.epoch = _scalar(entries, "state/epoch")
    state.step = _scalar(entries, "state/step")
    LOG.info(f"Loaded checkpoint {path} (epoch {state.epoch})")
    return state
