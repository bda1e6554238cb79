#!/usr/bin/env python3
"""This module contains custom exceptions."""

import typing as tp
from pathlib import Path


class SsftError(Exception):
    """Base class of all errors raised by the ssft tool suite."""


class ShapeError(SsftError):
    """Raised if the operands of an operation have incompatible shapes."""

    def __init__(self, operation: str, *shapes: tp.Tuple[int, ...]) -> None:
        shape_str = ", ".join(str(tuple(shape)) for shape in shapes)
        super().__init__(
            f"Incompatible shapes for '{operation}': {shape_str}"
        )


class ConfigurationError(SsftError):
    """Raised if an operation is called with parameters that can not work,
    e.g., ``k = 0`` or a batch that misses a modality."""


class ConfigValidationError(ConfigurationError):
    """Raised if a run configuration violates one or more constraints; all
    violations are reported at once."""

    def __init__(self, violations: tp.List[str]) -> None:
        self.violations = list(violations)
        super().__init__(
            "Invalid configuration:\n  - " + "\n  - ".join(self.violations)
        )


class DatasetParseError(SsftError):
    """Raised if a dataset file could not be parsed."""

    def __init__(
        self, path: tp.Union[Path, str], line: int, reason: str
    ) -> None:
        super().__init__(f"{str(path)}:{line}: {reason}")


class DatasetSchemaError(SsftError):
    """Raised if a dataset file parses but its records do not match the
    declared header, e.g., a wrong feature dimension."""

    def __init__(
        self, path: tp.Union[Path, str], line: int, reason: str
    ) -> None:
        super().__init__(f"{str(path)}:{line}: {reason}")


class CheckpointVersionError(SsftError):
    """Raised if a checkpoint was written with an unsupported version."""

    def __init__(self, expected: int, actual: int) -> None:
        super().__init__(
            f"Expected checkpoint version '{expected}' but got '{actual}'"
        )


class CheckpointChecksumError(SsftError):
    """Raised if a checkpoint file is truncated or corrupted."""

    def __init__(self, path: tp.Union[Path, str], reason: str) -> None:
        super().__init__(f"Corrupt checkpoint '{str(path)}': {reason}")


class CheckpointShapeError(SsftError):
    """Raised if a checkpoint entry does not fit the configured
    architecture."""

    def __init__(
        self, entry: str, expected: tp.Tuple[int, ...],
        actual: tp.Tuple[int, ...]
    ) -> None:
        super().__init__(
            f"Checkpoint entry '{entry}' has shape {tuple(actual)} "
            f"but the model expects {tuple(expected)}"
        )


class NonFiniteLossError(SsftError):
    """Raised if a loss term became NaN or infinite during training."""

    def __init__(self, term: str, step: int) -> None:
        self.term = term
        super().__init__(
            f"Loss term '{term}' is not finite at training step {step}"
        )


class GradCheckFailure(SsftError):
    """Raised if a gradient check hits non-finite values."""

    def __init__(self, location: str) -> None:
        super().__init__(f"Non-finite value during gradient check: {location}")


class TapeError(SsftError):
    """Raised if a tape is used against its protocol, e.g., running backward
    twice or on a node recorded by another tape."""
