"""
Two-stream feature extractor with its complementary-learning parts.

Each modality enters through its own stem layer. The shared stream (one
trunk for both modalities) yields the shared features ``H``. The specific
stream (one trunk per modality) yields the specific features ``P``. The
decoders, the modality discriminator and the projectors work on these
features.
"""
import typing as tp

import attr
import numpy as np

from ssft.base.configuration import AblationSwitches, ModelConfig
from ssft.data.sample_set import Modality
from ssft.diffcore import ops
from ssft.diffcore.tape import Matrix, Node, Tape
from ssft.model.parameters import (
    ADVERSARY_PREFIX,
    ParameterStore,
    add_linear,
    add_linear_copies,
    add_matrix,
    linear,
    linear_relu,
)
from ssft.utils.exceptions import ShapeError

SHARED_STEM = "extractor/stem_shared"


@attr.s(frozen=True, eq=False)
class FeatureBundle():
    """Shared and (optional) specific features of a set of samples of one
    modality."""

    modality: Modality = attr.ib()
    shared: Node = attr.ib()
    specific: tp.Optional[Node] = attr.ib()
    identities: np.ndarray = attr.ib()

    def __len__(self) -> int:
        return int(self.shared.shape[0])

    def specific_or_shared(self) -> Node:
        """Features for the intra-modality affinity; the shared features
        stand in if there is no specific stream."""
        return self.specific if self.specific is not None else self.shared


def _stem_name(modality: Modality, switches: AblationSwitches) -> str:
    return f"extractor/stem_{modality.value}" if switches.sas else SHARED_STEM


def add_extractor_params(
    store: ParameterStore, cfg: ModelConfig, d_in: int,
    switches: AblationSwitches, rng: np.random.Generator
) -> None:
    """
    Register stems, the shared trunk and, with SpL, the specific trunks.

    The RGB and the IR copy of a per-modality layer start from the same
    values, so separate stems begin as one shared stem and only drift apart
    through training.
    """
    if switches.sas:
        add_linear_copies(
            store, [_stem_name(m, switches) for m in Modality], d_in,
            cfg.hidden, rng
        )
    else:
        add_linear(store, SHARED_STEM, d_in, cfg.hidden, rng)

    add_linear(store, "extractor/trunk_shared", cfg.hidden, cfg.hidden, rng)
    add_linear(store, "extractor/feat_shared", cfg.hidden, cfg.d_h, rng)
    if switches.spl:
        add_linear_copies(
            store, [f"extractor/trunk_spec_{m.value}" for m in Modality],
            cfg.hidden, cfg.hidden, rng
        )
        add_linear_copies(
            store, [f"extractor/feat_spec_{m.value}" for m in Modality],
            cfg.hidden, cfg.d_p, rng
        )


def add_decoder_params(
    store: ParameterStore, cfg: ModelConfig, d_in: int,
    rng: np.random.Generator
) -> None:
    for modality in Modality:
        add_linear(
            store, f"decoder/{modality.value}/hidden", cfg.d_p + cfg.d_h,
            cfg.hidden, rng
        )
        add_linear(
            store, f"decoder/{modality.value}/out", cfg.hidden, d_in, rng
        )


def add_discriminator_params(
    store: ParameterStore, cfg: ModelConfig, rng: np.random.Generator
) -> None:
    add_linear(store, f"{ADVERSARY_PREFIX}disc/fc1", cfg.d_h, cfg.hidden, rng)
    add_linear(
        store, f"{ADVERSARY_PREFIX}disc/fc2", cfg.hidden, cfg.hidden, rng
    )
    add_linear(store, f"{ADVERSARY_PREFIX}disc/fc3", cfg.hidden, 2, rng)


def add_projector_params(
    store: ParameterStore, cfg: ModelConfig, rng: np.random.Generator
) -> None:
    for modality in Modality:
        add_matrix(
            store, f"{ADVERSARY_PREFIX}proj_{modality.value}", cfg.d_p,
            cfg.d_h, rng
        )


def extract(
    tape: Tape, store: ParameterStore, features: Matrix, modality: Modality,
    identities: np.ndarray, switches: AblationSwitches
) -> FeatureBundle:
    """
    Shared and specific features of ``features``, all rows of ``modality``.

    Args:
        tape: tape to record on
        store: model parameters
        features: n x d_in input rows
        modality: modality of all rows
        identities: identity labels of the rows
        switches: selects stems and streams

    Returns:
        the feature bundle of the rows
    """
    stem_weight = store[f"{_stem_name(modality, switches)}/weight"]
    if features.ndim != 2 or features.shape[1] != stem_weight.shape[0]:
        raise ShapeError("extract", features.shape, stem_weight.shape)

    inputs = tape.constant(features)
    stem = linear_relu(tape, store, _stem_name(modality, switches), inputs)
    shared = linear(
        tape, store, "extractor/feat_shared",
        linear_relu(tape, store, "extractor/trunk_shared", stem)
    )
    specific = None
    if switches.spl:
        specific = linear(
            tape, store, f"extractor/feat_spec_{modality.value}",
            linear_relu(
                tape, store, f"extractor/trunk_spec_{modality.value}", stem
            )
        )
    return FeatureBundle(
        modality, shared, specific, np.asarray(identities, dtype=np.int64)
    )


def decoder_input(
    bundle: FeatureBundle,
    d_p: int,
    use_specific: bool = True,
    use_shared: bool = True
) -> Node:
    """
    Decoder input ``[P; H]``; disabled or missing parts are replaced by
    zeros.
    """
    tape = bundle.shared.tape
    rows = len(bundle)
    if use_specific and bundle.specific is not None:
        specific = bundle.specific
    else:
        specific = tape.constant(np.zeros((rows, d_p)))
    shared = bundle.shared if use_shared else tape.constant(
        np.zeros(bundle.shared.shape)
    )
    return ops.concat_columns(specific, shared)


def reconstruct(
    tape: Tape, store: ParameterStore, bundle: FeatureBundle, d_p: int
) -> Node:
    """Reconstruct the inputs of ``bundle`` with the decoder of its
    modality."""
    return decode(tape, store, bundle.modality, decoder_input(bundle, d_p))


def decode(
    tape: Tape, store: ParameterStore, modality: Modality, inputs: Node
) -> Node:
    hidden = linear_relu(
        tape, store, f"decoder/{modality.value}/hidden", inputs
    )
    return linear(tape, store, f"decoder/{modality.value}/out", hidden)


def discriminate_modality(
    tape: Tape, store: ParameterStore, shared: Node
) -> Node:
    """Modality logits (n x 2) of the shared features."""
    hidden = linear_relu(tape, store, f"{ADVERSARY_PREFIX}disc/fc1", shared)
    hidden = linear_relu(tape, store, f"{ADVERSARY_PREFIX}disc/fc2", hidden)
    return linear(tape, store, f"{ADVERSARY_PREFIX}disc/fc3", hidden)


def project_specific(
    tape: Tape, store: ParameterStore, bundle: FeatureBundle
) -> Node:
    """Projection of the specific features onto the shared feature space."""
    if bundle.specific is None:
        raise ShapeError("project_specific", bundle.shared.shape)
    projector = tape.param(
        store[f"{ADVERSARY_PREFIX}proj_{bundle.modality.value}"]
    )
    return ops.matmul(bundle.specific, projector)
