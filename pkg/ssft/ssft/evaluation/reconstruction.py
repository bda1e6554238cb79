"""Reconstruction error of the decoders fed with partial features."""
import json
import logging
import typing as tp
from pathlib import Path

import attr

from ssft.data.sample_set import Modality, SampleSet
from ssft.diffcore.tape import Tape
from ssft.model import extractor
from ssft.model.losses import reconstruction_loss
from ssft.model.network import SsftNetwork
from ssft.utils.exceptions import ConfigurationError

LOG = logging.getLogger(__name__)

# decoder inputs: (name, use specific features, use shared features)
VARIANTS = (
    ("shared_only", False, True),
    ("specific_only", True, False),
    ("all", True, True),
)


@attr.s(frozen=True)
class ReconstructionReport():
    """Mean reconstruction error per modality and decoder input."""

    errors: tp.Dict[str, tp.Dict[str, float]] = attr.ib()

    def to_dict(self) -> tp.Dict[str, tp.Dict[str, float]]:
        return {
            modality: dict(variants)
            for modality, variants in self.errors.items()
        }

    def save(self, json_path: Path) -> None:
        with open(json_path, "w") as json_file:
            json.dump(self.to_dict(), json_file, indent=2)


def reconstruction_report(
    network: SsftNetwork, sample_set: SampleSet
) -> ReconstructionReport:
    """
    Reconstruct every sample from its shared features only, its specific
    features only and from both.

    Args:
        network: a network trained with reconstruction
        sample_set: samples of one or both modalities

    Returns:
        the mean error (squared error over the input dimension) per modality
        and decoder input
    """
    if not network.switches.re:
        raise ConfigurationError("The network has no decoders (RE disabled)")

    tape = Tape(grad_enabled=False)
    d_p = network.model_cfg.d_p
    errors: tp.Dict[str, tp.Dict[str, float]] = {}
    for modality in Modality:
        subset = sample_set.of_modality(modality)
        if len(subset) == 0:
            continue
        bundle = network.extract(
            tape, subset.features, modality, subset.identities
        )
        inputs = tape.constant(subset.features)
        errors[modality.value] = {}
        for name, use_specific, use_shared in VARIANTS:
            decoded = extractor.decode(
                tape, network.store, modality,
                extractor.decoder_input(bundle, d_p, use_specific, use_shared)
            )
            errors[modality.value][name] = reconstruction_loss(
                inputs, decoded
            ).item()
        LOG.info(f"Reconstruction errors {modality.value}: {errors}")
    return ReconstructionReport(errors)
