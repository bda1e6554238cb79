"""
Synthetic two-modality identity data.

Every identity owns a latent identity factor ``z`` that both modalities
observe and one modality specific factor ``a`` per modality, e.g., the look
of its clothes in that modality. All samples of an identity in modality ``m``
are ``M_m [z; a_m] + noise``; without noise they coincide.

The identity block of ``M_m`` is a common matrix plus a modality dependent
distortion, so the identity is recoverable from either modality but the raw
features of the two modalities do not match.
"""
import logging
import typing as tp

import numpy as np

from ssft.base.configuration import GeneratorConfig
from ssft.data.sample_set import Modality, SampleSet, Split
from ssft.utils.exceptions import ConfigValidationError

LOG = logging.getLogger(__name__)


class MixingModel():
    """The fixed linear maps of one generated dataset."""

    def __init__(self, cfg: GeneratorConfig, rng: np.random.Generator) -> None:
        scale = 1.0 / np.sqrt(cfg.d_id + cfg.d_spec)
        common = rng.normal(0.0, scale, (cfg.d_in, cfg.d_id))
        distortion = {
            modality: rng.normal(0.0, scale, (cfg.d_in, cfg.d_id))
            for modality in Modality
        }
        specific = {
            modality: rng.normal(0.0, scale, (cfg.d_in, cfg.d_spec))
            for modality in Modality
        }
        self.__mixing = {
            modality: np.concatenate(
                [common + cfg.id_shift * distortion[modality],
                 specific[modality]],
                axis=1
            ) for modality in Modality
        }

    def mixing(self, modality: Modality) -> np.ndarray:
        """``d_in x (d_id + d_spec)`` map of ``modality``."""
        return self.__mixing[modality]


def _generate_split(
    cfg: GeneratorConfig, mixing: MixingModel, rng: np.random.Generator,
    split: Split, identities: tp.Sequence[int], first_sample_id: int
) -> SampleSet:
    n_samples = cfg.samples_per_id_per_modality
    sample_ids: tp.List[int] = []
    labels: tp.List[int] = []
    modalities: tp.List[Modality] = []
    blocks: tp.List[np.ndarray] = []

    for identity in identities:
        id_factor = rng.standard_normal(cfg.d_id)
        for modality in Modality:
            spec_factor = rng.standard_normal(cfg.d_spec)
            latent = np.tile(
                np.concatenate([id_factor, spec_factor]), (n_samples, 1)
            )
            noise = cfg.noise_sigma * rng.standard_normal((n_samples, cfg.d_in))
            blocks.append(latent @ mixing.mixing(modality).T + noise)
            start = first_sample_id + len(sample_ids)
            sample_ids.extend(range(start, start + n_samples))
            labels.extend([identity] * n_samples)
            modalities.extend([modality] * n_samples)

    return SampleSet(
        split, cfg.d_in, sample_ids, labels, modalities,
        np.concatenate(blocks, axis=0)
    )


def generate(cfg: GeneratorConfig) -> tp.Tuple[SampleSet, SampleSet]:
    """
    Generate a deterministic train and test split from ``cfg``.

    Train and test identities are disjoint, every identity has
    ``samples_per_id_per_modality`` samples in each modality and sample ids
    are unique across both splits.

    Args:
        cfg: the generator configuration

    Returns:
        the train and the test split
    """
    violations = cfg.violations()
    if violations:
        raise ConfigValidationError(violations)

    rng = np.random.default_rng(cfg.seed)
    mixing = MixingModel(cfg, rng)
    train = _generate_split(
        cfg, mixing, rng, Split.train, range(cfg.n_train_ids), 0
    )
    test = _generate_split(
        cfg, mixing, rng, Split.test,
        range(cfg.n_train_ids, cfg.n_train_ids + cfg.n_test_ids), len(train)
    )
    LOG.info(
        f"Generated {len(train)} train and {len(test)} test samples "
        f"(seed={cfg.seed})"
    )
    return train, test
