"""The complete model: extractor, classifiers, decoders, transfer network and
adversaries, assembled according to the ablation switches."""
import logging
import typing as tp

import attr
import numpy as np

from ssft.base.configuration import AblationSwitches, ModelConfig, TrainConfig
from ssft.data.sample_set import Modality, SampleSet
from ssft.data.sampler import Batch
from ssft.diffcore import ops
from ssft.diffcore.tape import Matrix, Node, Tape
from ssft.model import extractor, losses, sstn
from ssft.model.extractor import FeatureBundle
from ssft.model.losses import LossComponents, MixedLosses
from ssft.model.parameters import ParameterStore, add_linear, linear
from ssft.utils.exceptions import ConfigurationError, ShapeError

LOG = logging.getLogger(__name__)


@attr.s(frozen=True, eq=False)
class ForwardResult():
    """Everything computed by one training forward pass."""

    mixed: MixedLosses = attr.ib()
    components: LossComponents = attr.ib()
    bundles: tp.Dict[Modality, FeatureBundle] = attr.ib()
    affinity: tp.Optional[sstn.AffinityModel] = attr.ib()
    # shared features the projectors aim at, constants of the backward pass
    project_target: tp.Optional[Matrix] = attr.ib(default=None)


class SsftNetwork():
    """
    Model parameters plus the architecture they belong to.

    Args:
        store: the parameters
        model_cfg: layer dimensions
        switches: enabled components
        d_in: input feature dimension
        class_ids: training identities; identity ``class_ids[c]`` is class
                   ``c`` of the classification heads
    """

    def __init__(
        self, store: ParameterStore, model_cfg: ModelConfig,
        switches: AblationSwitches, d_in: int, class_ids: tp.Sequence[int]
    ) -> None:
        self.__store = store
        self.__model_cfg = model_cfg
        self.__switches = switches
        self.__d_in = d_in
        self.__class_ids = np.unique(np.asarray(class_ids, dtype=np.int64))

    @staticmethod
    def create(
        model_cfg: ModelConfig, switches: AblationSwitches, d_in: int,
        class_ids: tp.Sequence[int], rng: np.random.Generator
    ) -> 'SsftNetwork':
        """Network with freshly initialized parameters."""
        n_classes = len(np.unique(np.asarray(class_ids)))
        store = ParameterStore()
        extractor.add_extractor_params(store, model_cfg, d_in, switches, rng)
        add_linear(store, "classifier/head_H", model_cfg.d_h, n_classes, rng)
        if switches.spl:
            add_linear(
                store, "classifier/head_P", model_cfg.d_p, n_classes, rng
            )
        if switches.re:
            extractor.add_decoder_params(store, model_cfg, d_in, rng)
        if switches.transfer_enabled:
            sstn.add_sstn_params(store, model_cfg, rng)
            add_linear(
                store, "classifier/head_T", model_cfg.d_t, n_classes, rng
            )
        if switches.moa:
            extractor.add_discriminator_params(store, model_cfg, rng)
        if switches.pa and switches.spl:
            extractor.add_projector_params(store, model_cfg, rng)

        LOG.debug(
            f"Created network with {len(store)} parameter matrices "
            f"({store.n_values()} values)"
        )
        return SsftNetwork(store, model_cfg, switches, d_in, class_ids)

    @property
    def store(self) -> ParameterStore:
        return self.__store

    @property
    def model_cfg(self) -> ModelConfig:
        return self.__model_cfg

    @property
    def switches(self) -> AblationSwitches:
        return self.__switches

    @property
    def d_in(self) -> int:
        return self.__d_in

    @property
    def class_ids(self) -> np.ndarray:
        return self.__class_ids

    def class_labels(self, identities: np.ndarray) -> np.ndarray:
        """Class indices of training ``identities``."""
        labels = np.searchsorted(self.__class_ids, identities)
        labels = np.minimum(labels, len(self.__class_ids) - 1)
        if np.any(self.__class_ids[labels] != identities):
            raise ConfigurationError(
                "Batch contains identities the classifiers do not know"
            )
        return labels

    def extract(
        self, tape: Tape, features: Matrix, modality: Modality,
        identities: np.ndarray
    ) -> FeatureBundle:
        return extractor.extract(
            tape, self.__store, features, modality, identities,
            self.__switches
        )

    def extract_set(
        self, tape: Tape, sample_set: SampleSet, modality: Modality
    ) -> FeatureBundle:
        """Features of all samples of ``modality`` in ``sample_set``."""
        subset = sample_set.of_modality(modality)
        return self.extract(
            tape, subset.features, modality, subset.identities
        )

    def build_affinity(
        self, rgb: FeatureBundle, ir: FeatureBundle, k: int
    ) -> sstn.AffinityModel:
        return sstn.build_affinity(rgb, ir, k)

    def pad(
        self,
        bundles: tp.Sequence[FeatureBundle],
        row_order: tp.Optional[np.ndarray] = None
    ) -> sstn.PaddedMatrix:
        """Padded matrix of ``bundles`` with the segments of disabled
        transfer components zeroed."""
        return sstn.pad_features(
            bundles, self.__model_cfg.d_p, self.__switches.sht,
            self.__switches.spt, row_order
        )

    def transfer(
        self, tape: Tape, padded: sstn.PaddedMatrix, aff: sstn.AffinityModel
    ) -> Node:
        """Transferred features of the rows of ``padded``."""
        if not self.__switches.transfer_enabled:
            raise ConfigurationError("Feature transfer is disabled")
        return sstn.propagate(
            tape, sstn.SstnParams.from_store(self.__store), padded, aff
        )

    def forward(
        self,
        tape: Tape,
        batch: Batch,
        cfg: TrainConfig,
        affinity: tp.Optional[sstn.AffinityModel] = None,
        project_target: tp.Optional[Matrix] = None
    ) -> ForwardResult:
        """
        All loss terms of ``batch`` and their mixture.

        Args:
            tape: tape to record on
            batch: a batch with samples of both modalities
            cfg: loss weights, already adjusted to the switches
            affinity: fixed affinity graph; computed from the current shared
                      and specific features if None
            project_target: fixed shared features (RGB rows, then IR rows)
                            the projectors aim at; the current shared
                            features if None. The projection term never
                            passes gradients into the shared stream.

        Returns:
            the mixed losses and intermediate results
        """
        for modality in Modality:
            if batch.size(modality) == 0:
                raise ConfigurationError(
                    f"Batch has no samples of modality {modality.value}"
                )
        store = self.__store
        switches = self.__switches
        zero = tape.constant(0.0)
        bundles = {
            modality: self.extract(
                tape, batch.features[modality], modality,
                batch.identities[modality]
            ) for modality in Modality
        }
        rgb, ir = bundles[Modality.R], bundles[Modality.I]
        all_ids = np.concatenate([rgb.identities, ir.identities])
        all_labels = self.class_labels(all_ids)
        shared_all = ops.concat_rows(rgb.shared, ir.shared)

        cls_shared = losses.classification_loss(
            linear(tape, store, "classifier/head_H", shared_all), all_labels
        )
        cm_shared = losses.cm_triplet(
            rgb.shared, ir.shared, rgb.identities, ir.identities, cfg.rho1
        ).node

        cls_spec = {modality: zero for modality in Modality}
        sm_specific = zero
        if switches.spl:
            for modality, bundle in bundles.items():
                cls_spec[modality] = losses.classification_loss(
                    linear(
                        tape, store, "classifier/head_P",
                        tp.cast(Node, bundle.specific)
                    ), self.class_labels(bundle.identities)
                )
            sm_specific = losses.sm_triplet(
                {m: tp.cast(Node, b.specific) for m, b in bundles.items()},
                {m: b.identities for m, b in bundles.items()}, cfg.rho2
            ).node

        cls_transfer = zero
        triplet_transfer = zero
        if switches.transfer_enabled:
            if affinity is None:
                affinity = self.build_affinity(rgb, ir, cfg.k)
            transferred = self.transfer(tape, self.pad([rgb, ir]), affinity)
            cls_transfer = losses.classification_loss(
                linear(tape, store, "classifier/head_T", transferred),
                all_labels
            )
            triplet_transfer = losses.transfer_loss(
                ops.row_slice(transferred, 0, len(rgb)),
                ops.row_slice(transferred, len(rgb), len(rgb) + len(ir)),
                rgb.identities, ir.identities, cfg.rho1, cfg.rho2
            ).node

        modality_adv = zero
        if switches.moa:
            modality_adv = losses.modality_adversarial(
                extractor.discriminate_modality(tape, store, shared_all),
                [Modality.R] * len(rgb) + [Modality.I] * len(ir)
            )

        project_adv = zero
        if switches.pa and switches.spl:
            if project_target is None:
                project_target = shared_all.value.copy()
            elif project_target.shape != shared_all.shape:
                raise ShapeError(
                    "project_target", project_target.shape, shared_all.shape
                )
            project_adv = losses.project_adversarial(
                ops.concat_rows(
                    extractor.project_specific(tape, store, rgb),
                    extractor.project_specific(tape, store, ir)
                ), tape.constant(project_target)
            )

        reconstruction = zero
        if switches.re:
            d_p = self.__model_cfg.d_p
            reconstruction = losses.reconstruction_loss(
                tape.constant(
                    np.concatenate([
                        batch.features[Modality.R], batch.features[Modality.I]
                    ])
                ),
                ops.concat_rows(
                    extractor.reconstruct(tape, store, rgb, d_p),
                    extractor.reconstruct(tape, store, ir, d_p)
                )
            )

        components = losses.LossComponents(
            cls_shared=cls_shared,
            cls_specific_r=cls_spec[Modality.R],
            cls_specific_i=cls_spec[Modality.I],
            cls_transfer=cls_transfer,
            cm_triplet_shared=cm_shared,
            sm_triplet_specific=sm_specific,
            triplet_transfer=triplet_transfer,
            modality_adv=modality_adv,
            project_adv=project_adv,
            reconstruction=reconstruction
        )
        return ForwardResult(
            losses.mix(components, cfg), components, bundles, affinity,
            project_target
        )
