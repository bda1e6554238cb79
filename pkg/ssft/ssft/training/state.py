"""Mutable state of a training run."""
import typing as tp

import numpy as np

from ssft.base.configuration import RunConfig, TrainConfig
from ssft.diffcore.optimizer import Adam
from ssft.model.network import SsftNetwork

# random streams derived from the run seed
INIT_STREAM = 0
EPOCH_STREAM = 1


class TrainState():
    """Network, optimizer moments and counters of a training run."""

    def __init__(
        self, run_config: RunConfig, network: SsftNetwork,
        net_optimizer: Adam, adv_optimizer: Adam, seed: int
    ) -> None:
        self.run_config = run_config
        self.network = network
        self.net_optimizer = net_optimizer
        self.adv_optimizer = adv_optimizer
        self.seed = seed
        self.epoch = 0
        self.step = 0

    @staticmethod
    def create(
        run_config: RunConfig,
        class_ids: tp.Sequence[int],
        seed: tp.Optional[int] = None
    ) -> 'TrainState':
        """Freshly initialized state for the identities ``class_ids``."""
        seed = run_config.seed if seed is None else seed
        rng = np.random.default_rng([seed, INIT_STREAM])
        network = SsftNetwork.create(
            run_config.model, run_config.ablation, run_config.generator.d_in,
            class_ids, rng
        )
        lr = run_config.schedule.lr_at(0)
        return TrainState(
            run_config, network, Adam(network.store.network_params(), lr),
            Adam(network.store.adversary_params(), lr), seed
        )

    @property
    def train_config(self) -> TrainConfig:
        """Loss weights with disabled components zeroed."""
        return self.run_config.ablation.effective_train_config(
            self.run_config.train
        )

    def set_learning_rate(self, lr: float) -> None:
        self.net_optimizer.lr = lr
        self.adv_optimizer.lr = lr
