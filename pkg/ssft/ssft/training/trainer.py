"""
Alternating min-max training.

Every step first minimizes the network objective over the network partition
with the adversaries fixed, then, on a fresh forward pass, lets the
adversaries (modality discriminator and projectors) minimize the negated
adversarial objective with the network fixed. Both partitions have their own
Adam instance.
"""
import logging
import typing as tp
from pathlib import Path

import attr
import numpy as np

from ssft.base.configuration import RunConfig, TrainConfig
from ssft.data.sample_set import Modality, SampleSet
from ssft.data.sampler import Batch, PKBatchSampler
from ssft.diffcore import ops
from ssft.diffcore.tape import Tape, zero_grads
from ssft.model.losses import LossReport
from ssft.model.network import ForwardResult
from ssft.training.checkpoint import save_checkpoint
from ssft.training.state import EPOCH_STREAM, TrainState
from ssft.utils.cli_util import create_progress
from ssft.utils.exceptions import ConfigurationError, NonFiniteLossError

LOG = logging.getLogger(__name__)

LOG_FILE_NAME = "train_log.jsonl"
FINAL_CHECKPOINT_NAME = "checkpoint_final.ssft"


def epoch_checkpoint_name(epoch: int) -> str:
    """
    Test:
    >>> epoch_checkpoint_name(10)
    'checkpoint_epoch_010.ssft'
    """
    return f"checkpoint_epoch_{epoch:03d}.ssft"


@attr.s(frozen=True)
class TrainResult():
    state: TrainState = attr.ib()
    history: tp.List[tp.Dict[str, float]] = attr.ib()


def _raise_if_non_finite(report: LossReport, step: int) -> None:
    non_finite = report.non_finite_terms()
    if non_finite:
        raise NonFiniteLossError(non_finite[0], step)


def _check_batch(batch: Batch) -> None:
    if batch.size(Modality.R) != batch.size(Modality.I):
        raise ConfigurationError(
            f"Unbalanced batch: {batch.size(Modality.R)} RGB and "
            f"{batch.size(Modality.I)} IR samples"
        )


def min_step(state: TrainState, batch: Batch, cfg: TrainConfig) -> LossReport:
    """
    One update of the network partition against the minimized objective.

    Returns:
        the report of the forward pass before the update
    """
    tape = Tape()
    result: ForwardResult = state.network.forward(tape, batch, cfg)
    _raise_if_non_finite(result.mixed.report, state.step)
    zero_grads(state.network.store)
    tape.backward(result.mixed.minimized)
    state.net_optimizer.step()
    zero_grads(state.network.store)
    return result.mixed.report


def max_step(state: TrainState, batch: Batch, cfg: TrainConfig) -> LossReport:
    """
    One update of the adversary partition against the maximized objective.

    Returns:
        the report of the forward pass before the update
    """
    tape = Tape()
    result = state.network.forward(tape, batch, cfg)
    _raise_if_non_finite(result.mixed.report, state.step)
    if state.adv_optimizer.params:
        zero_grads(state.network.store)
        tape.backward(ops.scale(result.mixed.maximized, -1.0))
        state.adv_optimizer.step()
        zero_grads(state.network.store)
    return result.mixed.report


def train_step(
    state: TrainState, batch: Batch, cfg: tp.Optional[TrainConfig] = None
) -> LossReport:
    """
    A min step followed by a max step on ``batch``.

    Args:
        state: the state to update in place
        batch: a balanced batch with both modalities
        cfg: effective loss weights, defaults to the weights of the state

    Returns:
        the mid-step report: losses of the forward pass of the max step,
        i.e., after the network update and before the adversary update.
        No extra forward pass is spent on the state after both updates.
    """
    _check_batch(batch)
    cfg = cfg or state.train_config
    min_step(state, batch, cfg)
    report = max_step(state, batch, cfg)
    state.step += 1
    return report


def train(
    train_set: SampleSet,
    run_config: RunConfig,
    out_dir: tp.Optional[Path] = None,
    state: tp.Optional[TrainState] = None,
    show_progress: bool = True
) -> TrainResult:
    """
    Train from scratch or continue ``state`` until the configured number of
    epochs is reached.

    Args:
        train_set: the training split
        run_config: the resolved run configuration
        out_dir: directory for the training log and the checkpoints; nothing
                 is written if None
        state: a state restored from a checkpoint to resume
        show_progress: show a progress bar if enabled in the settings

    Returns:
        the final state and the loss history of the executed steps
    """
    if train_set.d_in != run_config.generator.d_in:
        raise ConfigurationError(
            f"Dataset has d_in={train_set.d_in}, the config expects "
            f"{run_config.generator.d_in}"
        )
    if state is None:
        state = TrainState.create(
            run_config, sorted(train_set.identity_set())
        )
    schedule = run_config.schedule
    cfg = state.train_config
    history: tp.List[tp.Dict[str, float]] = []

    log_file = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        log_file = open(
            out_dir / LOG_FILE_NAME, "a" if state.step > 0 else "w"
        )

    progress = create_progress() if show_progress else None
    try:
        if progress is not None:
            progress.start()
            task = progress.add_task(
                "Training",
                total=schedule.epochs * schedule.batches_per_epoch,
                completed=state.epoch * schedule.batches_per_epoch,
                status=""
            )
        for epoch in range(state.epoch, schedule.epochs):
            state.set_learning_rate(schedule.lr_at(epoch))
            sampler = PKBatchSampler(
                train_set, cfg.n_ids, cfg.n_per_modality,
                np.random.default_rng([state.seed, EPOCH_STREAM, epoch])
            )
            for _ in range(schedule.batches_per_epoch):
                report = train_step(state, sampler.next_batch(), cfg)
                entry: tp.Dict[str, float] = {
                    "step": state.step,
                    "epoch": epoch
                }
                entry.update(report.values)
                history.append(entry)
                if state.step % schedule.log_interval == 0:
                    if log_file is not None:
                        log_file.write(
                            report.to_json(state.step, epoch) + "\n"
                        )
                    LOG.debug(
                        f"epoch {epoch} step {state.step}: "
                        f"L_min={report['L_min']:.4f}"
                    )
                if progress is not None:
                    progress.update(
                        task,
                        advance=1,
                        status=f"epoch {epoch + 1}/{schedule.epochs} "
                        f"L_min={report['L_min']:.4f}"
                    )
            state.epoch = epoch + 1
            LOG.info(
                f"Finished epoch {state.epoch}/{schedule.epochs} "
                f"(lr={schedule.lr_at(epoch):.2e})"
            )
            if (
                out_dir is not None and schedule.checkpoint_interval > 0 and
                state.epoch % schedule.checkpoint_interval == 0
            ):
                save_checkpoint(
                    state, out_dir / epoch_checkpoint_name(state.epoch)
                )
    finally:
        if progress is not None:
            progress.stop()
        if log_file is not None:
            log_file.close()

    if out_dir is not None:
        save_checkpoint(state, out_dir / FINAL_CHECKPOINT_NAME)
    return TrainResult(state, history)
