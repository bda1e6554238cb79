"""
Ablation study: trains and evaluates the model with selected components
switched off, over several seeds per row.
"""
import logging
import multiprocessing as mp
import typing as tp

import attr
import numpy as np

from ssft.base.configuration import (
    ABLATION_ROWS,
    SWITCH_LABELS,
    AblationSwitches,
    RunConfig,
)
from ssft.data.sample_set import SampleSet
from ssft.evaluation.evaluator import RetrievalEvaluator, split_direction
from ssft.training.trainer import train
from ssft.utils.exceptions import ConfigValidationError

LOG = logging.getLogger(__name__)


def parse_row(token: str) -> tp.Tuple[str, AblationSwitches]:
    """
    Ablation row from its number or from ``+`` separated component labels.

    Test:
    >>> parse_row("ShL+SpL")[1].labels()
    ['ShL', 'SpL']
    >>> parse_row("12")[0]
    '12'
    """
    token = token.strip()
    if token.isdigit():
        if int(token) not in ABLATION_ROWS:
            raise ConfigValidationError([
                f"ablation row must be one of {sorted(ABLATION_ROWS)}, "
                f"got {token}"
            ])
        return token, ABLATION_ROWS[int(token)]

    by_label = {label: name for name, label in SWITCH_LABELS.items()}
    labels = [label for label in token.split("+") if label]
    unknown = [label for label in labels if label not in by_label]
    if unknown:
        raise ConfigValidationError([
            f"unknown ablation component '{label}'" for label in unknown
        ])
    enabled = {by_label[label] for label in labels}
    switches = AblationSwitches(
        **{name: name in enabled for name in SWITCH_LABELS}
    )
    violations = switches.violations()
    if violations:
        raise ConfigValidationError([
            f"row '{token}': {violation}" for violation in violations
        ])
    return token, switches


@attr.s(frozen=True)
class AblationRowResult():
    """Retrieval results of one ablation row over all seeds."""

    row: str = attr.ib()
    switches: AblationSwitches = attr.ib()
    seeds: tp.Tuple[int, ...] = attr.ib(converter=tuple)
    r1: tp.Tuple[float, ...] = attr.ib(converter=tuple)
    maps: tp.Tuple[float, ...] = attr.ib(converter=tuple)

    @property
    def median_r1(self) -> float:
        return float(np.median(self.r1))

    @property
    def median_map(self) -> float:
        return float(np.median(self.maps))


@attr.s(frozen=True)
class _Job():
    row: str = attr.ib()
    switches: AblationSwitches = attr.ib()
    seed: int = attr.ib()
    run_config: RunConfig = attr.ib()
    train_set: SampleSet = attr.ib()
    test_set: SampleSet = attr.ib()


def _run_job(job: _Job) -> tp.Tuple[str, int, float, float]:
    run_config = attr.evolve(
        job.run_config, ablation=job.switches, seed=job.seed
    )
    result = train(job.train_set, run_config, show_progress=False)
    query_set, gallery_set = split_direction(
        job.test_set, run_config.eval.direction
    )
    report = RetrievalEvaluator(
        result.state.network, query_set, gallery_set, run_config.eval.k,
        run_config.eval.feature
    ).evaluate_all_queries()
    LOG.info(
        f"row {job.row} seed {job.seed}: r1={report.rank(1):.4f} "
        f"mAP={report.map:.4f}"
    )
    return job.row, job.seed, report.rank(1), report.map


def run_ablation(
    run_config: RunConfig,
    train_set: SampleSet,
    test_set: SampleSet,
    rows: tp.Sequence[str],
    seeds: tp.Sequence[int],
    workers: int = 1
) -> tp.List[AblationRowResult]:
    """
    Train and evaluate every row for every seed.

    Args:
        run_config: base configuration, its switches are replaced per row
        train_set: the training split
        test_set: the test split
        rows: row numbers or component label combinations
        seeds: training seeds
        workers: number of worker processes

    Returns:
        one result per row, in the given row order
    """
    parsed = [parse_row(row) for row in rows]
    tokens = [row for row, _ in parsed]
    repeated = sorted({row for row in tokens if tokens.count(row) > 1})
    if repeated:
        raise ConfigValidationError([
            f"ablation row '{row}' is given more than once"
            for row in repeated
        ])
    if len(set(seeds)) != len(seeds):
        raise ConfigValidationError([f"repeated seeds in {list(seeds)}"])
    jobs = [
        _Job(row, switches, seed, run_config, train_set, test_set)
        for row, switches in parsed
        for seed in seeds
    ]
    LOG.info(f"Running {len(jobs)} ablation jobs on {workers} workers")
    if workers > 1 and len(jobs) > 1:
        with mp.Pool(min(workers, len(jobs))) as pool:
            outcomes = pool.map(_run_job, jobs)
    else:
        outcomes = [_run_job(job) for job in jobs]

    by_key = {(row, seed): (r1, mean_ap) for row, seed, r1, mean_ap in outcomes}
    return [
        AblationRowResult(
            row, switches, tuple(seeds),
            [by_key[(row, seed)][0] for seed in seeds],
            [by_key[(row, seed)][1] for seed in seeds]
        ) for row, switches in parsed
    ]
