"""Driver module for `ssft`."""

import json
import logging
import sys
import typing as tp
from argparse import ArgumentParser, _SubParsersAction
from pathlib import Path

import attr
import numpy as np
import yaml

from ssft.base.configuration import (
    ABLATION_ROWS,
    EVAL_DIRECTIONS,
    EVAL_FEATURES,
    EVAL_MODES,
    RunConfig,
    load_run_config,
    store_run_config,
)
from ssft.base.version_header import (
    NoVersionHeader,
    WrongFileType,
    WrongFileVersion,
)
from ssft.data.generator import generate
from ssft.data.sample_set import SampleSet, load_sample_set, save_sample_set
from ssft.evaluation.evaluator import (
    RetrievalEvaluator,
    aux_sweep,
    resolve_aux_size,
    split_direction,
)
from ssft.evaluation.reconstruction import reconstruction_report
from ssft.evaluation.report import mean_report
from ssft.experiments.ablation import run_ablation
from ssft.tables.tables import build_table
from ssft.training.checkpoint import load_checkpoint
from ssft.training.state import TrainState
from ssft.training.trainer import train
from ssft.utils.cli_util import initialize_cli_tool
from ssft.utils.exceptions import (
    ConfigurationError,
    DatasetParseError,
    DatasetSchemaError,
    SsftError,
)
from ssft.utils.settings import get_worker_count, ssft_cfg

LOG = logging.getLogger(__name__)

TRAIN_FILE_NAME = "train.jsonl"
TEST_FILE_NAME = "test.jsonl"
CONFIG_SNAPSHOT_NAME = "config.yaml"

EXIT_SUCCESS = 0
EXIT_CONFIG_ERROR = 2
EXIT_RUNTIME_ERROR = 3


def main(argv: tp.Optional[tp.List[str]] = None) -> int:
    """
    Synthesize datasets, train, evaluate, run the ablation matrix and the
    auxiliary set sweep.

    `ssft`
    """
    initialize_cli_tool()
    parser = ArgumentParser("ssft")
    parser.add_argument(
        "--print-config",
        help="Print the default config as JSON and exit",
        action="store_true",
        default=False
    )
    sub_parsers = parser.add_subparsers(help="Subcommand", dest="subcommand")

    __create_synth_parser(sub_parsers)  # ssft synth
    __create_train_parser(sub_parsers)  # ssft train
    __create_eval_parser(sub_parsers)  # ssft eval
    __create_ablate_parser(sub_parsers)  # ssft ablate
    __create_sweep_parser(sub_parsers)  # ssft sweep-aux

    args = {
        k: v for k, v in vars(parser.parse_args(argv)).items() if v is not None
    }

    try:
        if args["print_config"]:
            print(
                json.dumps(__load_config(args).get_dict(), indent=2),
                flush=True
            )
            return EXIT_SUCCESS

        if 'subcommand' not in args:
            parser.print_help()
            return EXIT_CONFIG_ERROR

        if args['subcommand'] == 'synth':
            __synth(args)
        elif args['subcommand'] == 'train':
            __train(args)
        elif args['subcommand'] == 'eval':
            __eval(args)
        elif args['subcommand'] == 'ablate':
            __ablate(args)
        elif args['subcommand'] == 'sweep-aux':
            __sweep_aux(args)
    except (
        ConfigurationError, DatasetParseError, DatasetSchemaError,
        NoVersionHeader, WrongFileType, WrongFileVersion, yaml.YAMLError,
        ValueError
    ) as err:
        LOG.error(str(err))
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (SsftError, OSError) as err:
        LOG.error(str(err))
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME_ERROR
    return EXIT_SUCCESS


def __add_common_args(sub_parser: ArgumentParser) -> None:
    """Group common args to provide all args on different sub parsers."""
    sub_parser.add_argument("--config", help="Run config file (JSON or yaml)")
    sub_parser.add_argument(
        "--seed", help="Overrides the seed of the config", type=int
    )
    sub_parser.add_argument(
        "--out", help="Output directory (default: the result_dir setting)"
    )


def __add_data_arg(sub_parser: ArgumentParser) -> None:
    sub_parser.add_argument(
        "--data",
        help="Directory with the train and test files "
        "(default: the data_dir setting)"
    )


def __add_eval_args(sub_parser: ArgumentParser) -> None:
    sub_parser.add_argument(
        "--checkpoint", help="Checkpoint of a trained model", required=True
    )
    sub_parser.add_argument(
        "--direction",
        help="Query direction: RGB queries against the IR gallery (r2i) or "
        "the other way round (i2r)",
        choices=EVAL_DIRECTIONS
    )
    sub_parser.add_argument(
        "--feature",
        help="Retrieval feature: transferred (transfer), transferred and "
        "shared (concat) or shared only (shared)",
        choices=EVAL_FEATURES
    )


def __create_synth_parser(sub_parsers: _SubParsersAction) -> None:
    synth_parser = sub_parsers.add_parser(
        'synth', help="Generate the synthetic train and test datasets"
    )
    __add_common_args(synth_parser)


def __create_train_parser(sub_parsers: _SubParsersAction) -> None:
    train_parser = sub_parsers.add_parser('train', help="Train a model")
    __add_common_args(train_parser)
    __add_data_arg(train_parser)
    train_parser.add_argument(
        "--resume", help="Continue training from this checkpoint"
    )


def __create_eval_parser(sub_parsers: _SubParsersAction) -> None:
    eval_parser = sub_parsers.add_parser(
        'eval', help="Evaluate a trained model"
    )
    __add_common_args(eval_parser)
    __add_data_arg(eval_parser)
    __add_eval_args(eval_parser)
    eval_parser.add_argument(
        "--mode",
        help="All queries in one graph (all) or one graph per query (single)",
        choices=EVAL_MODES
    )
    eval_parser.add_argument(
        "--aux-size",
        help="Evaluate with random auxiliary query groups of this size "
        "(count, percentage or 'all')"
    )
    eval_parser.add_argument(
        "--aux-trials", help="Resamplings of the auxiliary groups", type=int
    )
    eval_parser.add_argument(
        "--recon",
        help="Also write the reconstruction report",
        action="store_true",
        default=False
    )
    eval_parser.add_argument(
        "--dump-affinity",
        help="Write the affinity matrix of the all-queries graph",
        action="store_true",
        default=False
    )


def __create_ablate_parser(sub_parsers: _SubParsersAction) -> None:
    ablate_parser = sub_parsers.add_parser(
        'ablate', help="Train and evaluate the ablation rows"
    )
    __add_common_args(ablate_parser)
    __add_data_arg(ablate_parser)
    ablate_parser.add_argument(
        "--rows",
        help="Comma separated row numbers (1-12) or '+' joined component "
        "labels, e.g., 1,12,ShL+SpL"
    )
    ablate_parser.add_argument(
        "--seeds", help="Comma separated training seeds"
    )
    ablate_parser.add_argument(
        "--direction", help="Query direction", choices=EVAL_DIRECTIONS
    )


def __create_sweep_parser(sub_parsers: _SubParsersAction) -> None:
    sweep_parser = sub_parsers.add_parser(
        'sweep-aux', help="Retrieval over the auxiliary query set size"
    )
    __add_common_args(sweep_parser)
    __add_data_arg(sweep_parser)
    __add_eval_args(sweep_parser)
    sweep_parser.add_argument(
        "--sizes",
        help="Comma separated sizes (count, percentage or 'all')",
    )
    sweep_parser.add_argument(
        "--trials", help="Resamplings per size", type=int
    )


def __split_list(value: str) -> tp.List[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def __load_config(
    args: tp.Dict[str, tp.Any],
    fallback: tp.Optional[Path] = None
) -> RunConfig:
    """Run config of ``--config`` (or ``fallback``) with the command line
    overrides applied."""
    if "config" in args:
        config_path: tp.Optional[Path] = Path(args["config"])
    elif fallback is not None and fallback.exists():
        LOG.info(f"Using config snapshot {fallback}")
        config_path = fallback
    else:
        config_path = None
    run_config = load_run_config(config_path)

    eval_overrides = {
        key: args[key]
        for key in ("mode", "direction", "feature")
        if key in args
    }
    if "aux_trials" in args:
        eval_overrides["aux_trials"] = args["aux_trials"]
    if eval_overrides:
        run_config = attr.evolve(
            run_config, eval=attr.evolve(run_config.eval, **eval_overrides)
        )
    if "seed" in args and args.get("subcommand") != "synth":
        run_config = attr.evolve(run_config, seed=args["seed"])
    return run_config.validate()


def __out_dir(args: tp.Dict[str, tp.Any]) -> Path:
    out_dir = Path(args.get("out", str(ssft_cfg()["result_dir"])))
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def __data_dir(args: tp.Dict[str, tp.Any]) -> Path:
    return Path(args.get("data", str(ssft_cfg()["data_dir"])))


def __load_split(args: tp.Dict[str, tp.Any], file_name: str) -> SampleSet:
    return load_sample_set(__data_dir(args) / file_name)


def __synth(args: tp.Dict[str, tp.Any]) -> None:
    run_config = __load_config(args)
    generator_cfg = run_config.generator
    if "seed" in args:
        generator_cfg = attr.evolve(generator_cfg, seed=args["seed"])

    out_dir = __out_dir(args)
    train_set, test_set = generate(generator_cfg)
    save_sample_set(train_set, out_dir / TRAIN_FILE_NAME)
    save_sample_set(test_set, out_dir / TEST_FILE_NAME)
    for sample_set in (train_set, test_set):
        print(
            f"{sample_set.split.value}: {len(sample_set.identity_set())} ids, "
            f"{len(sample_set)} samples, d_in={sample_set.d_in}"
        )
    print(f"Wrote datasets to {out_dir}")


def __train(args: tp.Dict[str, tp.Any]) -> None:
    run_config = __load_config(args)
    train_set = __load_split(args, TRAIN_FILE_NAME)
    out_dir = __out_dir(args)

    state: tp.Optional[TrainState] = None
    if "resume" in args:
        state = load_checkpoint(Path(args["resume"]), run_config)
    store_run_config(run_config, out_dir / CONFIG_SNAPSHOT_NAME)

    result = train(train_set, run_config, out_dir, state)
    if result.history:
        first, last = result.history[0], result.history[-1]
        print(
            f"Trained {result.state.epoch} epochs ({result.state.step} "
            f"steps): L_feat {first['L_feat']:.4f} -> {last['L_feat']:.4f}"
        )
    print(f"Wrote checkpoints to {out_dir}")


def __load_trained(
    args: tp.Dict[str, tp.Any]
) -> tp.Tuple[RunConfig, TrainState]:
    checkpoint = Path(args["checkpoint"])
    run_config = __load_config(
        args, fallback=checkpoint.parent / CONFIG_SNAPSHOT_NAME
    )
    return run_config, load_checkpoint(checkpoint, run_config)


def __eval(args: tp.Dict[str, tp.Any]) -> None:
    run_config, state = __load_trained(args)
    eval_cfg = run_config.eval
    test_set = __load_split(args, TEST_FILE_NAME)
    query_set, gallery_set = split_direction(test_set, eval_cfg.direction)
    evaluator = RetrievalEvaluator(
        state.network, query_set, gallery_set, eval_cfg.k, eval_cfg.feature
    )
    out_dir = __out_dir(args)

    if "aux_size" in args:
        size = resolve_aux_size(args["aux_size"], evaluator.n_query)
        report = mean_report([
            evaluator.evaluate_with_aux_set(
                size, np.random.default_rng([run_config.seed, size, trial])
            ) for trial in range(eval_cfg.aux_trials)
        ])
        stem = f"report_aux{size}_{eval_cfg.direction}"
    elif eval_cfg.mode == "single":
        report = evaluator.evaluate_single_query()
        stem = f"report_single_{eval_cfg.direction}"
    else:
        report = evaluator.evaluate_all_queries()
        stem = f"report_all_{eval_cfg.direction}"
    report.save(out_dir / f"{stem}.json", out_dir / f"{stem}.csv")
    print(
        f"{report.mode} {report.direction}: " + ", ".join(
            f"{key}={value:.4f}" for key, value in report.summary().items()
        )
    )

    if args["dump_affinity"]:
        affinity = evaluator.affinity()
        if affinity is None:
            LOG.warning("Feature transfer is disabled, no affinity to dump")
        else:
            with open(out_dir / "affinity.json", "w") as affinity_file:
                json.dump(affinity.to_dict(), affinity_file)

    if args["recon"]:
        reconstruction_report(state.network,
                              test_set).save(out_dir / "reconstruction.json")


def __ablate(args: tp.Dict[str, tp.Any]) -> None:
    run_config = __load_config(args)
    rows = __split_list(
        args.get("rows", ",".join(str(row) for row in ABLATION_ROWS))
    )
    seeds = [
        int(seed) for seed in __split_list(args["seeds"])
    ] if "seeds" in args else list(run_config.eval.seeds)
    if not rows or not seeds:
        raise ConfigurationError("The ablation needs rows and seeds")

    train_set = __load_split(args, TRAIN_FILE_NAME)
    test_set = __load_split(args, TEST_FILE_NAME)
    results = run_ablation(
        run_config, train_set, test_set, rows, seeds, get_worker_count()
    )
    table = build_table("ablation", __out_dir(args), results=results)
    print(table.tabulate(), end="")


def __sweep_aux(args: tp.Dict[str, tp.Any]) -> None:
    run_config, state = __load_trained(args)
    eval_cfg = run_config.eval
    sizes = __split_list(
        args["sizes"]
    ) if "sizes" in args else list(eval_cfg.aux_sizes)
    trials = args.get("trials", eval_cfg.aux_trials)

    test_set = __load_split(args, TEST_FILE_NAME)
    query_set, gallery_set = split_direction(test_set, eval_cfg.direction)
    entries = aux_sweep(
        state.network, query_set, gallery_set, sizes, trials,
        run_config.seed, eval_cfg.k, eval_cfg.feature
    )
    out_dir = __out_dir(args)
    table = build_table("aux_sweep", out_dir, entries=entries)
    with open(out_dir / "aux_sweep.json", "w") as sweep_file:
        json.dump([report.to_dict() for _, report in entries],
                  sweep_file,
                  indent=2)
    print(table.tabulate(), end="")


if __name__ == '__main__':
    sys.exit(main())
