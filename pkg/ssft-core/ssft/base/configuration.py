"""
Run configuration of the ssft tool suite.

A :class:`RunConfig` bundles everything needed to reproduce a run: the
synthetic dataset, the model dimensions, the loss weights, the schedule, the
evaluation protocol and the ablation switches. Configs are immutable; they are
created from (partial) dicts, e.g., parsed JSON/yaml files, which are merged
over the defaults and validated as a whole.
"""
import logging
import typing as tp
from pathlib import Path

import attr
import yaml

from ssft.base.version_header import VersionHeader
from ssft.utils.exceptions import ConfigValidationError

LOG = logging.getLogger(__name__)

ConfigType = tp.TypeVar("ConfigType")


def _to_int_tuple(value: tp.Iterable[tp.Any]) -> tp.Tuple[int, ...]:
    return tuple(int(x) for x in value)


def _to_str_tuple(value: tp.Iterable[tp.Any]) -> tp.Tuple[str, ...]:
    return tuple(str(x) for x in value)


# switches accept real booleans only, a yaml or json string "false" is an error
_is_bool = attr.validators.instance_of(bool)


@attr.s(frozen=True)
class GeneratorConfig():
    """Parameters of the synthetic two-modality identity dataset."""

    seed: int = attr.ib(default=0, converter=int)
    n_train_ids: int = attr.ib(default=64, converter=int)
    n_test_ids: int = attr.ib(default=32, converter=int)
    samples_per_id_per_modality: int = attr.ib(default=10, converter=int)
    d_id: int = attr.ib(default=16, converter=int)
    d_spec: int = attr.ib(default=8, converter=int)
    d_in: int = attr.ib(default=64, converter=int)
    noise_sigma: float = attr.ib(default=0.3, converter=float)
    # strength of the modality dependent distortion of the identity factor
    id_shift: float = attr.ib(default=0.5, converter=float)

    def violations(self) -> tp.List[str]:
        """Returns all constraint violations of this config."""
        found = [
            f"generator.{name} must be >= 1" for name in (
                "n_train_ids", "n_test_ids", "samples_per_id_per_modality",
                "d_id", "d_spec", "d_in"
            ) if getattr(self, name) < 1
        ]
        if self.d_in < self.d_id + self.d_spec:
            found.append("generator.d_in must be >= d_id + d_spec")
        if self.noise_sigma < 0:
            found.append("generator.noise_sigma must be >= 0")
        if self.id_shift < 0:
            found.append("generator.id_shift must be >= 0")
        return found


@attr.s(frozen=True)
class ModelConfig():
    """Dimensions of the two-stream extractor, the heads and the SSTN."""

    d_h: int = attr.ib(default=32, converter=int)
    d_p: int = attr.ib(default=32, converter=int)
    d_t: int = attr.ib(default=64, converter=int)
    hidden: int = attr.ib(default=64, converter=int)

    @property
    def padded_width(self) -> int:
        """Width of the three-segment padded matrix Z."""
        return 2 * self.d_p + self.d_h

    def violations(self) -> tp.List[str]:
        return [
            f"model.{name} must be >= 1"
            for name in ("d_h", "d_p", "d_t", "hidden")
            if getattr(self, name) < 1
        ]


@attr.s(frozen=True)
class TrainConfig():
    """Margins, loss weights, neighbor count and batch composition."""

    rho1: float = attr.ib(default=0.3, converter=float)
    rho2: float = attr.ib(default=0.3, converter=float)
    lambda1: float = attr.ib(default=1.0, converter=float)
    lambda2: float = attr.ib(default=0.2, converter=float)
    lambda3: float = attr.ib(default=0.2, converter=float)
    k: int = attr.ib(default=4, converter=int)
    n_ids: int = attr.ib(default=8, converter=int)
    n_per_modality: int = attr.ib(default=4, converter=int)

    def violations(self) -> tp.List[str]:
        found = [
            f"train.{name} must be >= 0"
            for name in ("rho1", "rho2", "lambda1", "lambda2", "lambda3")
            if getattr(self, name) < 0
        ]
        found += [
            f"train.{name} must be >= 1"
            for name in ("k", "n_ids", "n_per_modality")
            if getattr(self, name) < 1
        ]
        return found


@attr.s(frozen=True)
class Schedule():
    """Epochs, learning rate and its step decay."""

    epochs: int = attr.ib(default=40, converter=int)
    # every training identity is drawn about five times per epoch
    batches_per_epoch: int = attr.ib(default=40, converter=int)
    lr: float = attr.ib(default=0.00035, converter=float)
    decay_epochs: tp.Tuple[int, ...] = attr.ib(
        default=(14, 24), converter=_to_int_tuple
    )
    decay_factor: float = attr.ib(default=0.1, converter=float)
    # checkpoint every n epochs, 0 writes only the final checkpoint
    checkpoint_interval: int = attr.ib(default=10, converter=int)
    log_interval: int = attr.ib(default=1, converter=int)

    def lr_at(self, epoch: int) -> float:
        """
        Learning rate used in ``epoch`` (0-based).

        Test:
        >>> sched = Schedule(lr=1.0, decay_epochs=[2, 4], decay_factor=0.5)
        >>> [sched.lr_at(e) for e in range(5)]
        [1.0, 1.0, 0.5, 0.5, 0.25]
        """
        decays = len([e for e in self.decay_epochs if epoch >= e])
        return float(self.lr * self.decay_factor**decays)

    def violations(self) -> tp.List[str]:
        found = []
        if self.epochs < 0:
            found.append("schedule.epochs must be >= 0")
        if self.batches_per_epoch < 1:
            found.append("schedule.batches_per_epoch must be >= 1")
        if self.lr < 0:
            found.append("schedule.lr must be >= 0")
        if any(
            a >= b for a, b in zip(self.decay_epochs, self.decay_epochs[1:])
        ):
            found.append("schedule.decay_epochs must be strictly increasing")
        if any(e >= self.epochs or e < 0 for e in self.decay_epochs):
            found.append("schedule.decay_epochs must lie in [0, epochs)")
        if self.decay_factor <= 0:
            found.append("schedule.decay_factor must be > 0")
        if self.checkpoint_interval < 0:
            found.append("schedule.checkpoint_interval must be >= 0")
        if self.log_interval < 1:
            found.append("schedule.log_interval must be >= 1")
        return found


EVAL_MODES = ("all", "single")
EVAL_DIRECTIONS = ("r2i", "i2r")
EVAL_FEATURES = ("transfer", "concat", "shared")


@attr.s(frozen=True)
class EvalConfig():
    """Retrieval protocol: neighbor count, mode, direction and features."""

    k: int = attr.ib(default=4, converter=int)
    mode: str = attr.ib(default="all", converter=str)
    direction: str = attr.ib(default="r2i", converter=str)
    feature: str = attr.ib(default="transfer", converter=str)
    aux_sizes: tp.Tuple[str, ...] = attr.ib(
        default=("1", "25%", "50%", "all"), converter=_to_str_tuple
    )
    aux_trials: int = attr.ib(default=5, converter=int)
    seeds: tp.Tuple[int, ...] = attr.ib(
        default=(0, 1, 2, 3, 4), converter=_to_int_tuple
    )

    def violations(self) -> tp.List[str]:
        found = []
        if self.k < 1:
            found.append("eval.k must be >= 1")
        if self.mode not in EVAL_MODES:
            found.append(f"eval.mode must be one of {EVAL_MODES}")
        if self.direction not in EVAL_DIRECTIONS:
            found.append(f"eval.direction must be one of {EVAL_DIRECTIONS}")
        if self.feature not in EVAL_FEATURES:
            found.append(f"eval.feature must be one of {EVAL_FEATURES}")
        if self.aux_trials < 1:
            found.append("eval.aux_trials must be >= 1")
        if not self.seeds:
            found.append("eval.seeds must not be empty")
        return found


SWITCH_LABELS = {
    "shl": "ShL",
    "spl": "SpL",
    "sas": "SaS",
    "moa": "MoA",
    "pa": "PA",
    "re": "RE",
    "sht": "ShT",
    "spt": "SpT",
}


@attr.s(frozen=True)
class AblationSwitches():
    """
    Component switches of the ablation table: shared/specific feature learning
    (ShL/SpL), separating the streams at shallow layers (SaS), modality
    adaptation (MoA), project adversarial (PA), reconstruction (RE) and
    shared/specific feature transfer (ShT/SpT).
    """

    shl: bool = attr.ib(default=True, validator=_is_bool)
    spl: bool = attr.ib(default=True, validator=_is_bool)
    sas: bool = attr.ib(default=True, validator=_is_bool)
    moa: bool = attr.ib(default=True, validator=_is_bool)
    pa: bool = attr.ib(default=True, validator=_is_bool)
    re: bool = attr.ib(default=True, validator=_is_bool)
    sht: bool = attr.ib(default=True, validator=_is_bool)
    spt: bool = attr.ib(default=True, validator=_is_bool)

    @property
    def transfer_enabled(self) -> bool:
        """True, if the SSTN takes part in training and retrieval."""
        return self.sht or self.spt

    def effective_train_config(self, cfg: TrainConfig) -> TrainConfig:
        """
        Zeroes the loss weights of disabled complementary-learning
        components.

        Test:
        >>> sw = AblationSwitches(moa=False, re=False)
        >>> eff = sw.effective_train_config(TrainConfig())
        >>> (eff.lambda1, eff.lambda2, eff.lambda3)
        (0.0, 0.0, 0.2)
        """
        return attr.evolve(
            cfg,
            lambda1=cfg.lambda1 if self.re else 0.0,
            lambda2=cfg.lambda2 if self.moa else 0.0,
            lambda3=cfg.lambda3 if self.pa and self.spl else 0.0
        )

    def violations(self) -> tp.List[str]:
        found = []
        if not self.shl:
            found.append(
                "ablation.ShL can not be disabled, the shared stream is the "
                "backbone of every row"
            )
        if self.spt and not self.spl:
            found.append("ablation.SpT requires SpL (no specific stream)")
        if self.pa and not self.spl:
            found.append("ablation.PA requires SpL (no specific stream)")
        return found

    def labels(self) -> tp.List[str]:
        """Labels of all enabled switches."""
        return [
            label for name, label in SWITCH_LABELS.items()
            if getattr(self, name)
        ]


def _row(*enabled: str) -> AblationSwitches:
    return AblationSwitches(
        **{name: name in enabled for name in SWITCH_LABELS}
    )


ABLATION_ROWS: tp.Dict[int, AblationSwitches] = {
    1: _row("shl"),
    2: _row("shl", "spl"),
    3: _row("shl", "spl", "sas"),
    4: _row("shl", "spl", "sas", "moa"),
    5: _row("shl", "spl", "sas", "moa", "pa"),
    6: _row("shl", "spl", "sas", "moa", "pa", "re"),
    7: _row("shl", "spl", "sas", "sht", "spt"),
    8: _row("shl", "spl", "sas", "moa", "sht", "spt"),
    9: _row("shl", "spl", "sas", "moa", "pa", "sht", "spt"),
    10: _row("shl", "spl", "sas", "moa", "pa", "re", "sht"),
    11: _row("shl", "spl", "sas", "moa", "pa", "re", "spt"),
    12: _row("shl", "spl", "sas", "moa", "pa", "re", "sht", "spt"),
}


@attr.s(frozen=True)
class RunConfig():
    """Complete, resolved configuration of a run."""

    generator: GeneratorConfig = attr.ib(factory=GeneratorConfig)
    model: ModelConfig = attr.ib(factory=ModelConfig)
    train: TrainConfig = attr.ib(factory=TrainConfig)
    schedule: Schedule = attr.ib(factory=Schedule)
    eval: EvalConfig = attr.ib(factory=EvalConfig)
    ablation: AblationSwitches = attr.ib(factory=AblationSwitches)
    seed: int = attr.ib(default=0, converter=int)

    def violations(self) -> tp.List[str]:
        """Returns all constraint violations of the nested configs."""
        found: tp.List[str] = []
        for section in _SECTIONS:
            found += getattr(self, section).violations()
        return found

    def validate(self) -> 'RunConfig':
        """
        Raises a :class:`ConfigValidationError` listing every violation.

        Returns:
            this config, if it is valid
        """
        found = self.violations()
        if found:
            raise ConfigValidationError(found)
        return self

    def get_dict(self) -> tp.Dict[str, tp.Any]:
        """Returns the resolved config as a plain dict."""
        resolved: tp.Dict[str, tp.Any] = attr.asdict(
            self, retain_collection_types=False
        )
        resolved["ablation"] = {
            SWITCH_LABELS[name]: value
            for name, value in resolved["ablation"].items()
        }
        return resolved


_SECTIONS: tp.Dict[str, tp.Type[tp.Any]] = {
    "generator": GeneratorConfig,
    "model": ModelConfig,
    "train": TrainConfig,
    "schedule": Schedule,
    "eval": EvalConfig,
    "ablation": AblationSwitches,
}


def _create_section(
    section: str, cls: tp.Type[ConfigType], values: tp.Any,
    violations: tp.List[str]
) -> ConfigType:
    if values is None:
        return cls()
    if not isinstance(values, dict):
        violations.append(f"{section} must be a mapping")
        return cls()

    if cls is AblationSwitches:
        by_label = {label: name for name, label in SWITCH_LABELS.items()}
        values = {
            by_label.get(key, key): value for key, value in values.items()
        }

    known = {field.name for field in attr.fields(cls)}
    kwargs = {}
    for key, value in values.items():
        if key not in known:
            violations.append(f"unknown option '{section}.{key}'")
            continue
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as err:
        violations.append(f"{section}: {err}")
        return cls()


def create_run_config_from_dict(
    config_dict: tp.Optional[tp.Dict[str, tp.Any]]
) -> RunConfig:
    """
    Creates a validated run config from a (partial) dict, missing options
    take their default values.

    Args:
        config_dict: nested dict, e.g., parsed from a config file

    Returns:
        the resolved run config

    Test:
    >>> create_run_config_from_dict({'train': {'k': 2}}).train.k
    2
    """
    config_dict = dict(config_dict or {})
    violations: tp.List[str] = []
    sections = {
        section: _create_section(
            section, cls, config_dict.pop(section, None), violations
        ) for section, cls in _SECTIONS.items()
    }
    seed = config_dict.pop("seed", 0)
    for key in config_dict:
        violations.append(f"unknown option '{key}'")
    try:
        seed = int(seed)
    except (TypeError, ValueError):
        violations.append("seed must be an integer")
        seed = 0

    run_config = RunConfig(seed=seed, **sections)
    violations += run_config.violations()
    if violations:
        raise ConfigValidationError(violations)
    return run_config


def load_run_config(config_path: tp.Optional[Path]) -> RunConfig:
    """
    Load a run config from a JSON or yaml file. Resolved config snapshots,
    i.e., files starting with a ``RunConfig`` version header, are accepted as
    well.

    Args:
        config_path: path to the config file or None for the defaults

    Returns:
        the resolved run config
    """
    if config_path is None:
        return create_run_config_from_dict({})

    with open(config_path, "r") as config_file:
        documents = [
            doc for doc in yaml.safe_load_all(config_file) if doc is not None
        ]

    if len(documents) == 2:
        version_header = VersionHeader(documents[0])
        version_header.raise_if_not_type("RunConfig")
        version_header.raise_if_version_is_less_than(1)
        return create_run_config_from_dict(documents[1])
    if len(documents) > 2:
        raise ConfigValidationError([
            f"config file '{config_path}' contains {len(documents)} documents"
        ])
    return create_run_config_from_dict(documents[0] if documents else {})


def store_run_config(run_config: RunConfig, file_path: Path) -> None:
    """
    Store the resolved run config as a yaml snapshot that reproduces the run
    when fed back into :func:`load_run_config`.

    Args:
        run_config: the config to store
        file_path: the file to write
    """
    with open(file_path, "w") as stream:
        version_header = VersionHeader.from_version_number("RunConfig", 1)
        yaml.safe_dump_all([version_header.get_dict(),
                            run_config.get_dict()],
                           stream,
                           default_flow_style=False,
                           explicit_start=True,
                           explicit_end=True)
