"""
Settings module for the ssft tool suite.

All settings are stored in a simple dictionary. Each setting should be
modifiable via environment variable, e.g., ``SSFT_THREADS`` caps the number
of worker processes.
"""

from os import makedirs, path

import benchbuild.utils.settings as s

_CFG = s.Configuration(
    "ssft",
    node={
        "config_file": {
            "desc": "Config file path of ssft. Not guaranteed to exist.",
            "default": None,
        },
        "result_dir": {
            "desc": "Folder for checkpoints, logs and reports",
            "default": "results",
        },
        "data_dir": {
            "desc": "Folder with generated datasets",
            "default": "data",
        },
        "threads": {
            "desc": "Maximal number of worker processes for ablation rows "
                    "and sweep trials.",
            "default": 1,
        },
        "progress": {
            "desc": "Show training progress on stderr.",
            "default": True,
        },
    }
)


def ssft_cfg() -> s.Configuration:
    """Get the current ssft config."""
    return _CFG


def get_worker_count() -> int:
    """
    Number of worker processes the tool suite may use.

    Returns:
        the configured thread cap, at least 1
    """
    return max(1, int(str(_CFG["threads"].value)))


def progress_enabled() -> bool:
    """
    True, if progress bars should be shown.

    Values from environment variables may arrive as strings.
    """
    value = _CFG["progress"].value
    if isinstance(value, str):
        return value.strip().lower() not in ("false", "0", "no", "off")
    return bool(value)


def create_missing_folders() -> None:
    """Create folders that do not exist but were set in the config."""

    def create_missing_folder_for_cfg(cfg_varname: str) -> None:
        config_node = _CFG[cfg_varname]
        if config_node.has_value and\
                config_node.value is not None and\
                not path.isdir(str(config_node.value)):
            makedirs(str(config_node.value))

    create_missing_folder_for_cfg("result_dir")
    create_missing_folder_for_cfg("data_dir")


s.setup_config(_CFG, ['.ssft.yaml', '.ssft.yml'], "SSFT_CONFIG_FILE")
