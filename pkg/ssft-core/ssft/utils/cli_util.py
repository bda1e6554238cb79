"""Command line utilities."""

import logging
import os
import typing as tp

from rich.console import Console
from rich.progress import BarColumn, Progress, TextColumn
from rich.traceback import install

from ssft.utils.settings import progress_enabled


def initialize_cli_tool() -> None:
    """Initializes all relevant context and tools for ssft cli tools."""
    install(width=120)
    initialize_logger_config()


def initialize_logger_config() -> None:
    """Initializes the logging framework with a basic config, allowing the user
    to pass the warning level via an environment variable ``LOG_LEVEL``."""
    log_level = os.environ.get('LOG_LEVEL', "WARNING").upper()
    logging.basicConfig(level=log_level)


def create_progress() -> tp.Optional[Progress]:
    """
    Creates a progress display on stderr if progress output is enabled in the
    settings.

    Returns:
        a ``rich`` progress object or None if progress output is disabled
    """
    if not progress_enabled():
        return None
    return Progress(
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TextColumn("{task.completed}/{task.total}"),
        TextColumn("{task.fields[status]}"),
        console=Console(stderr=True),
        transient=True
    )
