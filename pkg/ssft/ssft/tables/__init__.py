"""Auto discover all tables."""

import importlib
import pkgutil

# avoid a potential cyclic import problem
import ssft.tables.table


def discover() -> None:
    """Auto import all tables."""
    for _, module_name, _ in pkgutil.walk_packages(
        __path__,  # type: ignore
        "ssft.tables."
    ):
        _module = importlib.import_module(module_name)
        globals()[module_name] = _module
