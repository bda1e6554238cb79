"""Base table module."""

import abc
import typing as tp
from enum import Enum
from pathlib import Path

import pandas as pd
from tabulate import tabulate

from ssft.tables.tables import TableRegistry


class TableFormat(Enum):
    """List of supported TableFormats."""
    value: str

    plain = "plain"
    simple = "simple"
    github = "github"
    grid = "grid"
    fancy_grid = "fancy_grid"
    pipe = "pipe"
    psql = "psql"
    rst = "rst"
    html = "html"
    latex = "latex"
    latex_booktabs = "latex_booktabs"


class Table(metaclass=TableRegistry):
    """An abstract base class for all result tables."""

    format_filetypes = {
        TableFormat.github: "md",
        TableFormat.html: "html",
        TableFormat.latex: "tex",
        TableFormat.latex_booktabs: "tex",
        TableFormat.rst: "rst",
    }

    def __init__(self, name: str, **kwargs: tp.Any) -> None:
        self.__name = name
        self.__format = TableFormat.simple
        self.__saved_extra_args = kwargs

    @property
    def name(self) -> str:
        """
        Name of the current table.

        Test:
        >>> Table('test').name
        'test'
        """
        return self.__name

    @property
    def format(self) -> TableFormat:
        """
        Current table format as used by python-tabulate.

        Test:
        >>> Table('test').format
        <TableFormat.simple: 'simple'>
        """
        return self.__format

    @format.setter
    def format(self, new_format: TableFormat) -> None:
        """
        Set current format of the table.

        Args:
            new_format: a table format as used by python-tabulate
        """
        self.__format = new_format

    @property
    def table_kwargs(self) -> tp.Any:
        """
        Access the kwargs passed to the initial table.

        Test:
        >>> tab = Table('test', foo='bar', baz='bazzer')
        >>> tab.table_kwargs['foo']
        'bar'
        >>> tab.table_kwargs['baz']
        'bazzer'
        """
        return self.__saved_extra_args

    @abc.abstractmethod
    def frame(self) -> pd.DataFrame:
        """The table content."""

    def notes(self) -> tp.List[str]:
        """Footer lines printed below the table."""
        return []

    def tabulate(self) -> str:
        """Build the table using tabulate."""
        data = self.frame()
        table = tabulate(
            data, data.columns, self.format.value, showindex=False
        )
        footer = "".join(f"\n{note}" for note in self.notes())
        return table + footer + "\n"

    def save(self, path: Path) -> None:
        """
        Save the current table as formatted text and as CSV.

        Args:
            path: The directory where the files are stored.
        """
        filetype = self.format_filetypes.get(self.__format, "txt")
        path.mkdir(parents=True, exist_ok=True)
        with open(path / f"{self.name}.{filetype}", "w") as outfile:
            outfile.write(self.tabulate())
        self.frame().to_csv(path / f"{self.name}.csv", index=False)

