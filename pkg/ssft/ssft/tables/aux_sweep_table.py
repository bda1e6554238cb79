"""Retrieval performance over the auxiliary query set size."""
import typing as tp

import pandas as pd

from ssft.evaluation.report import RetrievalReport
from ssft.tables.table import Table


class AuxSweepTable(Table):
    """One line per auxiliary set size; single-query runs have their own
    line."""

    NAME = "aux_sweep"

    def __init__(self, **kwargs: tp.Any) -> None:
        super().__init__(self.NAME, **kwargs)

    @property
    def entries(self) -> tp.List[tp.Tuple[int, RetrievalReport]]:
        return list(self.table_kwargs["entries"])

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame([{
            "n": size,
            "mode": report.mode,
            "map": report.map,
            "cmc1": report.rank(1)
        } for size, report in self.entries],
                            columns=["n", "mode", "map", "cmc1"])
