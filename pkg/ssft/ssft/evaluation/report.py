"""Retrieval report and its file formats."""
import json
import typing as tp
from pathlib import Path

import attr
import numpy as np
import pandas as pd

from ssft.evaluation.metrics import SUMMARY_RANKS

ALL_QUERIES = "all_queries"
SINGLE_QUERY = "single_query"


def _to_float_tuple(values: tp.Iterable[float]) -> tp.Tuple[float, ...]:
    return tuple(float(value) for value in values)


@attr.s(frozen=True)
class RetrievalReport():
    """CMC curve and mAP of one evaluation."""

    mode: str = attr.ib()
    cmc: tp.Tuple[float, ...] = attr.ib(converter=_to_float_tuple)
    map: float = attr.ib(converter=float)
    n_query: int = attr.ib()
    n_gallery: int = attr.ib()
    k: int = attr.ib()
    aux_size: tp.Union[int, str] = attr.ib(default="all")
    direction: str = attr.ib(default="r2i")
    feature: str = attr.ib(default="transfer")

    def rank(self, r: int) -> float:
        """
        Rank-r accuracy; ranks beyond the gallery size saturate.

        Test:
        >>> RetrievalReport("all_queries", [0.5, 1.0], 0.75, 2, 2, 4).rank(5)
        1.0
        """
        if not self.cmc:
            return 0.0
        return self.cmc[min(r, len(self.cmc)) - 1]

    def summary(self) -> tp.Dict[str, float]:
        summary = {f"r{r}": self.rank(r) for r in SUMMARY_RANKS}
        summary["mAP"] = self.map
        return summary

    def to_dict(self) -> tp.Dict[str, tp.Any]:
        report: tp.Dict[str, tp.Any] = {
            "mode": self.mode,
            "map": self.map,
            "cmc": list(self.cmc),
            "aux_size": self.aux_size,
            "k": self.k,
            "direction": self.direction,
            "feature": self.feature,
            "n_query": self.n_query,
            "n_gallery": self.n_gallery,
        }
        report.update({f"r{r}": self.rank(r) for r in SUMMARY_RANKS})
        return report

    def cmc_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "rank": np.arange(1, len(self.cmc) + 1),
            "accuracy": self.cmc
        })

    def save(self, json_path: Path, csv_path: tp.Optional[Path]) -> None:
        """Write the report as JSON and, optionally, the CMC curve as
        CSV."""
        with open(json_path, "w") as json_file:
            json.dump(self.to_dict(), json_file, indent=2)
        if csv_path is not None:
            self.cmc_frame().to_csv(csv_path, index=False)


def mean_report(reports: tp.Sequence[RetrievalReport]) -> RetrievalReport:
    """Average CMC and mAP over reports of the same protocol."""
    first = reports[0]
    return attr.evolve(
        first,
        cmc=np.mean([report.cmc for report in reports], axis=0),
        map=float(np.mean([report.map for report in reports]))
    )
