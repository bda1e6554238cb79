"""Ablation table: retrieval results per component combination."""
import typing as tp

import pandas as pd

from ssft.base.configuration import SWITCH_LABELS
from ssft.experiments.ablation import AblationRowResult
from ssft.tables.table import Table


class AblationTable(Table):
    """
    One line per ablation row with a mark per enabled component and the
    median rank-1 accuracy and mAP (in percent) over all seeds.
    """

    NAME = "ablation"

    def __init__(self, **kwargs: tp.Any) -> None:
        super().__init__(self.NAME, **kwargs)

    @property
    def results(self) -> tp.List[AblationRowResult]:
        return list(self.table_kwargs["results"])

    def frame(self) -> pd.DataFrame:
        rows = []
        for result in self.results:
            row: tp.Dict[str, tp.Any] = {"row": result.row}
            for name, label in SWITCH_LABELS.items():
                row[label] = "✓" if getattr(result.switches, name) else "-"
            row["r1"] = round(100.0 * result.median_r1, 2)
            row["mAP"] = round(100.0 * result.median_map, 2)
            row["seeds"] = len(result.seeds)
            rows.append(row)
        return pd.DataFrame(
            rows,
            columns=["row", *SWITCH_LABELS.values(), "r1", "mAP", "seeds"]
        )

    def notes(self) -> tp.List[str]:
        notes = ["r1 and mAP: median over seeds, in percent."]
        switches = [result.switches for result in self.results]
        if any(sw.transfer_enabled and not sw.spl for sw in switches):
            notes.append(
                "Rows without SpL build the intra-modality affinity from "
                "shared features."
            )
        if any(sw.spt and not sw.sht for sw in switches):
            notes.append(
                "Rows without ShT zero the shared segment of the propagated "
                "features."
            )
        return notes
