"""Unit tests for outcome breakdown tables."""

from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from fuzzyforest.adapters.outbound.tables.csv_table import CsvTableSource
from fuzzyforest.domain.errors import InvalidConfigError
from fuzzyforest.services import CrosstabReport, DatasetPreparer
from fuzzyforest.settings import RunConfig


def _table(tmp_path: Path, text: str, **settings: object) -> pd.DataFrame:
    path = tmp_path / "survey.csv"
    path.write_text(text, encoding="utf-8")
    config = RunConfig(seed=1, input_path=path, out_dir=tmp_path / "out", **settings)
    preparer = DatasetPreparer(CsvTableSource())
    report = CrosstabReport(preparer, store=None)  # type: ignore[arg-type]
    return report.table(config, preparer.prepare(config))


def test_two_by_two_counts_sum_to_rows(tmp_path: Path) -> None:
    table = _table(
        tmp_path,
        "sex,vote\nf,1\nf,0\nm,1\nf,1\nm,0\nm,0\n",
        label_column="vote",
    )

    assert table["count"].sum() == 6
    assert len(table) == 4
    assert table.loc[(table.level == "f") & (table.label == "1"), "count"].item() == 2


def test_weighted_counts_sum_to_total_weight(tmp_path: Path) -> None:
    table = _table(
        tmp_path,
        "sex,w,vote\nf,0.5,1\nf,2.0,0\nm,1.5,1\nm,3.0,0\n",
        label_column="vote",
        weight_column="w",
    )

    assert table["weighted_count"].sum() == pytest.approx(7.0)
    assert set(table["variable"]) == {"sex"}
    for _, block in table.groupby("level"):
        assert block["proportion"].sum() == pytest.approx(1.0)


def test_proportions_track_generating_rates(tmp_path: Path) -> None:
    """Class-conditional rates of 0.3 and 0.7 come back within two standard errors."""
    rng = np.random.default_rng(0)
    n = 2000
    group = rng.choice(["a", "b"], size=n)
    vote = (rng.uniform(size=n) < np.where(group == "a", 0.3, 0.7)).astype(int)
    lines = ["group,vote"] + [f"{g},{v}" for g, v in zip(group, vote, strict=True)]

    table = _table(tmp_path, "\n".join(lines) + "\n", label_column="vote")

    for level, rate in (("a", 0.3), ("b", 0.7)):
        share = table.loc[(table.level == level) & (table.label == "1"), "proportion"].item()
        assert abs(share - rate) <= 2 / np.sqrt(n)


def test_numeric_columns_skipped_by_default(tmp_path: Path) -> None:
    table = _table(tmp_path, "age,sex,vote\n30,f,1\n40,m,0\n", label_column="vote")
    assert set(table["variable"]) == {"sex"}


def test_unknown_variable(tmp_path: Path) -> None:
    with pytest.raises(InvalidConfigError):
        _table(
            tmp_path, "sex,vote\nf,1\nm,0\n", label_column="vote", crosstab_variables=["race"]
        )
