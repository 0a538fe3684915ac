"""Wire-contract validation for sweep CSV parsing."""

import csv

import pytest

from amdi_plots import (
    SCHEMA_VERSION,
    V1_COLUMNS,
    SweepTable,
    TableError,
    merge_tables,
)


def row_values(**overrides):
    """One synthetic data row as strings in contract column order."""
    values = {name: "0.0" for name in V1_COLUMNS}
    values.update(
        schema_version=str(SCHEMA_VERSION),
        source_mode="hybrid",
        purity="1.0",
        n_pulses="1e+12",
        distance_km="100.0",
        rate_per_pulse="1e-6",
        plob_bound="3.6e-2",
        max_distance_km="nan",
    )
    values.update({key: str(val) for key, val in overrides.items()})
    return [values[name] for name in V1_COLUMNS]


def write_csv(path, rows, header=V1_COLUMNS):
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)
    return path


class TestParsing:
    def test_round_trip(self, tmp_path):
        path = write_csv(tmp_path / "a.csv", [
            row_values(distance_km="0.0", plob_bound="inf"),
            row_values(distance_km="100.0"),
            row_values(source_mode="wcs", distance_km="100.0"),
        ])
        table = SweepTable.from_csv(path)
        assert len(table.rows) == 3
        key = ("hybrid", 1.0, 1e12, 100.0)
        assert key in table.rows
        row = table.rows[key]
        assert row["rate_per_pulse"] == 1e-6
        assert row["source_mode"] == "hybrid"
        zero = table.rows[("hybrid", 1.0, 1e12, 0.0)]
        assert zero["plob_bound"] == float("inf")

    def test_missing_file(self, tmp_path):
        with pytest.raises(TableError, match="cannot read"):
            SweepTable.from_csv(tmp_path / "absent.csv")

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(TableError, match="empty file"):
            SweepTable.from_csv(path)

    def test_header_only_rejected(self, tmp_path):
        path = write_csv(tmp_path / "h.csv", [])
        with pytest.raises(TableError, match="no data rows"):
            SweepTable.from_csv(path)

    def test_missing_column_named(self, tmp_path):
        header = tuple(c for c in V1_COLUMNS if c != "rate_per_pulse")
        row = [v for c, v in zip(V1_COLUMNS, row_values())
               if c != "rate_per_pulse"]
        path = write_csv(tmp_path / "m.csv", [row], header=header)
        with pytest.raises(TableError, match="missing columns: rate_per_pulse"):
            SweepTable.from_csv(path)

    def test_unexpected_column_named(self, tmp_path):
        header = V1_COLUMNS + ("surprise",)
        path = write_csv(tmp_path / "u.csv", [row_values() + ["1"]],
                         header=header)
        with pytest.raises(TableError, match="unexpected columns: surprise"):
            SweepTable.from_csv(path)

    def test_reordered_header_rejected(self, tmp_path):
        header = V1_COLUMNS[::-1]
        path = write_csv(tmp_path / "r.csv", [row_values()[::-1]],
                         header=header)
        with pytest.raises(TableError, match="out of order"):
            SweepTable.from_csv(path)

    def test_wrong_schema_version(self, tmp_path):
        path = write_csv(tmp_path / "v.csv", [row_values(schema_version="2")])
        with pytest.raises(TableError, match="schema version '2'"):
            SweepTable.from_csv(path)

    def test_non_numeric_cell(self, tmp_path):
        path = write_csv(tmp_path / "n.csv", [row_values(mu="beam")])
        with pytest.raises(TableError, match="column mu is not numeric"):
            SweepTable.from_csv(path)

    def test_ragged_row(self, tmp_path):
        path = write_csv(tmp_path / "g.csv", [row_values()[:-1]])
        with pytest.raises(TableError, match="expected 32 fields"):
            SweepTable.from_csv(path)

    def test_duplicate_row_within_file(self, tmp_path):
        path = write_csv(tmp_path / "d.csv",
                         [row_values(), row_values()])
        with pytest.raises(TableError, match="duplicate row"):
            SweepTable.from_csv(path)


class TestMerge:
    def test_disjoint_tables_merge(self, tmp_path):
        a = SweepTable.from_csv(write_csv(
            tmp_path / "a.csv", [row_values(n_pulses="1e+12")]))
        b = SweepTable.from_csv(write_csv(
            tmp_path / "b.csv", [row_values(n_pulses="1e+14")]))
        merged = merge_tables([a, b])
        assert len(merged.rows) == 2

    def test_colliding_tables_rejected(self, tmp_path):
        a = SweepTable.from_csv(write_csv(tmp_path / "a.csv", [row_values()]))
        b = SweepTable.from_csv(write_csv(tmp_path / "b.csv", [row_values()]))
        with pytest.raises(TableError, match="duplicate row across inputs"):
            merge_tables([a, b])
