"""Parsing and validation of amdi-hybrid sweep CSV files.

This package never computes physics.  Everything it draws comes out of
the versioned CSV the analysis tool writes; this module owns the local
copy of that wire contract (schema version and column order) and turns
CSV files into keyed row tables.

A file is rejected outright when its header deviates from the contract,
when any row carries a different schema version, or when it holds no
data rows at all.  Failing loud here keeps the figures trustworthy: a
silently tolerated column drift would plot the wrong quantity.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple, Union

# frozen copy of the producer's schema-version-1 contract
SCHEMA_VERSION = 1

V1_COLUMNS = (
    "schema_version",
    "source_mode",
    "purity",
    "n_pulses",
    "distance_km",
    "seed",
    "rate_per_pulse",
    "rate_per_second",
    "secret_bits",
    "plob_bound",
    "max_distance_km",
    "mu",
    "nu",
    "omega",
    "p_signal",
    "p_nu",
    "p_omega",
    "window_s",
    "phase_error_upper",
    "lambda_ec",
    "eps_sec",
    "eps_cor",
    "eta_detector",
    "dark_count_prob",
    "attenuation_db_per_km",
    "rep_rate_hz",
    "e_hom",
    "drift_rad_per_s",
    "detuning_hz",
    "phase_slices",
    "ec_efficiency",
    "epsilon",
)


class TableError(ValueError):
    """A sweep CSV violates the wire contract or cannot be plotted."""


class SeriesError(TableError):
    """Requested series are absent from the loaded tables.

    Carries the absent (source mode, pulse count) pairs so callers can
    report exactly what is missing.
    """

    def __init__(self, absent: Sequence[Tuple[str, float]]):
        self.absent = tuple(absent)
        listing = ", ".join(f"({mode}, N={n:g})" for mode, n in self.absent)
        super().__init__(f"missing series: {listing}")


# (source_mode, purity, n_pulses, distance_km)
RowKey = Tuple[str, float, float, float]


@dataclass(frozen=True)
class SweepTable:
    """Rows of one or more sweep CSVs keyed by series and distance."""

    rows: Mapping[RowKey, Mapping[str, Union[str, float]]]
    source: str = field(default="<memory>", compare=False)

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "SweepTable":
        """Parse and validate one sweep CSV file."""
        path = Path(path)
        try:
            with open(path, newline="", encoding="utf-8") as handle:
                records = list(csv.reader(handle))
        except OSError as exc:
            raise TableError(f"cannot read sweep CSV {path}: {exc}") from exc
        if not records:
            raise TableError(f"{path}: empty file, expected a CSV header")
        header = tuple(records[0])
        _check_header(header, path)
        if len(records) == 1:
            raise TableError(f"{path}: header only, no data rows to plot")
        rows: Dict[RowKey, Mapping[str, Union[str, float]]] = {}
        for index, record in enumerate(records[1:], start=2):
            if len(record) != len(header):
                raise TableError(
                    f"{path}:{index}: expected {len(header)} fields,"
                    f" found {len(record)}")
            parsed = _parse_row(dict(zip(header, record)), path, index)
            key = (
                parsed["source_mode"],
                parsed["purity"],
                parsed["n_pulses"],
                parsed["distance_km"],
            )
            if key in rows:
                raise TableError(
                    f"{path}:{index}: duplicate row for source mode"
                    f" {key[0]}, purity {key[1]:g}, N {key[2]:g},"
                    f" distance {key[3]:g} km")
            rows[key] = parsed
        return cls(rows=rows, source=str(path))


def _check_header(header: Tuple[str, ...], path: Path) -> None:
    if header == V1_COLUMNS:
        return
    missing = [name for name in V1_COLUMNS if name not in header]
    unexpected = [name for name in header if name not in V1_COLUMNS]
    problems = []
    if missing:
        problems.append("missing columns: " + ", ".join(missing))
    if unexpected:
        problems.append("unexpected columns: " + ", ".join(unexpected))
    if not problems:
        problems.append("columns out of order")
    raise TableError(f"{path}: header violates schema version"
                     f" {SCHEMA_VERSION} ({'; '.join(problems)})")


def _parse_row(record: Mapping[str, str], path: Path,
               index: int) -> Dict[str, Union[str, float]]:
    version = record["schema_version"].strip()
    if version != str(SCHEMA_VERSION):
        raise TableError(
            f"{path}:{index}: schema version {version!r}, this reader"
            f" understands version {SCHEMA_VERSION}")
    parsed: Dict[str, Union[str, float]] = {}
    for name in V1_COLUMNS:
        raw = record[name]
        if name == "source_mode":
            parsed[name] = raw.strip()
            continue
        try:
            parsed[name] = float(raw)
        except ValueError as exc:
            raise TableError(
                f"{path}:{index}: column {name} is not numeric:"
                f" {raw!r}") from exc
    return parsed


def merge_tables(tables: Iterable[SweepTable]) -> SweepTable:
    """Combine tables, rejecting rows that collide on the same key."""
    merged: Dict[RowKey, Mapping[str, Union[str, float]]] = {}
    sources: List[str] = []
    for table in tables:
        sources.append(table.source)
        for key, row in table.rows.items():
            if key in merged:
                raise TableError(
                    f"duplicate row across inputs for source mode"
                    f" {key[0]}, purity {key[1]:g}, N {key[2]:g},"
                    f" distance {key[3]:g} km")
            merged[key] = row
    return SweepTable(rows=merged, source=", ".join(sources) or "<memory>")
