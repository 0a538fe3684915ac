"""Deterministic key-rate figures from parsed sweep tables.

One figure style covers both published layouts: every distinct
(source mode, purity, pulse count) series found in the input is drawn
as rate versus distance on a log axis, with the repeaterless benchmark
curve taken from the CSV itself.  Feeding both-source sweeps at two
pulse counts gives the protocol comparison figure; feeding ideal and
degraded purity sweeps gives the robustness figure.

Rendering is fully deterministic: fixed figure geometry, a fixed color
cycle assigned in sorted series order, fixed legend placement, and
fixed image metadata, so byte-identical CSVs yield byte-identical PNG
files.  The output file is written atomically and only after the whole
image has been rendered, so error paths never leave a partial file.
"""

from __future__ import annotations

import io
import math
import os
import tempfile
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import matplotlib

matplotlib.use("Agg")

from matplotlib.figure import Figure  # noqa: E402  (backend pinned first)

from .tables import SeriesError, SweepTable, TableError, merge_tables

# (source_mode, purity, n_pulses)
SeriesKey = Tuple[str, float, float]

_FIGSIZE = (7.0, 5.0)
_DPI = 150
_PALETTE = (
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#9467bd",
    "#ff7f0e",
    "#8c564b",
    "#17becf",
    "#7f7f7f",
)
_METADATA = {"Software": "amdi-hybrid-plots"}


def group_series(table: SweepTable) -> Dict[SeriesKey, List[dict]]:
    """Split rows into per-series lists sorted by distance."""
    series: Dict[SeriesKey, List[dict]] = {}
    for (mode, purity, n_pulses, _distance), row in table.rows.items():
        series.setdefault((mode, purity, n_pulses), []).append(dict(row))
    for rows in series.values():
        rows.sort(key=lambda row: row["distance_km"])
    return series


def series_label(key: SeriesKey) -> str:
    mode, purity, n_pulses = key
    label = f"{mode} N={n_pulses:g}"
    if purity != 1.0:
        label += f" purity={purity:g}"
    return label


def _check_required(series: Dict[SeriesKey, List[dict]],
                    require: Sequence[Tuple[str, float]]) -> None:
    present = {(mode, n_pulses) for mode, _purity, n_pulses in series}
    absent = [pair for pair in require if tuple(pair) not in present]
    if absent:
        raise SeriesError(sorted(absent))


def build_figure(tables: Union[SweepTable, Iterable[SweepTable]],
                 require: Optional[Sequence[Tuple[str, float]]] = None,
                 ) -> Figure:
    """Assemble the comparison figure without touching the filesystem."""
    if isinstance(tables, SweepTable):
        table = tables
    else:
        table = merge_tables(tables)
    series = group_series(table)
    if not series:
        raise TableError("no data rows to plot")
    if require is not None:
        _check_required(series, require)

    fig = Figure(figsize=_FIGSIZE, dpi=_DPI)
    ax = fig.add_subplot()
    for index, key in enumerate(sorted(series)):
        rows = series[key]
        # zero-rate points cannot sit on a log axis; the curve simply
        # stops where the key rate dies
        live = [row for row in rows
                if row["rate_per_pulse"] > 0.0
                and math.isfinite(row["rate_per_pulse"])]
        ax.plot(
            [row["distance_km"] for row in live],
            [row["rate_per_pulse"] for row in live],
            color=_PALETTE[index % len(_PALETTE)],
            marker="o",
            markersize=3.0,
            linewidth=1.5,
            label=series_label(key),
        )

    # the benchmark diverges at zero distance (the CSV carries inf);
    # keep only the finite part of the curve
    benchmark: Dict[float, float] = {}
    for rows in series.values():
        for row in rows:
            if math.isfinite(row["plob_bound"]) and row["plob_bound"] > 0.0:
                benchmark[row["distance_km"]] = row["plob_bound"]
    distances = sorted(benchmark)
    ax.plot(
        distances,
        [benchmark[km] for km in distances],
        color="black",
        linestyle="--",
        linewidth=1.2,
        label="repeaterless bound",
    )

    ax.set_yscale("log")
    ax.set_xlabel("distance (km)")
    ax.set_ylabel("secret key rate (bits per pulse)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(loc="lower left", fontsize=9)
    fig.tight_layout()
    return fig


def plot_comparison(tables: Union[SweepTable, Iterable[SweepTable]],
                    output_path: Union[str, Path],
                    require: Optional[Sequence[Tuple[str, float]]] = None,
                    ) -> Path:
    """Render the figure and write it atomically as a PNG file."""
    output_path = Path(output_path)
    figure = build_figure(tables, require=require)
    buffer = io.BytesIO()
    figure.savefig(buffer, format="png", metadata=dict(_METADATA))
    payload = buffer.getvalue()
    directory = output_path.parent if str(output_path.parent) else Path(".")
    handle = tempfile.NamedTemporaryFile(
        mode="wb", dir=directory, prefix=".tmp-", delete=False)
    try:
        handle.write(payload)
        handle.flush()
        os.fsync(handle.fileno())
        handle.close()
        os.replace(handle.name, output_path)
    except BaseException:
        handle.close()
        try:
            os.unlink(handle.name)
        except OSError:
            pass
        raise
    return output_path
