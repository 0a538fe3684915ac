"""Figure generation for amdi-hybrid sweep CSVs.

Consumes the analysis tool's versioned CSV output and renders the
rate-versus-distance comparison figures.  No physics is computed here.
"""

from .figures import build_figure, group_series, plot_comparison, series_label
from .tables import (
    SCHEMA_VERSION,
    V1_COLUMNS,
    SeriesError,
    SweepTable,
    TableError,
    merge_tables,
)

__all__ = [
    "SCHEMA_VERSION",
    "V1_COLUMNS",
    "SeriesError",
    "SweepTable",
    "TableError",
    "build_figure",
    "group_series",
    "merge_tables",
    "plot_comparison",
    "series_label",
]
