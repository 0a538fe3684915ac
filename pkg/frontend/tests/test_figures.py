"""Figure assembly and deterministic rendering."""

import math

import pytest

from amdi_plots import (
    SeriesError,
    SweepTable,
    build_figure,
    plot_comparison,
    series_label,
)

from test_tables import row_values, write_csv

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def comparison_table(tmp_path):
    rows = []
    for mode in ("hybrid", "wcs"):
        for n_label, rate in (("1e+12", "1e-6"), ("1e+14", "5e-6")):
            for km, factor in (("0.0", 4.0), ("100.0", 1.0), ("200.0", 0.25)):
                rows.append(row_values(
                    source_mode=mode,
                    n_pulses=n_label,
                    distance_km=km,
                    rate_per_pulse=repr(float(rate) * factor),
                    plob_bound="inf" if km == "0.0" else repr(
                        3.6e-2 / float(km)),
                ))
    return SweepTable.from_csv(write_csv(tmp_path / "comp.csv", rows))


def purity_table(tmp_path):
    rows = []
    for purity, rate in (("1.0", "1e-6"), ("0.7", "4e-7")):
        for km in ("0.0", "100.0"):
            rows.append(row_values(
                purity=purity,
                distance_km=km,
                rate_per_pulse=rate,
                plob_bound="inf" if km == "0.0" else "3.6e-4",
            ))
    return SweepTable.from_csv(write_csv(tmp_path / "pur.csv", rows))


class TestBuildFigure:
    def test_log_axis_and_labels(self, tmp_path):
        fig = build_figure(comparison_table(tmp_path))
        ax = fig.axes[0]
        assert ax.get_yscale() == "log"
        labels = [line.get_label() for line in ax.get_lines()]
        assert labels == [
            "hybrid N=1e+12",
            "hybrid N=1e+14",
            "wcs N=1e+12",
            "wcs N=1e+14",
            "repeaterless bound",
        ]
        assert ax.get_xlabel() == "distance (km)"

    def test_purity_labels_distinguish_series(self, tmp_path):
        fig = build_figure(purity_table(tmp_path))
        labels = {line.get_label() for line in fig.axes[0].get_lines()}
        assert "hybrid N=1e+12" in labels
        assert "hybrid N=1e+12 purity=0.7" in labels

    def test_series_label_formatting(self):
        assert series_label(("hybrid", 1.0, 1e12)) == "hybrid N=1e+12"
        assert series_label(("wcs", 0.7, 1e14)) == "wcs N=1e+14 purity=0.7"

    def test_nonfinite_benchmark_dropped(self, tmp_path):
        fig = build_figure(comparison_table(tmp_path))
        bound = fig.axes[0].get_lines()[-1]
        assert all(math.isfinite(y) for y in bound.get_ydata())
        assert 0.0 not in set(bound.get_xdata())

    def test_zero_rate_points_dropped_but_series_kept(self, tmp_path):
        rows = [
            row_values(distance_km="0.0", rate_per_pulse="1e-6",
                       plob_bound="1.0"),
            row_values(distance_km="100.0", rate_per_pulse="0.0"),
        ]
        table = SweepTable.from_csv(write_csv(tmp_path / "z.csv", rows))
        fig = build_figure(table)
        line = fig.axes[0].get_lines()[0]
        assert line.get_label() == "hybrid N=1e+12"
        assert list(line.get_xdata()) == [0.0]

    def test_missing_required_series_listed(self, tmp_path):
        table = purity_table(tmp_path)
        require = [("hybrid", 1e12), ("wcs", 1e12), ("wcs", 1e14)]
        with pytest.raises(SeriesError) as info:
            build_figure(table, require=require)
        assert info.value.absent == (("wcs", 1e12), ("wcs", 1e14))
        assert "(wcs, N=1e+12)" in str(info.value)
        assert "(wcs, N=1e+14)" in str(info.value)

    def test_required_series_present_passes(self, tmp_path):
        table = comparison_table(tmp_path)
        require = [("hybrid", 1e12), ("hybrid", 1e14),
                   ("wcs", 1e12), ("wcs", 1e14)]
        fig = build_figure(table, require=require)
        assert len(fig.axes[0].get_lines()) == 5


class TestPlotComparison:
    def test_writes_png(self, tmp_path):
        out = tmp_path / "fig.png"
        result = plot_comparison(comparison_table(tmp_path), out)
        assert result == out
        assert out.read_bytes()[:8] == PNG_MAGIC

    def test_identical_input_identical_bytes(self, tmp_path):
        table = comparison_table(tmp_path)
        first = plot_comparison(table, tmp_path / "one.png")
        second = plot_comparison(table, tmp_path / "two.png")
        assert first.read_bytes() == second.read_bytes()

    def test_no_temp_residue(self, tmp_path):
        plot_comparison(comparison_table(tmp_path), tmp_path / "fig.png")
        leftovers = [p for p in tmp_path.iterdir()
                     if p.name.startswith(".tmp-")]
        assert leftovers == []

    def test_failed_validation_writes_nothing(self, tmp_path):
        out = tmp_path / "fig.png"
        with pytest.raises(SeriesError):
            plot_comparison(purity_table(tmp_path), out,
                            require=[("wcs", 1e12)])
        assert not out.exists()
