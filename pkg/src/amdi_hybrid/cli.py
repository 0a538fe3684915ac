"""Command-line interface: rate, optimize, sweep, compare, mc-validate.

All data outputs are deterministic for a fixed config and seed: JSON is
emitted with sorted keys and no timestamps, CSV columns follow a frozen
versioned schema, and files are written atomically (temporary name plus
rename).  Non-finite numbers are serialized as the strings "inf", "-inf"
and "nan" since strict JSON has no spelling for them.

Exit codes: 0 success, 2 configuration error, 3 estimation failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import enum
import io
import json
import math
import os
import sys
import tempfile
from typing import Dict, List, Optional, Sequence

from . import config as config_mod
from .config import ConfigError, RunConfig
from .key_rate import KeyRateReport, plob_bound
from .mc_oracle import compare as mc_compare
from .mc_oracle import simulate
from .optimizer import (
    OptimizationResult,
    SweepResult,
    evaluate_point,
    optimize_at_distance,
    sweep,
)
from .pairing_stats import statistics_for

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ESTIMATION = 3

CSV_SCHEMA_VERSION = 1

CSV_COLUMNS = (
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


def _json_safe(value):
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return value
    if isinstance(value, dict):
        return {_key_str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return _json_safe(dataclasses.asdict(value))
    if isinstance(value, enum.Enum):
        return _json_safe(value.value)
    return value


def _key_str(key) -> str:
    if isinstance(key, tuple):
        return ",".join(str(part) for part in key)
    return str(key)


def dumps(payload: Dict) -> str:
    return json.dumps(_json_safe(payload), indent=2, sort_keys=True) + "\n"


def atomic_write(path: str, data: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    handle = tempfile.NamedTemporaryFile(
        "w", encoding="utf-8", dir=directory, delete=False,
        prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with handle:
            handle.write(data)
        os.replace(handle.name, path)
    except BaseException:
        try:
            os.unlink(handle.name)
        except OSError:
            pass
        raise


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        atomic_write(out, text)


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17e}"
    return str(value)


def report_payload(report: KeyRateReport, config: RunConfig,
                   command: str) -> Dict:
    body = dataclasses.asdict(report)
    return {
        "command": command,
        "report": body,
        "effective_config": config_mod.effective_config(config),
    }


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amdi-hybrid",
        description="Key-rate analysis for asynchronous pair-matched "
                    "quantum key distribution with a hybrid source.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", metavar="PATH",
                       help="TOML configuration file")
        p.add_argument("--distance", type=float, metavar="KM",
                       help="override the evaluation distance")
        p.add_argument("--out", metavar="PATH",
                       help="output file (default: standard output)")
        p.add_argument("--seed", type=int, metavar="U64",
                       help="override the random seed")
        p.add_argument("--source", choices=config_mod.SOURCE_MODES,
                       help="signal-window source mode")
        p.add_argument("--purity", type=float, metavar="FLOAT",
                       help="override the signal superposition purity")
        p.add_argument("--n-pulses", type=float, metavar="FLOAT",
                       dest="n_pulses", help="override the session length")

    common(sub.add_parser("rate", help="evaluate one explicit design point"))
    common(sub.add_parser("optimize", help="search parameters at one distance"))
    p_sweep = sub.add_parser("sweep", help="optimize over a distance grid")
    common(p_sweep)
    p_sweep.add_argument("--figure", metavar="PATH",
                         help="also render the swept curves to an image file")
    common(sub.add_parser("compare",
                          help="hybrid versus baseline rates and reach"))
    common(sub.add_parser("mc-validate",
                          help="run the event-level sampler against the "
                               "analytic statistics"))
    return parser


def _load(args: argparse.Namespace) -> RunConfig:
    base = config_mod.load_config(args.config) if args.config else RunConfig()
    return config_mod.apply_overrides(
        base,
        distance_km=args.distance,
        seed=args.seed,
        source_mode=args.source,
        purity=args.purity,
        n_pulses=args.n_pulses,
        out=args.out,
    )


def cmd_rate(config: RunConfig) -> int:
    # validate the explicit parameters up front so bad input exits with a
    # configuration error naming the violated constraint
    config_mod.build_source(config)
    config_mod.build_timing(config)
    point = config_mod.explicit_point(config)
    space = config_mod.build_space(config)
    report = evaluate_point(point, space, config.distance_km)
    payload = report_payload(report, config, "rate")
    _emit(dumps(payload), config.out)
    if report.failure_reason is not None:
        print(f"estimation failed: {report.failure_reason}", file=sys.stderr)
        return EXIT_ESTIMATION
    return EXIT_OK


def cmd_optimize(config: RunConfig) -> int:
    space = config_mod.build_space(config)
    result = optimize_at_distance(space, config.distance_km, config.seed)
    payload = {
        "command": "optimize",
        "distance_km": config.distance_km,
        "seed": config.seed,
        "evaluations": result.evaluations,
        "best_point": dataclasses.asdict(result.point),
        "report": dataclasses.asdict(result.report),
        "effective_config": config_mod.effective_config(config),
    }
    _emit(dumps(payload), config.out)
    if result.report.failure_reason is not None:
        print(f"estimation failed: {result.report.failure_reason}",
              file=sys.stderr)
        return EXIT_ESTIMATION
    return EXIT_OK


def _csv_rows(config: RunConfig, mode: str, swept: SweepResult) -> List[Dict]:
    rows = []
    purity = config.purity if mode == "hybrid" else 1.0
    for result in swept.results:
        estimate = result.report.estimate
        rows.append({
            "schema_version": CSV_SCHEMA_VERSION,
            "source_mode": mode,
            "purity": purity,
            "n_pulses": config.n_pulses,
            "distance_km": result.distance_km,
            "seed": config.seed,
            "rate_per_pulse": result.report.rate_per_pulse,
            "rate_per_second": result.report.rate_per_second,
            "secret_bits": result.report.secret_bits,
            "plob_bound": result.report.plob,
            "max_distance_km": swept.max_distance_km
            if swept.max_distance_km is not None else math.nan,
            "mu": result.point.mu,
            "nu": result.point.nu,
            "omega": result.point.omega,
            "p_signal": result.point.p_signal,
            "p_nu": result.point.p_nu,
            "p_omega": result.point.p_omega,
            "window_s": result.point.window_s,
            "phase_error_upper": estimate.phase_error_upper
            if estimate is not None else math.nan,
            "lambda_ec": result.report.lambda_ec,
            "eps_sec": result.report.eps_sec,
            "eps_cor": result.report.eps_cor,
            "eta_detector": config.eta_detector,
            "dark_count_prob": config.dark_count_prob,
            "attenuation_db_per_km": config.attenuation_db_per_km,
            "rep_rate_hz": config.rep_rate_hz,
            "e_hom": config.e_hom,
            "drift_rad_per_s": config.drift_rad_per_s,
            "detuning_hz": config.detuning_hz,
            "phase_slices": config.phase_slices,
            "ec_efficiency": config.ec_efficiency,
            "epsilon": config.epsilon,
        })
    return rows


def render_csv(rows: Sequence[Dict]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row[col]) for col in CSV_COLUMNS])
    return buffer.getvalue()


def _render_figure(path: str, rows: Sequence[Dict]) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    series: Dict[str, List] = {}
    for row in rows:
        label = f"{row['source_mode']} purity={row['purity']:g}"
        series.setdefault(label, []).append(
            (row["distance_km"], row["rate_per_pulse"]))
    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    for label in sorted(series):
        points = sorted(series[label])
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        ax.plot(xs, ys, marker="o", label=label)
    if rows:
        distances = sorted({row["distance_km"] for row in rows})
        plob = [plob_bound(km, rows[0]["attenuation_db_per_km"])
                if km > 0 else math.nan for km in distances]
        ax.plot(distances, plob, linestyle="--", color="black",
                label="repeaterless bound")
    ax.set_yscale("log")
    ax.set_xlabel("distance (km)")
    ax.set_ylabel("key rate (bits per pulse)")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def cmd_sweep(config: RunConfig, figure: Optional[str] = None) -> int:
    grid = list(config.distances)
    rows: List[Dict] = []
    if grid:
        modes = [config.source_mode]
        if config.include_baseline and config.source_mode == "hybrid":
            modes.append("wcs")
        for index, mode in enumerate(modes):
            space = config_mod.build_space(config, source_mode=mode)
            swept = sweep(space, grid, seed=config.seed + 1000 * index,
                          progress=True)
            rows.extend(_csv_rows(config, mode, swept))
    if figure is not None and not rows:
        raise ConfigError("cannot render a figure from an empty sweep")
    _emit(render_csv(rows), config.out)
    if figure is not None:
        _render_figure(figure, rows)
    return EXIT_OK


def _ratio(numerator: float, denominator: float):
    if denominator > 0.0:
        return numerator / denominator
    if numerator > 0.0:
        return "inf"
    return "nan"


def cmd_compare(config: RunConfig) -> int:
    distance = config.distance_km
    outcomes: Dict[str, Dict] = {}
    for index, n_pulses in enumerate((1e12, 1e14)):
        per_mode: Dict[str, SweepResult] = {}
        for mode_index, mode in enumerate(("hybrid", "wcs")):
            space = config_mod.build_space(config, source_mode=mode,
                                           n_pulses=n_pulses)
            per_mode[mode] = sweep(
                space, [distance],
                seed=config.seed + 100 * index + 10 * mode_index,
                progress=True)
        rate_h = per_mode["hybrid"].results[0].report.rate_per_pulse
        rate_w = per_mode["wcs"].results[0].report.rate_per_pulse
        max_h = per_mode["hybrid"].max_distance_km
        max_w = per_mode["wcs"].max_distance_km
        outcomes[f"n_pulses_{n_pulses:.0e}"] = {
            "n_pulses": n_pulses,
            "distance_km": distance,
            "rate_hybrid": rate_h,
            "rate_baseline": rate_w,
            "rate_ratio": _ratio(rate_h, rate_w),
            "max_distance_hybrid_km": max_h,
            "max_distance_baseline_km": max_w,
            "max_distance_ratio": _ratio(
                max_h if max_h is not None else 0.0,
                max_w if max_w is not None else 0.0),
        }
    payload = {
        "command": "compare",
        "seed": config.seed,
        "comparisons": outcomes,
        "effective_config": config_mod.effective_config(config),
    }
    _emit(dumps(payload), config.out)
    return EXIT_OK


def cmd_mc_validate(config: RunConfig) -> int:
    spec = config_mod.build_source(config)
    model = config_mod.build_detector(config)
    timing = config_mod.build_timing(config, n_pulses=config.mc_sample_size)
    interference = config_mod.build_interference(config)
    empirical = simulate((spec, spec), model, timing, config.mc_sample_size,
                         seed=config.seed)
    analytic = statistics_for(spec, spec, model, timing, interference)
    report = mc_compare(analytic, empirical)
    payload = {
        "command": "mc-validate",
        "seed": config.seed,
        "comparison": report,
        "effective_config": config_mod.effective_config(config),
    }
    _emit(dumps(payload), config.out)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        config = _load(args)
        if args.command == "rate":
            return cmd_rate(config)
        if args.command == "optimize":
            return cmd_optimize(config)
        if args.command == "sweep":
            return cmd_sweep(config, figure=args.figure)
        if args.command == "compare":
            return cmd_compare(config)
        if args.command == "mc-validate":
            return cmd_mc_validate(config)
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
