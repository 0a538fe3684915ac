"""Declarative run configuration: TOML parsing, defaults, validation.

A config document has one section per concern (source, detector, protocol,
interference, security, optimizer, mc, run); every omitted key falls back
to the documented default and the resolved value is echoed into every
output the commands write.  Validation reuses the domain types' own
constructors, so a config can never express a state the library rejects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Dict, Mapping, Optional, Tuple

try:
    import tomllib as _toml
except ModuleNotFoundError:
    import tomli as _toml

from .defaults import (
    DEFAULT_ATTENUATION_DB_PER_KM,
    DEFAULT_DARK_COUNT_PROB,
    DEFAULT_DETECTOR_EFFICIENCY,
    DEFAULT_DETUNING_HZ,
    DEFAULT_E_HOM,
    DEFAULT_EC_EFFICIENCY,
    DEFAULT_EPSILON,
    DEFAULT_FIBER_DRIFT_RAD_PER_S,
    DEFAULT_PHASE_SLICES,
    DEFAULT_REP_RATE_HZ,
)
from .detection import DetectorModel
from .finite_key import DecoySettings
from .key_rate import EpsilonBudget
from .optimizer import OptimizationSpace, ParameterPoint
from .pairing_stats import InterferenceConfig, ProtocolTiming
from .sources import SignalKind, SourceSpec

SOURCE_MODES = ("hybrid", "wcs")


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved settings for one CLI invocation."""

    source_mode: str = "hybrid"
    purity: float = 1.0
    mu: Optional[float] = None
    nu: Optional[float] = None
    omega: Optional[float] = None
    p_signal: Optional[float] = None
    p_nu: Optional[float] = None
    p_omega: Optional[float] = None

    eta_detector: float = DEFAULT_DETECTOR_EFFICIENCY
    dark_count_prob: float = DEFAULT_DARK_COUNT_PROB
    attenuation_db_per_km: float = DEFAULT_ATTENUATION_DB_PER_KM

    n_pulses: float = 1e12
    rep_rate_hz: float = DEFAULT_REP_RATE_HZ
    pairing_window_s: Optional[float] = None
    phase_slices: int = DEFAULT_PHASE_SLICES

    e_hom: float = DEFAULT_E_HOM
    drift_rad_per_s: float = DEFAULT_FIBER_DRIFT_RAD_PER_S
    detuning_hz: float = DEFAULT_DETUNING_HZ

    epsilon: float = DEFAULT_EPSILON
    ec_efficiency: float = DEFAULT_EC_EFFICIENCY

    mu_bounds: Tuple[float, float] = (5e-3, 0.8)
    nu_bounds: Tuple[float, float] = (5e-3, 0.8)
    omega_bounds: Tuple[float, float] = (5e-4, 0.4)
    window_bounds: Tuple[float, float] = (4e-9, 2e-6)
    n_starts: int = 8
    max_evaluations: int = 2000

    mc_sample_size: int = 1_000_000

    distance_km: float = 0.0
    distances: Tuple[float, ...] = ()
    include_baseline: bool = False
    seed: int = 1
    out: Optional[str] = None

    def __post_init__(self) -> None:
        if self.source_mode not in SOURCE_MODES:
            raise ConfigError(
                f"source mode must be one of {SOURCE_MODES}, "
                f"got {self.source_mode!r}")
        if self.distance_km < 0.0:
            raise ConfigError("distance must be non-negative")
        if any(d < 0.0 for d in self.distances):
            raise ConfigError("sweep distances must be non-negative")
        if self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")

    @property
    def signal_kind(self) -> SignalKind:
        return SignalKind.CAT if self.source_mode == "hybrid" else SignalKind.WCS


# section name -> {toml key -> RunConfig field}
_SCHEMA: Mapping[str, Mapping[str, str]] = {
    "source": {
        "mode": "source_mode",
        "purity": "purity",
        "mu": "mu",
        "nu": "nu",
        "omega": "omega",
        "p_signal": "p_signal",
        "p_nu": "p_nu",
        "p_omega": "p_omega",
    },
    "detector": {
        "eta": "eta_detector",
        "dark_count_prob": "dark_count_prob",
        "attenuation_db_per_km": "attenuation_db_per_km",
    },
    "protocol": {
        "n_pulses": "n_pulses",
        "rep_rate_hz": "rep_rate_hz",
        "pairing_window_s": "pairing_window_s",
        "phase_slices": "phase_slices",
    },
    "interference": {
        "e_hom": "e_hom",
        "drift_rad_per_s": "drift_rad_per_s",
        "detuning_hz": "detuning_hz",
    },
    "security": {
        "epsilon": "epsilon",
        "ec_efficiency": "ec_efficiency",
    },
    "optimizer": {
        "mu_bounds": "mu_bounds",
        "nu_bounds": "nu_bounds",
        "omega_bounds": "omega_bounds",
        "window_bounds": "window_bounds",
        "n_starts": "n_starts",
        "max_evaluations": "max_evaluations",
    },
    "mc": {
        "sample_size": "mc_sample_size",
    },
    "run": {
        "distance_km": "distance_km",
        "distances": "distances",
        "include_baseline": "include_baseline",
        "seed": "seed",
        "out": "out",
    },
}

_TUPLE_FIELDS = {"mu_bounds", "nu_bounds", "omega_bounds", "window_bounds",
                 "distances"}
_INT_FIELDS = {"phase_slices", "n_starts", "max_evaluations",
               "mc_sample_size", "seed"}


def parse_config(text: str) -> RunConfig:
    """RunConfig from a TOML document; unknown keys are hard errors."""
    try:
        document = _toml.loads(text)
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from exc
    values: Dict[str, object] = {}
    for section, entries in document.items():
        known = _SCHEMA.get(section)
        if known is None:
            raise ConfigError(f"unknown config section [{section}]")
        if not isinstance(entries, dict):
            raise ConfigError(f"[{section}] must be a table of keys")
        for key, value in entries.items():
            target = known.get(key)
            if target is None:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            values[target] = _coerce(target, value, f"[{section}] {key}")
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return parse_config(handle.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc


def _coerce(target: str, value: object, where: str) -> object:
    if target in _TUPLE_FIELDS:
        if not isinstance(value, (list, tuple)) \
                or not all(isinstance(v, (int, float)) for v in value):
            raise ConfigError(f"{where} must be a list of numbers")
        return tuple(float(v) for v in value)
    if target == "out":
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string path")
        return value
    if target == "source_mode":
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string")
        return value
    if target == "include_baseline":
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be a boolean")
        return value
    if target in _INT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number")
    number = float(value)
    if not math.isfinite(number):
        raise ConfigError(f"{where} must be finite")
    return number


def apply_overrides(config: RunConfig, **overrides: object) -> RunConfig:
    """Non-None keyword overrides replace config fields (CLI flags)."""
    changes = {k: v for k, v in overrides.items() if v is not None}
    try:
        return replace(config, **changes) if changes else config
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


_EXPLICIT_FIELDS = ("mu", "nu", "omega", "p_signal", "p_nu", "p_omega",
                    "pairing_window_s")


def require_explicit_point(config: RunConfig) -> None:
    missing = [name for name in _EXPLICIT_FIELDS
               if getattr(config, name) is None]
    if missing:
        raise ConfigError(
            "this command needs explicit source parameters; missing: "
            + ", ".join(missing))


def _wrap(exc: ValueError) -> ConfigError:
    return ConfigError(f"invalid configuration: {exc}")


def build_source(config: RunConfig) -> SourceSpec:
    require_explicit_point(config)
    try:
        return SourceSpec(
            mu=config.mu, nu=config.nu, omega=config.omega,
            p_signal=config.p_signal, p_nu=config.p_nu,
            p_omega=config.p_omega, purity=config.purity,
            signal_kind=config.signal_kind,
        )
    except ValueError as exc:
        raise _wrap(exc) from exc


def build_detector(config: RunConfig,
                   distance_km: Optional[float] = None) -> DetectorModel:
    km = config.distance_km if distance_km is None else distance_km
    try:
        return DetectorModel(
            eta_d=config.eta_detector, p_dark=config.dark_count_prob,
            alpha_db_per_km=config.attenuation_db_per_km, distance_km=km,
        )
    except ValueError as exc:
        raise _wrap(exc) from exc


def build_timing(config: RunConfig,
                 n_pulses: Optional[float] = None) -> ProtocolTiming:
    require = config.pairing_window_s
    if require is None:
        raise ConfigError("pairing_window_s is required for this command")
    try:
        return ProtocolTiming(
            rep_rate_hz=config.rep_rate_hz, pairing_window_s=require,
            n_pulses=config.n_pulses if n_pulses is None else n_pulses,
        )
    except ValueError as exc:
        raise _wrap(exc) from exc


def build_interference(config: RunConfig) -> InterferenceConfig:
    try:
        return InterferenceConfig(
            e_hom=config.e_hom, drift_rad_per_s=config.drift_rad_per_s,
            detuning_hz=config.detuning_hz, phase_slices=config.phase_slices,
        )
    except ValueError as exc:
        raise _wrap(exc) from exc


def build_budget(config: RunConfig) -> EpsilonBudget:
    try:
        return EpsilonBudget(
            eps_prime=config.epsilon, eps_hat=config.epsilon,
            eps_phase=config.epsilon, eps_beta=config.epsilon,
            eps_vacuum=config.epsilon, eps_single=config.epsilon,
            eps_pa=config.epsilon, eps_cor=config.epsilon,
        )
    except ValueError as exc:
        raise _wrap(exc) from exc


def build_decoy_settings(config: RunConfig) -> DecoySettings:
    try:
        return DecoySettings(epsilon=config.epsilon)
    except ValueError as exc:
        raise _wrap(exc) from exc


def build_space(config: RunConfig, source_mode: Optional[str] = None,
                purity: Optional[float] = None,
                n_pulses: Optional[float] = None) -> OptimizationSpace:
    mode = config.source_mode if source_mode is None else source_mode
    kind = SignalKind.CAT if mode == "hybrid" else SignalKind.WCS
    try:
        return OptimizationSpace(
            n_pulses=config.n_pulses if n_pulses is None else n_pulses,
            mu_bounds=config.mu_bounds, nu_bounds=config.nu_bounds,
            omega_bounds=config.omega_bounds,
            window_bounds=config.window_bounds,
            purity=config.purity if purity is None else purity,
            signal_kind=kind, eta_detector=config.eta_detector,
            dark_count_prob=config.dark_count_prob,
            attenuation_db_per_km=config.attenuation_db_per_km,
            rep_rate_hz=config.rep_rate_hz,
            interference=build_interference(config),
            budget=build_budget(config),
            decoy=build_decoy_settings(config),
            ec_efficiency=config.ec_efficiency,
            n_starts=config.n_starts,
            max_evaluations=config.max_evaluations,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise _wrap(exc) from exc


def explicit_point(config: RunConfig) -> ParameterPoint:
    require_explicit_point(config)
    return ParameterPoint(
        mu=config.mu, nu=config.nu, omega=config.omega,
        p_signal=config.p_signal, p_nu=config.p_nu, p_omega=config.p_omega,
        window_s=config.pairing_window_s,
    )


def effective_config(config: RunConfig) -> Dict[str, object]:
    """Flat, JSON-ready echo of every resolved field.

    The output destination is omitted: writing the same run to a different
    path must not change the bytes of the report itself.
    """
    echo: Dict[str, object] = {}
    for spec_field in fields(config):
        if spec_field.name == "out":
            continue
        value = getattr(config, spec_field.name)
        if isinstance(value, tuple):
            value = list(value)
        echo[spec_field.name] = value
    return echo
