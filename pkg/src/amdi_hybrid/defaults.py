"""Default protocol constants.

Values that a deployment would normally calibrate are collected here so that
every report can echo exactly what was assumed.  Detector figures follow the
common high-efficiency SNSPD setting for long-haul fiber links; the repetition
rate, interference visibility penalty and fiber phase-drift rate follow typical
asynchronous pairing experiments.  All of them can be overridden through the
TOML config or the library API.
"""

from __future__ import annotations

# Detector and channel.
DEFAULT_DETECTOR_EFFICIENCY = 0.8
DEFAULT_DARK_COUNT_PROB = 1e-8
DEFAULT_ATTENUATION_DB_PER_KM = 0.16

# Clock and pairing.
DEFAULT_REP_RATE_HZ = 1e9
DEFAULT_PAIRING_WINDOW_S = 0.4e-6

# Interference quality.  E_HOM is the fraction of matched-phase coincidences
# that behave as if the interferometer output labels were swapped (imperfect
# two-photon visibility).  The drift rate is the fiber-induced angular phase
# drift; the laser detuning default is zero (locked sources).
DEFAULT_E_HOM = 0.04
DEFAULT_FIBER_DRIFT_RAD_PER_S = 5900.0
DEFAULT_DETUNING_HZ = 0.0

# Phase post-matching slice count.
DEFAULT_PHASE_SLICES = 16

# Numerics.
DEFAULT_PND_CUTOFF = 40
DEFAULT_PND_TAIL_TOL = 1e-12
DEFAULT_QUAD_POINTS = 2048

# Security and error correction.
DEFAULT_EPSILON = 1e-10
DEFAULT_EC_EFFICIENCY = 1.1

__all__ = [name for name in dir() if name.startswith("DEFAULT_")]
