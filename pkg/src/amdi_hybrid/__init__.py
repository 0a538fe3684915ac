"""Key-rate analysis for asynchronous pair-matching QKD with a hybrid source.

Transmitters emit, per time bin, either a phase-randomized cat-state signal
pulse or one of two phase-randomized coherent decoy intensities.  Clicks at
the middle node are matched into pairs within a bounded window, decoy
statistics bound the single-photon-pair contribution, and a composable
finite-size analysis turns observed counts into an extractable key length.

The public surface is re-exported here; submodules stay importable directly.
"""

from .config import (  # noqa: F401
    ConfigError,
    RunConfig,
    apply_overrides,
    build_space,
    effective_config,
    explicit_point,
    load_config,
    parse_config,
)
from .defaults import *  # noqa: F401,F403
from .detection import (  # noqa: F401
    DetectorModel,
    FockOutcome,
    GainTable,
    TruncatedGain,
    build_gain_table,
    click_probs_theta,
    fock_interference_distribution,
    fock_yields,
    gain_generic,
    gain_wcs,
    transmittance,
)
from .finite_key import (  # noqa: F401
    BoundKind,
    BoundedCount,
    DecoyEstimate,
    DecoySettings,
    EstimationError,
    decoy_estimate,
    expected_bounds,
    observed_bounds,
)
from .key_rate import (  # noqa: F401
    EpsilonBudget,
    KeyRateReport,
    binary_entropy,
    epsilon_budget,
    evaluate_protocol,
    lambda_ec,
    plob_bound,
    secret_key_rate,
)
from .mc_oracle import EmpiricalStats, simulate  # noqa: F401
from .mc_oracle import compare as compare_statistics  # noqa: F401
from .optimizer import (  # noqa: F401
    OptimizationResult,
    OptimizationSpace,
    ParameterPoint,
    SweepResult,
    compare_ratio,
    evaluate_point,
    optimize_at_distance,
    reduce_candidates,
    sweep,
)
from .pairing_stats import (  # noqa: F401
    InterferenceConfig,
    PairingStatistics,
    ProtocolTiming,
    collect_statistics,
    statistics_for,
)
from .sources import (  # noqa: F401
    PhotonNumberDistribution,
    SignalKind,
    SourceSpec,
    cat_pnd,
    poisson_pnd,
    signal_pnd,
    single_photon_prob,
    vacuum_pnd,
    vacuum_prob,
)

__version__ = "0.1.0"
