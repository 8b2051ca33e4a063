"""bellbench: a virtual entangled-photon laboratory.

Simulates a two-crystal downconversion pair source with rotatable pump and
analyzer polarizers, and provides the full analysis chain: state diagnostics
from four counts, polarization-correlation fits, the CHSH statistic S with
propagated uncertainty, and local hidden-variable models to compare against.
"""

__version__ = "0.1.0"

from bellbench.apparatus import (  # noqa: F401
    ApparatusConfig,
    CountRecord,
    LiveSession,
    SessionBusyError,
    SourceState,
    accidental_mean,
    acquire,
    effective_cos_phi_m,
    mean_coincidences,
    phase_center_for,
    run_protocol,
)
from bellbench.estimation import (  # noqa: F401
    ChshResult,
    ChshRun,
    DegenerateCountsError,
    FitConvergenceError,
    FitResult,
    StateDiagnostics,
    TuneResult,
    chsh_settings,
    compute_E,
    compute_S,
    diagnose_state,
    fit_nmodel,
    s_partials,
    sigma_S,
    tune,
)
from bellbench.hvt import (  # noqa: F401
    HvtStrategy,
    hvt_E,
    hvt_S,
    hvt_prob_vv,
    simple_hvt,
)
from bellbench.qm import (  # noqa: F401
    CANONICAL_ANGLES,
    ChshAngles,
    CountModelParams,
    EPR_STATE,
    OutcomeProbabilities,
    PumpConfig,
    TwoPhotonState,
    expected_counts,
    marginal_prob_v,
    normalize_angle,
    outcome_probs,
    prob_vv,
    prob_vv_epr,
    pump_state,
    qm_E,
    qm_S,
)
from bellbench.session_io import (  # noqa: F401
    load_config,
    load_counts,
    load_result,
    save_counts,
    save_result,
)
