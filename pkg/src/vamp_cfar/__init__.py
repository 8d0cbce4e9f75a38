"""Sub-Nyquist radar CFAR detection toolkit.

Sparse scenes are recovered from partial-Fourier measurements by a
K-layer unfolded-VAMP engine; detection thresholds are calibrated to a
requested false-alarm rate either from the engine's own closed-form
variance claim or from the parameter-convergence detector, which
re-estimates the recovery-error variance from the data itself and
stays calibrated when the layer parameters are learned or perturbed.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DegenerateDivergenceError,
    DetectorFailureError,
    DimensionError,
    InsufficientNullSamplesError,
    NumericFailureError,
    ParameterSchemaError,
    ThresholdDomainError,
    VampCfarError,
)
from .signal_model import (
    Measurement,
    ObservationMatrix,
    Scene,
    gen_partial_fourier,
    gen_scene,
    measure,
    stack_complex,
    unstack_real,
)
from .vamp_core import (
    LayerParams,
    LmmseSolver,
    RecoveryOutput,
    UnfoldedModel,
    VampState,
    eta_sst,
    lmmse_stage,
    load_params,
    matched_params,
    nmse,
    perturb_params,
    save_params,
    sigma2_vamp,
    vamp_unfold,
)
from .pcd_detector import (
    DetectionResult,
    PcdConfig,
    PcdTrace,
    baseline_vamp_detect,
    hard_detect,
    pcd_detect,
    pcd_variance_estimate,
    rayleigh_threshold,
    refine_scene,
    residual_variance,
    support_set,
    test_statistic,
)
from .experiments import (
    ExperimentConfig,
    MetricsRow,
    MetricsTable,
    ParamMode,
    SigmaConvergenceReport,
    TrialRecord,
    build_model,
    ecdf,
    export_fixtures,
    load_config,
    run_pfa_control,
    run_roc,
    run_sigma_convergence,
    run_trials,
    wilson_interval,
)
