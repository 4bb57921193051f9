"""Sequential what-if risk prediction during labor: a discrete-time causal
simulator, counterfactual oracles for intervention-option estimands,
confounded observational data generation, estimators validated against the
oracles, and an interactive session service."""

from .config import ScmConfig, default_config, load_config, save_config
from .estimands import (
    EstimandSpec,
    Horizon,
    RiskEstimate,
    builtin_estimand,
    builtin_label,
)
from .errors import (
    ConfigError,
    DataFormatError,
    IrreversibilityError,
    LaborSimError,
    NonConvergenceError,
    NotAtRiskError,
    PositivityError,
    SeparationError,
)
from .oracle import oracle_exact, oracle_mc, risk_profile
from .policy import UsualCarePolicy, default_policy, never_cesarean_policy
from .regimes import (
    DynamicFhr,
    FixThenNatural,
    History,
    ImmediateCesarean,
    NaturalCourse,
    Regime,
    StaticSequence,
    VaginalOnly,
    decide,
    fhr_abnormal_flag,
    is_regime_consistent,
    regime_policy,
)
from .rng import make_rng, substream
from .scm import initial_state, sample_baseline, simulate_trajectory, transition
from .coarse import enumerate_states
from .states import (
    BaselineCovariates,
    PatientState,
    TimeVaryingCovariates,
    Trajectory,
)

__version__ = "0.1.0"

__all__ = [
    "BaselineCovariates", "ConfigError", "DataFormatError", "DynamicFhr",
    "EstimandSpec", "FixThenNatural", "History", "Horizon",
    "ImmediateCesarean", "IrreversibilityError", "LaborSimError",
    "NaturalCourse", "NonConvergenceError", "NotAtRiskError", "PatientState",
    "PositivityError", "Regime", "RiskEstimate", "ScmConfig",
    "SeparationError", "StaticSequence", "TimeVaryingCovariates",
    "Trajectory", "UsualCarePolicy", "VaginalOnly", "builtin_estimand",
    "builtin_label", "decide", "default_config", "default_policy",
    "enumerate_states", "fhr_abnormal_flag", "initial_state",
    "is_regime_consistent", "load_config", "make_rng",
    "never_cesarean_policy", "oracle_exact", "oracle_mc", "regime_policy",
    "risk_profile", "sample_baseline", "save_config", "simulate_trajectory",
    "substream", "transition",
]
