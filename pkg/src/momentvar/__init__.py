"""Third- and fourth-moment variations: realized estimators, option-implied
expectations, Heston/jump simulation and variation-swap hedging."""

__version__ = "0.1.0"

from .errors import (
    DegenerateSampleError,
    InvalidInputError,
    MissingDataError,
    MomentVarError,
    OutOfRangeError,
    ParameterError,
    SingularDesignError,
    TruncationWarning,
)
from .hedging import build_hedged, fit_hedge, hedge_report, optimize_weight, qq_pairs, qq_rmse
from .jumps import JumpCorrection, j2_correction, j3_correction, j4_correction, jump_corrections
from .options import (
    OptionQuote,
    OptionSlice,
    bkm_fourth,
    bkm_third,
    bs_slice,
    implied_fmv,
    implied_moments,
    implied_qv,
    implied_tmv,
    phi,
    rn_skew_kurt,
    variation_moment_regression,
)
from .regression import HedgeFit, ols
from .simulation import (
    HestonSpec,
    JumpSpec,
    PathEnsemble,
    ensemble_sample_moments,
    moment_relation_check,
    simulate_heston,
)
from .variation import (
    LogPriceSeries,
    SummaryStats,
    VariationReport,
    annualize,
    realized_fmv,
    realized_qv,
    realized_tmv,
    summary_stats,
    variation_report,
)
