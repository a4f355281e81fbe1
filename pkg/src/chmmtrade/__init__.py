"""Coupled two-chain HMM indicator forecasting and backtesting."""

from .model import (
    ChmmParams,
    ObservationSequence,
    joint_transition,
    jittered_params,
    load_params,
    params_from_text,
    params_to_text,
    save_params,
    uniform_params,
    validate_params,
)
from .inference import ForwardTrellis, ViterbiTrellis, coupled_viterbi, forward
from .training import (
    AlphaGradients,
    DegenerateModelError,
    FitConfig,
    FitResult,
    GradientSet,
    alpha_gradients,
    fit,
    likelihood_gradient,
    reestimate,
)
from .indicators import (
    CCI_DISCRETIZER,
    RSI_DISCRETIZER,
    Discretizer,
    OhlcBar,
    atr,
    bin_value,
    cci,
    discretize,
    rsi,
    sma,
    true_range,
)
from .strategy import (
    Signal,
    StatePrediction,
    allocation_fraction,
    generate_signal,
    next_state_marginal,
    next_state_viterbi,
    predict_observation,
)
from .backtest import (
    BacktestConfig,
    BacktestResult,
    ComparisonResult,
    EquityCurve,
    PerfStats,
    TradeRecord,
    compare_predictors,
    perf_stats,
    run_backtest,
    stats_from_ret_vol,
)
from .oracle import (
    SampledPaths,
    brute_likelihood,
    brute_viterbi,
    fd_gradient,
    permutation_aligned_mae,
    sample_chmm,
    synthetic_ohlc,
)

__version__ = "0.1.0"
