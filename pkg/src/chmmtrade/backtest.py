"""Event-driven bar loop: refit, predict, signal, fill, bracket exits.

Decisions happen at bar closes using only data up to that close; entries
fill at the next bar's open; exits fill at frozen stop/target levels
derived from the ATR at signal time.  Only the first instrument is
traded, the second acts as the coupled filter, though its predictions
are recorded for diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from .indicators import CCI_DISCRETIZER, RSI_DISCRETIZER, Discretizer, atr, cci, discretize, rsi
from .inference import coupled_viterbi, forward
from .model import ChmmParams, ObservationSequence, jittered_params
from .strategy import (
    StatePrediction,
    allocation_fraction,
    generate_signal,
    next_state_marginal,
    next_state_viterbi,
    predict_observation,
)
from .training import FitConfig, fit

__all__ = [
    "BacktestConfig",
    "TradeRecord",
    "EquityCurve",
    "PerfStats",
    "DiagnosticRow",
    "FitRecord",
    "BacktestResult",
    "ComparisonRow",
    "ComparisonResult",
    "run_backtest",
    "compare_predictors",
    "perf_stats",
    "stats_from_ret_vol",
]

SYSTEM_DEFAULTS = {
    # system: (atr_period, stop_mult, target_mult)
    "rsi": (12, 2.0, 6.0),
    "cci": (24, 4.0, 10.0),
}
PREDICTORS = ("baseline", "marginal", "viterbi")


@dataclass
class BacktestConfig:
    """Backtest knobs; None-valued exit fields inherit system defaults."""

    system: str = "rsi"
    lookback: int = 4
    n_states: int = 5
    n_bins: int = 8
    indicator_period: int = 4
    sma_period: int = 4
    atr_period: int | None = None
    stop_mult: float | None = None
    target_mult: float | None = None
    dynamic_allocation: bool = False
    predictor: str = "marginal"
    notional: float = 1_000_000.0
    fidelity: str = "corrected"
    seed: int = 0
    fit: FitConfig = field(default_factory=FitConfig)

    def __post_init__(self):
        if self.system not in SYSTEM_DEFAULTS:
            raise ValueError(f"system must be one of {tuple(SYSTEM_DEFAULTS)}, got {self.system!r}")
        if self.predictor not in PREDICTORS:
            raise ValueError(f"predictor must be one of {PREDICTORS}, got {self.predictor!r}")
        d_atr, d_stop, d_target = SYSTEM_DEFAULTS[self.system]
        if self.atr_period is None:
            self.atr_period = d_atr
        if self.stop_mult is None:
            self.stop_mult = d_stop
        if self.target_mult is None:
            self.target_mult = d_target
        for name in ("lookback", "n_states", "n_bins", "indicator_period", "sma_period", "atr_period"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not self.target_mult > self.stop_mult:
            raise ValueError("target multiple must exceed stop multiple")
        if self.notional <= 0:
            raise ValueError("notional must be positive")
        if self.fidelity not in ("corrected", "literal"):
            raise ValueError(f"fidelity must be 'corrected' or 'literal', got {self.fidelity!r}")

    @property
    def discretizer(self) -> Discretizer:
        base = RSI_DISCRETIZER if self.system == "rsi" else CCI_DISCRETIZER
        return Discretizer(base.lb, base.ub, self.n_bins)


@dataclass
class TradeRecord:
    """One round trip; exit fields stay None while the position is open."""

    entry_time: datetime
    entry_price: float
    side: str
    size: float
    stop_price: float
    target_price: float
    exit_time: datetime | None = None
    exit_price: float | None = None
    exit_reason: str | None = None
    pnl: float | None = None

    def __post_init__(self):
        if self.side == "long":
            ok = self.stop_price < self.entry_price < self.target_price
        elif self.side == "short":
            ok = self.target_price < self.entry_price < self.stop_price
        else:
            raise ValueError(f"side must be 'long' or 'short', got {self.side!r}")
        if not ok:
            raise ValueError(
                f"bracket geometry violated: {self.side} stop={self.stop_price} "
                f"entry={self.entry_price} target={self.target_price}"
            )

    @property
    def direction(self) -> int:
        return 1 if self.side == "long" else -1

    def close(self, when: datetime, price: float, reason: str) -> None:
        self.exit_time = when
        self.exit_price = price
        self.exit_reason = reason
        self.pnl = self.direction * (price - self.entry_price) * self.size


@dataclass
class EquityCurve:
    timestamps: list[datetime]
    values: np.ndarray


@dataclass
class PerfStats:
    ret: float
    vol: float
    ratio: float
    delta_ratio: float | None = None


@dataclass
class DiagnosticRow:
    """Per-bar model readout plus the signal decided at that bar's close."""

    timestamp: datetime
    predicted_value: float = float("nan")
    predicted_state: int | None = None
    transition_prob: float = float("nan")
    predicted_value2: float = float("nan")
    predicted_state2: int | None = None
    signal_side: str = "none"


@dataclass
class FitRecord:
    window_end: datetime
    sweeps_run: int
    trace: list[float]


@dataclass
class BacktestResult:
    trades: list[TradeRecord]
    equity: EquityCurve
    stats: PerfStats
    diagnostics: list[DiagnosticRow]
    fit_records: list[FitRecord]


def stats_from_ret_vol(ret: float, vol: float, baseline_ratio: float | None = None) -> PerfStats:
    """Ratio arithmetic on already-computed return and volatility figures."""
    if vol == 0.0:
        raise ValueError("zero volatility: ratio undefined")
    ratio = ret / vol
    delta = None if baseline_ratio is None else ratio - baseline_ratio
    return PerfStats(ret=ret, vol=vol, ratio=ratio, delta_ratio=delta)


def perf_stats(equity: EquityCurve, baseline_ratio: float) -> PerfStats:
    """Total return, horizon-scaled volatility and their ratio.

    Volatility is the standard deviation of per-bar percent returns
    scaled by the square root of the bar count, matching the horizon of
    the total return; the risk-free rate is taken as zero.
    """
    values = np.asarray(equity.values, dtype=float)
    if values.size < 2:
        raise ValueError("need at least two equity points")
    rets = np.diff(values) / values[:-1]
    total = (values[-1] / values[0] - 1.0) * 100.0
    vol = float(rets.std() * math.sqrt(rets.size) * 100.0)
    return stats_from_ret_vol(total, vol, baseline_ratio)


def _indicator_series(cfg: BacktestConfig, bars) -> np.ndarray:
    closes = [b.close for b in bars]
    if cfg.system == "rsi":
        return rsi(closes, cfg.indicator_period)
    return cci(bars, cfg.indicator_period)


def _feasible_from(cfg: BacktestConfig, ind1, ind2, atr1) -> int | None:
    """First bar index at which a decision can be made, or None."""
    hist = cfg.sma_period + 1 if cfg.predictor == "baseline" else max(cfg.sma_period, cfg.lookback)
    for t in range(len(ind1)):
        if t - hist + 1 < 0 or not np.isfinite(atr1[t]):
            continue
        if not np.isfinite(ind1[t - hist + 1: t + 1]).all():
            continue
        if cfg.predictor != "baseline" and not np.isfinite(ind2[t - hist + 1: t + 1]).all():
            continue
        return t
    return None


def _init_params(cfg: BacktestConfig, t: int) -> ChmmParams:
    return jittered_params(cfg.n_states, cfg.n_bins, seed=(cfg.seed, t, 101))


def run_backtest(cfg: BacktestConfig, bars1, bars2, baseline_ratio: float | None = None) -> BacktestResult:
    """Run the bar loop over two aligned OHLC series; see module docs.

    Deterministic for a fixed ``cfg.seed``.  Raises ValueError on
    misaligned series or when no bar has enough history to decide on.
    """
    if len(bars1) != len(bars2) or any(
        a.timestamp != b.timestamp for a, b in zip(bars1, bars2)
    ):
        raise ValueError("series are misaligned: timestamps must match one-to-one")
    n_bars = len(bars1)
    min_bars = max(cfg.indicator_period, cfg.atr_period) + 1
    if n_bars < min_bars:
        raise ValueError(f"insufficient data: need more than {min_bars - 1} bars, got {n_bars}")

    ind1 = _indicator_series(cfg, bars1)
    ind2 = _indicator_series(cfg, bars2)
    atr1 = atr(bars1, cfg.atr_period)
    disc = cfg.discretizer
    modeled = cfg.predictor != "baseline"

    t0 = _feasible_from(cfg, ind1, ind2, atr1)
    if t0 is None:
        raise ValueError("insufficient data: no bar has a full history window")

    cash = cfg.notional
    open_trades: list[TradeRecord] = []
    trades: list[TradeRecord] = []
    diagnostics: list[DiagnosticRow] = []
    fit_records: list[FitRecord] = []
    equity_ts: list[datetime] = []
    equity_vals: list[float] = []
    pending = None  # (side, size_fraction, stop_dist, target_dist)
    prev_params: ChmmParams | None = None

    for t in range(t0, n_bars):
        bar = bars1[t]

        # 1. Fill the signal raised at the previous close at this bar's open.
        if pending is not None:
            side, frac, stop_dist, target_dist = pending
            pending = None
            if frac > 0.0 and all(tr.side != side for tr in open_trades):
                entry = bar.open
                if side == "long":
                    stop, target = entry - stop_dist, entry + target_dist
                else:
                    stop, target = entry + stop_dist, entry - target_dist
                open_trades.append(
                    TradeRecord(
                        entry_time=bar.timestamp,
                        entry_price=entry,
                        side=side,
                        size=cfg.notional * frac,
                        stop_price=stop,
                        target_price=target,
                    )
                )

        # 2. Bracket exits; the stop is checked first when both levels
        #    sit inside the bar's range.
        still_open = []
        for tr in open_trades:
            hit_stop = bar.low <= tr.stop_price if tr.side == "long" else bar.high >= tr.stop_price
            hit_target = bar.high >= tr.target_price if tr.side == "long" else bar.low <= tr.target_price
            if hit_stop:
                tr.close(bar.timestamp, tr.stop_price, "stop")
            elif hit_target:
                tr.close(bar.timestamp, tr.target_price, "target")
            if tr.exit_reason is None:
                still_open.append(tr)
            else:
                cash += tr.pnl
                trades.append(tr)
        open_trades = still_open

        # 3. Mark to market at the close.
        unrealized = sum(tr.direction * (bar.close - tr.entry_price) * tr.size for tr in open_trades)
        equity_ts.append(bar.timestamp)
        equity_vals.append(cash + unrealized)

        # 4. Decide at the close.
        row = DiagnosticRow(timestamp=bar.timestamp)
        atr_now = float(atr1[t])
        size_fraction = 1.0
        if modeled:
            lo = t - cfg.lookback + 1
            obs = ObservationSequence.from_lists(
                [discretize(disc, v) for v in ind1[lo: t + 1]],
                [discretize(disc, v) for v in ind2[lo: t + 1]],
            )
            params0 = prev_params if cfg.fit.warm_start and prev_params is not None else _init_params(cfg, t)
            if not np.isfinite(forward(params0, obs, scale=True).log_joint):
                # Warm-started parameters zeroed a bin this window observes.
                params0 = _init_params(cfg, t)
            result = fit(params0, obs, cfg.fit)
            prev_params = result.params
            fit_records.append(
                FitRecord(window_end=bar.timestamp, sweeps_run=result.sweeps_run, trace=result.log_likelihoods)
            )
            if cfg.predictor == "viterbi":
                vt = coupled_viterbi(result.params, obs)
                psi = next_state_viterbi(result.params, vt, cfg.fidelity)
            else:
                psi = next_state_marginal(result.params, cfg.fidelity)
            pred = StatePrediction(
                psi=psi,
                method=cfg.predictor,
                x_fraction=allocation_fraction(result.params, psi[0], 0, cfg.fidelity),
            )
            value1 = predict_observation(result.params, pred.psi[0], 0, disc)
            value2 = predict_observation(result.params, pred.psi[1], 1, disc)
            row.predicted_value, row.predicted_state = value1, pred.psi[0]
            row.predicted_value2, row.predicted_state2 = value2, pred.psi[1]
            row.transition_prob = pred.x_fraction
            if cfg.dynamic_allocation:
                size_fraction = pred.x_fraction
            trigger_series = np.append(ind1[t - cfg.sma_period + 1: t + 1], value1)
        else:
            trigger_series = ind1[t - cfg.sma_period: t + 1]

        sig = generate_signal(
            cfg.system,
            trigger_series,
            cfg.sma_period,
            timestamp=bar.timestamp,
            size_fraction=size_fraction,
            open_sides={tr.side for tr in open_trades},
        )
        row.signal_side = sig.side
        diagnostics.append(row)
        if sig.side != "none" and t + 1 < n_bars and atr_now > 0.0:
            pending = (
                sig.side,
                sig.size_fraction,
                cfg.stop_mult * atr_now,
                cfg.target_mult * atr_now,
            )

    # 5. Force-close whatever is still open at the final close.
    last = bars1[-1]
    for tr in open_trades:
        tr.close(last.timestamp, last.close, "end-of-data")
        cash += tr.pnl
        trades.append(tr)

    equity = EquityCurve(timestamps=equity_ts, values=np.asarray(equity_vals))
    values = equity.values
    rets = np.diff(values) / values[:-1] if values.size > 1 else np.zeros(0)
    total = (values[-1] / values[0] - 1.0) * 100.0 if values.size else 0.0
    vol = float(rets.std() * math.sqrt(rets.size) * 100.0) if rets.size else 0.0
    if vol > 0.0:
        stats = stats_from_ret_vol(total, vol, baseline_ratio)
    else:
        stats = PerfStats(ret=total, vol=0.0, ratio=float("nan"),
                          delta_ratio=None if baseline_ratio is None else float("nan"))
    return BacktestResult(
        trades=trades, equity=equity, stats=stats, diagnostics=diagnostics, fit_records=fit_records
    )


@dataclass
class ComparisonRow:
    timestamp: datetime
    state_marginal: int
    state_viterbi: int
    value_marginal: float
    value_viterbi: float


@dataclass
class ComparisonResult:
    rows: list[ComparisonRow]
    state_agreement: float
    value_agreement: float


def compare_predictors(
    cfg: BacktestConfig, bars1, bars2, initial_params: ChmmParams | None = None
) -> ComparisonResult:
    """Run both predictors over every decision bar and measure agreement.

    Each bar refits the model exactly as the backtest would, then asks
    both the marginal and the Viterbi predictor for the traded chain's
    next state and forecast value.  Agreement rates are the fraction of
    bars on which the two coincide; when they track each other closely
    the cheaper marginal predictor can stand in for the decoder.
    """
    if len(bars1) != len(bars2) or any(
        a.timestamp != b.timestamp for a, b in zip(bars1, bars2)
    ):
        raise ValueError("series are misaligned: timestamps must match one-to-one")
    ind1 = _indicator_series(cfg, bars1)
    ind2 = _indicator_series(cfg, bars2)
    atr1 = atr(bars1, cfg.atr_period)
    disc = cfg.discretizer

    work = BacktestConfig(**{**cfg.__dict__, "predictor": "marginal"})
    t0 = _feasible_from(work, ind1, ind2, atr1)
    if t0 is None:
        raise ValueError("insufficient data: no bar has a full history window")

    rows: list[ComparisonRow] = []
    prev_params = initial_params
    for t in range(t0, len(bars1)):
        lo = t - cfg.lookback + 1
        obs = ObservationSequence.from_lists(
            [discretize(disc, v) for v in ind1[lo: t + 1]],
            [discretize(disc, v) for v in ind2[lo: t + 1]],
        )
        params0 = prev_params if cfg.fit.warm_start and prev_params is not None else _init_params(cfg, t)
        if not np.isfinite(forward(params0, obs, scale=True).log_joint):
            params0 = _init_params(cfg, t)
        fitted = fit(params0, obs, cfg.fit).params
        prev_params = fitted
        psi_m = next_state_marginal(fitted, cfg.fidelity)
        vt = coupled_viterbi(fitted, obs)
        psi_v = next_state_viterbi(fitted, vt, cfg.fidelity)
        rows.append(
            ComparisonRow(
                timestamp=bars1[t].timestamp,
                state_marginal=psi_m[0],
                state_viterbi=psi_v[0],
                value_marginal=predict_observation(fitted, psi_m[0], 0, disc),
                value_viterbi=predict_observation(fitted, psi_v[0], 0, disc),
            )
        )
    n = len(rows)
    state_hits = sum(r.state_marginal == r.state_viterbi for r in rows)
    value_hits = sum(r.value_marginal == r.value_viterbi for r in rows)
    return ComparisonResult(
        rows=rows, state_agreement=state_hits / n, value_agreement=value_hits / n
    )
