"""
Indicators, discretization and entry signals
============================================

Computes RSI/CCI/ATR over a synthetic price path, shows how indicator
readings map to observation bins and back, and walks the smoothed-cross
signal rules.
"""

import numpy as np

from chmmtrade import (
    CCI_DISCRETIZER,
    RSI_DISCRETIZER,
    OhlcBar,
    atr,
    bin_value,
    cci,
    discretize,
    generate_signal,
    rsi,
    sma,
    synthetic_ohlc,
)
from chmmtrade.cli import _default_sim_params

bars, _ = synthetic_ohlc(_default_sim_params(4, 8, seed=5), 120, seed=5, amplitude=0.004)
closes = np.array([b.close for b in bars])

r = rsi(closes, 4)
a = atr(bars, 12)
c = cci(bars, 4)
print("last five bars:")
for i in range(len(bars) - 5, len(bars)):
    print(f"  close={closes[i]:.5f}  rsi={r[i]:6.2f}  cci={c[i]:8.2f}  atr={a[i]:.5f}")

print("\nRSI readings discretize into 8 bins over [0, 100]:")
for value in (r[i] for i in range(len(bars) - 5, len(bars))):
    k = discretize(RSI_DISCRETIZER, value)
    print(f"  rsi {value:6.2f} -> bin {k} -> midpoint {bin_value(RSI_DISCRETIZER, k):.2f}")
print("CCI uses eight bins over [-140, 140]; reading 0 sits in bin",
      discretize(CCI_DISCRETIZER, 0.0))

print("\nsmoothed RSI with a forecast appended:")
history = [14.0, 9.0, 16.0, 18.0]
forecast = 43.75  # midpoint of a predicted bin
series = history + [forecast]
print("  previous window mean:", np.mean(history))
print("  current window mean: ", np.mean(series[1:]))
sig = generate_signal("rsi", series, 4, size_fraction=0.55)
print(f"  -> signal: {sig.side} (sized {sig.size_fraction:.2f} of notional)")

print("\nCCI rule fades strength: smoothed path 110 -> 95 crosses under 105:")
print("  ->", generate_signal("cci", [110.0, 95.0], 1).side)
print("same cross while already long is suppressed:")
print("  ->", generate_signal("cci", [110.0, 95.0], 1, open_sides={"long"}).side)

flat = [OhlcBar(b.timestamp, 1.0, 1.0, 1.0, 1.0) for b in bars[:30]]
print("\nflat market sanity: rsi=50, cci=0, atr=0 ->",
      rsi([1.0] * 10, 4)[-1], cci(flat, 4)[-1], atr(flat, 12)[-1])
print("sma of a constant series is that constant:", sma([7.0] * 6, 4)[-1])
