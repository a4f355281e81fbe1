import numpy as np
import pytest
from numpy.testing import assert_allclose

from chmmtrade import (
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
from conftest import T0, bars_from_closes


def test_rsi_rising_closes_read_100():
    assert rsi([1, 2, 3, 4, 5, 6], 4)[-1] == 100.0


def test_rsi_falling_closes_read_0():
    assert rsi([6, 5, 4, 3, 2, 1], 4)[-1] == 0.0


def test_rsi_flat_closes_read_50():
    assert rsi([2, 2, 2, 2, 2], 4)[-1] == 50.0


def test_rsi_alternating_hand_value():
    # gains sum 2 and losses sum 2 over the window, so RSI = 50
    assert rsi([1, 2, 1, 2, 1], 4)[-1] == pytest.approx(50.0)


def test_rsi_warmup_is_nan_and_range_bounded(rng):
    closes = rng.uniform(1.0, 2.0, size=60)
    out = rsi(closes, 4)
    assert np.isnan(out[:4]).all()
    valid = out[4:]
    assert ((valid >= 0.0) & (valid <= 100.0)).all()


def test_rsi_insufficient_data():
    with pytest.raises(ValueError):
        rsi([1, 2, 3, 4], 4)


def test_sma_constant_and_pair():
    assert sma([3.0, 3.0, 3.0], 3)[-1] == 3.0
    assert sma([0.0, 100.0], 2)[-1] == 50.0
    assert_allclose(sma([1.0, 2.0, 3.0], 1), [1.0, 2.0, 3.0])


def test_sma_bounded_by_window_extremes(rng):
    series = rng.normal(size=50)
    out = sma(series, 5)
    for t in range(4, 50):
        window = series[t - 4: t + 1]
        assert window.min() <= out[t] <= window.max()


def test_cci_constant_bars_guard():
    bars = bars_from_closes(np.full(8, 5.0))
    assert cci(bars, 4)[-1] == 0.0


def test_cci_hand_value():
    # typical prices [1, 1, 1, 2]: SMA 1.25, MAD 0.375 -> CCI 133.33...
    bars = [OhlcBar(b.timestamp, v, v, v, v) for b, v in zip(bars_from_closes(np.ones(5)), [1, 1, 1, 2, 2])]
    assert cci(bars, 4)[3] == pytest.approx(0.75 / (0.015 * 0.375))


def test_cci_odd_symmetry(rng):
    closes = 10.0 + np.cumsum(rng.normal(scale=0.1, size=30))
    up = bars_from_closes(closes)
    down = bars_from_closes(20.0 - closes)  # mirrored prices
    a = cci(up, 4)
    b = cci(down, 4)
    assert_allclose(a[4:], -b[4:], atol=1e-9)


def test_true_range_gap_bar():
    bars = [
        OhlcBar(T0, 10.0, 10.0, 10.0, 10.0),
        OhlcBar(T0.replace(minute=10), 11.0, 11.0, 11.0, 11.0),
    ]
    assert true_range(bars)[1] == pytest.approx(1.0)


def test_atr_constant_range():
    # every bar moves by the same amount, so ATR equals that move
    bars = bars_from_closes(np.cumsum(np.full(8, 0.5)) + 10.0)
    assert atr(bars, 4)[-1] == pytest.approx(0.5)


def test_atr_hand_mean():
    closes = np.array([10.0, 11.0, 13.0, 16.0, 20.0])  # true ranges 1, 2, 3, 4
    bars = [OhlcBar(b.timestamp, c, c, c, c) for b, c in zip(bars_from_closes(closes), closes)]
    out = atr(bars, 4)
    assert out[-1] == pytest.approx(2.5)
    assert np.isnan(out[3])


def test_atr_nonnegative(rng):
    closes = 10.0 + np.cumsum(rng.normal(scale=0.3, size=40))
    bars = bars_from_closes(closes)
    out = atr(bars, 12)
    assert (out[12:] >= 0.0).all()


def test_discretize_footnote_intervals():
    d = Discretizer(0.0, 100.0, 4)
    assert discretize(d, 30.0) == 1
    assert discretize(d, 0.0) == 0
    assert discretize(d, 100.0) == 3  # upper bound maps into the top bin
    assert discretize(d, 250.0) == 3  # clamped
    assert discretize(d, -5.0) == 0


def test_discretize_cci_bounds():
    assert discretize(CCI_DISCRETIZER, 0.0) == 4


def test_discretize_monotone(rng):
    d = RSI_DISCRETIZER
    xs = np.sort(rng.uniform(-10.0, 110.0, size=200))
    bins = [discretize(d, x) for x in xs]
    assert all(b <= c for b, c in zip(bins, bins[1:]))


def test_bin_value_midpoints():
    d = Discretizer(0.0, 100.0, 8)
    assert bin_value(d, 0) == pytest.approx(6.25)
    assert bin_value(d, 7) == pytest.approx(93.75)
    assert bin_value(CCI_DISCRETIZER, 4) == pytest.approx(17.5)
    with pytest.raises(IndexError):
        bin_value(d, 8)


def test_discretize_of_bin_value_is_identity():
    for d in (RSI_DISCRETIZER, CCI_DISCRETIZER, Discretizer(-3.0, 7.0, 5)):
        for k in range(d.m):
            assert discretize(d, bin_value(d, k)) == k


def test_ohlc_bar_invariant():
    with pytest.raises(ValueError):
        OhlcBar(T0, open=1.0, high=0.9, low=0.8, close=1.0)
    with pytest.raises(ValueError):
        OhlcBar(T0, open=1.0, high=1.2, low=1.05, close=1.1)
