from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from chmmtrade import ChmmParams, ObservationSequence, OhlcBar

T0 = datetime(2013, 1, 1, tzinfo=timezone.utc)


def random_params(rng, n, m, low=0.2):
    """Row-stochastic parameters with interior entries (no zeros)."""

    def rows(shape, axis):
        raw = rng.uniform(low, 1.0, size=shape)
        return raw / raw.sum(axis=axis, keepdims=True)

    return ChmmParams(
        priors=rows((2, n), 1),
        trans=rows((2, 2, n, n), 3),
        emit=rows((2, n, m), 2),
        coupling=rows((2, 2), 0),
    )


def random_obs(rng, m, t_len):
    return ObservationSequence(rng.integers(0, m, size=(2, t_len)))


def bars_from_closes(closes, start_time=T0, bar_minutes=10):
    """Zero-wick bars: open = previous close, high/low = body ends."""
    bars = []
    prev = closes[0]
    for i, c in enumerate(closes):
        o = float(prev)
        c = float(c)
        bars.append(
            OhlcBar(
                timestamp=start_time + timedelta(minutes=bar_minutes * i),
                open=o,
                high=max(o, c),
                low=min(o, c),
                close=c,
            )
        )
        prev = c
    return bars


@pytest.fixture
def rng():
    return np.random.default_rng(20130610)
