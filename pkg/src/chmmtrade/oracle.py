"""Brute-force references and generators used for verification.

Everything here recomputes model quantities by exhaustive enumeration or
numerical differencing, sharing no code with the recursive
implementations, so tests can cross-check the two routes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from datetime import datetime, timedelta, timezone

import numpy as np

from .indicators import Discretizer, OhlcBar, bin_value
from .model import ChmmParams, ObservationSequence, check_params

__all__ = [
    "SampledPaths",
    "sample_chmm",
    "brute_likelihood",
    "brute_viterbi",
    "score_path",
    "fd_gradient",
    "synthetic_ohlc",
    "permutation_aligned_mae",
]

MAX_ENUM_PATHS = 4096


@dataclass(frozen=True)
class SampledPaths:
    """Seeded draw from the generative model: states plus observations."""

    states: np.ndarray  # (2, T) int64
    observations: ObservationSequence
    seed: object


def sample_chmm(params: ChmmParams, length: int, seed=0) -> SampledPaths:
    """Sample hidden paths and observations.

    The first states come from the priors; afterwards each chain's state
    is drawn from the coupling-weighted blend of the two transition rows
    selected by both chains' previous states.  Observations are drawn
    from the emission row of the current state.
    """
    check_params(params)
    if length < 1:
        raise ValueError("length must be >= 1")
    rng = np.random.default_rng(seed)
    n, m = params.n_states, params.n_bins
    states = np.zeros((2, length), dtype=np.int64)
    obs = np.zeros((2, length), dtype=np.int64)

    for c in range(2):
        states[c, 0] = rng.choice(n, p=params.priors[c])
    for c in range(2):
        obs[c, 0] = rng.choice(m, p=params.emit[c, states[c, 0]])
    for t in range(1, length):
        prev = states[:, t - 1]
        for c in range(2):
            row = (
                params.coupling[0, c] * params.trans[0, c][prev[0]]
                + params.coupling[1, c] * params.trans[1, c][prev[1]]
            )
            states[c, t] = rng.choice(n, p=row)
        for c in range(2):
            obs[c, t] = rng.choice(m, p=params.emit[c, states[c, t]])

    states.setflags(write=False)
    return SampledPaths(
        states=states,
        observations=ObservationSequence(obs),
        seed=seed,
    )


def _guard_size(params: ChmmParams, obs: ObservationSequence) -> None:
    if params.n_states ** obs.length > MAX_ENUM_PATHS:
        raise ValueError(
            f"instance too large to enumerate: N^T = {params.n_states ** obs.length} > {MAX_ENUM_PATHS}"
        )


def brute_likelihood(params: ChmmParams, obs: ObservationSequence):
    """Exhaustive expansion of the forward recursion.

    Unrolling the recursion, each summand picks a source chain at every
    step, so the total is a sum over chain-assignment sequences ending at
    the target chain and over all state sequences along those chains.
    Returns ``(P1, P2, P)`` with ``P = P1 * P2``.
    """
    check_params(params)
    _guard_size(params, obs)
    n = params.n_states
    t_len = obs.length
    bins = obs.bins
    per_chain = np.zeros(2)

    for c in range(2):
        total = 0.0
        for gamma_head in itertools.product(range(2), repeat=t_len - 1):
            gamma = (*gamma_head, c)
            for xs in itertools.product(range(n), repeat=t_len):
                g0 = gamma[0]
                term = params.priors[g0, xs[0]] * params.emit[g0, xs[0], bins[g0, 0]]
                for t in range(1, t_len):
                    gp, gc = gamma[t - 1], gamma[t]
                    term *= (
                        params.coupling[gp, gc]
                        * params.trans[gp, gc][xs[t - 1], xs[t]]
                        * params.emit[gc, xs[t], bins[gc, t]]
                    )
                total += term
        per_chain[c] = total
    return float(per_chain[0]), float(per_chain[1]), float(per_chain[0] * per_chain[1])


def score_path(params: ChmmParams, obs: ObservationSequence, chain: int, path) -> float:
    """Log score of one chain's state path under the decoder's rule.

    Uses the same accumulation order as the dynamic program, so a decoded
    path scores bit-identically.  Distinct paths can collapse to the same
    float score (addition rounds), which is why decoders and exhaustive
    search may legitimately disagree on the argmax while agreeing on the
    score.
    """
    with np.errstate(divide="ignore"):
        log_a = np.log(params.trans)
        log_pi = np.log(params.priors)
        log_b = np.log(params.emit)
    free = log_a[1, chain].max(axis=0)
    bins = obs.bins
    s = log_pi[chain, path[0]] + log_b[chain, path[0], bins[chain, 0]]
    for t in range(1, obs.length):
        s = ((s + log_a[0, chain][path[t - 1], path[t]]) + free[path[t]]) + log_b[
            chain, path[t], bins[chain, t]
        ]
    return float(s)


def brute_viterbi(params: ChmmParams, obs: ObservationSequence):
    """Exhaustive best-path search under the decoder's scoring rule.

    For each chain the score of a candidate path is accumulated in log
    space exactly as the dynamic program would: own-chain transition term,
    then the best free choice of the other matrix's source row, then the
    emission term.  Among equal-scoring paths the one with the smallest
    states reading backwards from the end wins, matching the decoder's
    lowest-index tie-breaks.  Returns ``(paths, log_scores)``.
    """
    check_params(params)
    _guard_size(params, obs)
    n = params.n_states
    t_len = obs.length
    bins = obs.bins
    with np.errstate(divide="ignore"):
        log_a = np.log(params.trans)
        log_pi = np.log(params.priors)
        log_b = np.log(params.emit)
    paths = np.zeros((2, t_len), dtype=np.int64)
    log_scores = np.empty(2)

    for c in range(2):
        # Free maximization over the secondary matrix's source state.
        free = log_a[1, c].max(axis=0)  # (k,)
        best_score = -np.inf
        best_path = None
        for q in itertools.product(range(n), repeat=t_len):
            s = log_pi[c, q[0]] + log_b[c, q[0], bins[c, 0]]
            for t in range(1, t_len):
                s = ((s + log_a[0, c][q[t - 1], q[t]]) + free[q[t]]) + log_b[c, q[t], bins[c, t]]
            if best_path is None or s > best_score or (
                s == best_score and tuple(reversed(q)) < tuple(reversed(best_path))
            ):
                best_score = s
                best_path = q
        paths[c] = best_path
        log_scores[c] = best_score
    paths.setflags(write=False)
    return paths, log_scores


_FAMILIES = ("priors", "trans", "emit", "coupling")


def perturbed(params: ChmmParams, family: str, index, delta: float) -> ChmmParams:
    """Copy of ``params`` with one raw entry shifted by ``delta``.

    No renormalization is applied: the likelihood's partial derivatives
    treat every entry as a free variable, so the matching numerical
    derivative must perturb entries without projecting back onto the
    simplex.
    """
    if family not in _FAMILIES:
        raise ValueError(f"unknown parameter family {family!r}")
    arr = np.array(getattr(params, family))
    arr[index] += delta
    return replace(params, **{family: arr})


def fd_gradient(
    params: ChmmParams,
    obs: ObservationSequence,
    family: str,
    index,
    h: float = 1e-6,
) -> float:
    """Central finite difference of the joint likelihood in one raw entry."""
    if h <= 0.0:
        raise ValueError("h must be positive")
    if family not in _FAMILIES:
        raise ValueError(f"unknown parameter family {family!r}")
    w = float(np.asarray(getattr(params, family))[index])
    if not (0.0 <= w - h and w + h <= 1.0):
        raise ValueError(f"perturbation leaves [0, 1]: {family}[{index}] = {w} with h = {h}")
    from .inference import forward

    up = forward(perturbed(params, family, index, +h), obs, validate=False).joint_likelihood
    down = forward(perturbed(params, family, index, -h), obs, validate=False).joint_likelihood
    return (up - down) / (2.0 * h)


def permutation_aligned_mae(true_params: ChmmParams, fitted: ChmmParams) -> float:
    """Mean absolute error of the four transition matrices under the best
    independent relabeling of each chain's states."""
    n = true_params.n_states
    if fitted.n_states != n:
        raise ValueError("state counts differ")
    best = np.inf
    for perm1 in itertools.permutations(range(n)):
        for perm2 in itertools.permutations(range(n)):
            perms = (list(perm1), list(perm2))
            err = 0.0
            for cp in range(2):
                for c in range(2):
                    remapped = fitted.trans[cp, c][np.ix_(perms[cp], perms[c])]
                    err += np.abs(remapped - true_params.trans[cp, c]).sum()
            best = min(best, err / (4 * n * n))
    return float(best)


def synthetic_ohlc(
    params: ChmmParams,
    n_bars: int,
    seed=0,
    *,
    start_prices: tuple[float, float] = (0.95, 1600.0),
    start_time: datetime | None = None,
    bar_minutes: int = 10,
    amplitude: float = 0.002,
    value_range: tuple[float, float] = (0.0, 100.0),
) -> tuple[list[OhlcBar], list[OhlcBar]]:
    """Turn sampled observations into two aligned synthetic OHLC series.

    Each sampled bin maps to its midpoint in ``value_range``; the signed
    distance from the range center scales a per-bar close-to-close
    return of at most ``amplitude``.  Wicks are small seeded extensions
    beyond the open/close body, so every bar satisfies the OHLC
    invariant.  Deterministic for a fixed seed.
    """
    draw = sample_chmm(params, n_bars, seed=seed)
    rng = np.random.default_rng((seed, 7))
    disc = Discretizer(value_range[0], value_range[1], params.n_bins)
    center = 0.5 * (value_range[0] + value_range[1])
    halfspan = 0.5 * (value_range[1] - value_range[0])
    t0 = start_time or datetime(2013, 1, 1, tzinfo=timezone.utc)

    series: list[list[OhlcBar]] = [[], []]
    for c in range(2):
        price = start_prices[c]
        for t in range(n_bars):
            value = bin_value(disc, int(draw.observations.bins[c, t]))
            ret = amplitude * (value - center) / halfspan
            open_ = price
            close = price * (1.0 + ret)
            body_hi = max(open_, close)
            body_lo = min(open_, close)
            wick = rng.uniform(0.0, 0.25 * amplitude, size=2)
            series[c].append(
                OhlcBar(
                    timestamp=t0 + timedelta(minutes=bar_minutes * t),
                    open=open_,
                    high=body_hi * (1.0 + wick[0]),
                    low=body_lo * (1.0 - wick[1]),
                    close=close,
                )
            )
            price = close
    return series[0], series[1]
