"""Forward likelihood recursion and coupled Viterbi decoding.

The forward pass propagates per-chain trellis mass where each step mixes
contributions from both chains' previous steps through the coupling
weights.  The decoder intentionally uses a different rule: per chain it
maximizes over pairs of source states scored by the plain product of the
two incoming transition rows, with no coupling weights, and only the
chain's own source state carries trellis mass forward.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ChmmParams, ObservationSequence, check_params

__all__ = ["ForwardTrellis", "ViterbiTrellis", "forward", "coupled_viterbi"]


@dataclass(frozen=True)
class ForwardTrellis:
    """Forward recursion output.

    ``alpha[c, t, j]`` is the trellis mass of chain ``c`` in state ``j``
    after observing the first ``t + 1`` symbols.  When ``scale_factors``
    is not None the stored alpha values are normalized per step and the
    likelihoods are only representable in log space.
    """

    alpha: np.ndarray                    # (2, T, N)
    per_chain_likelihood: np.ndarray     # (2,)
    joint_likelihood: float
    log_per_chain: np.ndarray            # (2,)
    log_joint: float
    scale_factors: np.ndarray | None = None  # (T,) per-step normalizers


@dataclass(frozen=True)
class ViterbiTrellis:
    """Decoder output for both chains.

    ``psi[c, t, k]`` stores the (i, j) source-state pair that maximized
    the score of landing on state ``k`` at step ``t``; backtracking
    follows the i component, the chain's own trellis index.  Scores are
    kept in log space with ``-inf`` marking impossible configurations.
    """

    log_delta: np.ndarray   # (2, T, N)
    psi: np.ndarray         # (2, T, N, 2) int64
    paths: np.ndarray       # (2, T) int64
    log_best: np.ndarray    # (2,)
    best_prob: np.ndarray   # (2,)


def _emission_lookup(params: ChmmParams, obs: ObservationSequence) -> np.ndarray:
    """bt[t, c, j] = emission probability of chain c's symbol at step t."""
    if int(obs.bins.max()) >= params.n_bins:
        raise ValueError(
            f"observation bin {int(obs.bins.max())} out of range for {params.n_bins} bins"
        )
    # emit is (2, N, M); take per-chain columns for each step.
    return np.stack(
        [params.emit[c][:, obs.bins[c]].T for c in range(2)], axis=1
    )  # (T, 2, N)


def forward(
    params: ChmmParams, obs: ObservationSequence, scale: bool = False, validate: bool = True
) -> ForwardTrellis:
    """Run the coupled forward recursion.

    With ``scale=False`` (default) alpha is raw probability mass, safe for
    the short windows this model is refit on.  With ``scale=True`` each
    step is normalized by the total mass of both chains and the factors
    are retained, so arbitrarily long sequences stay in range and the
    likelihood is recoverable through ``log_per_chain`` / ``log_joint``.
    ``validate=False`` skips the simplex checks, needed when evaluating
    the likelihood at raw off-simplex points for numerical differencing.
    """
    if validate:
        check_params(params)
    n = params.n_states
    t_len = obs.length
    bt = _emission_lookup(params, obs)  # (T, 2, N)

    alpha = np.empty((2, t_len, n))
    scales = np.ones(t_len) if scale else None

    step = params.priors * bt[0]  # (2, N)
    if scale:
        s = step.sum()
        if s > 0.0:
            step = step / s
            scales[0] = s
    alpha[:, 0] = step

    for t in range(1, t_len):
        # mass[c, j] = sum_{c', i} coupling[c', c] * trans[c', c, i, j] * alpha[c', t-1, i]
        mass = np.einsum("ac,acij,ai->cj", params.coupling, params.trans, alpha[:, t - 1])
        step = mass * bt[t]
        if scale:
            s = step.sum()
            if s > 0.0:
                step = step / s
                scales[t] = s
        alpha[:, t] = step

    tail = alpha[:, -1].sum(axis=1)  # (2,)
    with np.errstate(divide="ignore"):
        if scale:
            log_total = float(np.log(scales).sum())
            log_pc = np.log(tail) + log_total
        else:
            log_pc = np.log(tail)
    log_joint = float(log_pc.sum())
    with np.errstate(over="ignore"):
        per_chain = np.exp(log_pc) if scale else tail
        joint = float(np.exp(log_joint)) if scale else float(tail[0] * tail[1])

    alpha.setflags(write=False)
    if scales is not None:
        scales.setflags(write=False)
    return ForwardTrellis(
        alpha=alpha,
        per_chain_likelihood=per_chain,
        joint_likelihood=joint,
        log_per_chain=log_pc,
        log_joint=log_joint,
        scale_factors=scales,
    )


def coupled_viterbi(params: ChmmParams, obs: ObservationSequence) -> ViterbiTrellis:
    """Decode the best state path of each chain.

    Recursion per chain c and target state k:

        delta_t(k) = max_{i,j} [delta_{t-1}(i) + log a1[i, k] + log a2[j, k]] + log b_k(o_t)

    where a1, a2 are the two transition matrices pointing into chain c
    and i indexes the chain's own previous state.  All argmax operations
    break ties toward the lowest index (row-major over (i, j) pairs), so
    decoding is deterministic across platforms.
    """
    check_params(params)
    n = params.n_states
    t_len = obs.length
    with np.errstate(divide="ignore"):
        log_a = np.log(params.trans)    # (2, 2, N, N)
        log_pi = np.log(params.priors)  # (2, N)
        log_bt = np.log(_emission_lookup(params, obs))  # (T, 2, N)

    log_delta = np.empty((2, t_len, n))
    psi = np.zeros((2, t_len, n, 2), dtype=np.int64)
    log_delta[:, 0] = log_pi + log_bt[0]

    for t in range(1, t_len):
        for c in range(2):
            partial = log_delta[c, t - 1][:, None] + log_a[0, c]        # (i, k)
            scores = partial[:, None, :] + log_a[1, c][None, :, :]      # (i, j, k)
            flat = scores.reshape(n * n, n)
            best = np.argmax(flat, axis=0)                              # first max: lowest (i, j)
            log_delta[c, t] = flat[best, np.arange(n)] + log_bt[t, c]
            psi[c, t, :, 0] = best // n
            psi[c, t, :, 1] = best % n

    paths = np.zeros((2, t_len), dtype=np.int64)
    log_best = np.empty(2)
    for c in range(2):
        q = int(np.argmax(log_delta[c, -1]))
        log_best[c] = log_delta[c, -1, q]
        paths[c, -1] = q
        for t in range(t_len - 2, -1, -1):
            q = int(psi[c, t + 1, q, 0])
            paths[c, t] = q

    for arr in (log_delta, psi, paths, log_best):
        arr.setflags(write=False)
    with np.errstate(over="ignore"):
        best_prob = np.exp(log_best)
    best_prob.setflags(write=False)
    return ViterbiTrellis(
        log_delta=log_delta, psi=psi, paths=paths, log_best=log_best, best_prob=best_prob
    )
