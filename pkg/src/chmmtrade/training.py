"""Likelihood gradients and multiplicative re-estimation.

The joint likelihood is a polynomial with non-negative coefficients in
every parameter entry, so its exact partial derivatives propagate through
the same linear recursion as the forward trellis, with one source term
per parameter family.  Re-estimation is the Baum-Eagon growth transform
``w <- w * dP/dw / normalizer`` applied per simplex row, which never
decreases the likelihood.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .inference import ForwardTrellis, _emission_lookup
from .model import ChmmParams, ObservationSequence, check_params

__all__ = [
    "DegenerateModelError",
    "GradientSet",
    "AlphaGradients",
    "FitConfig",
    "FitResult",
    "alpha_gradients",
    "likelihood_gradient",
    "reestimate",
    "fit",
]


class DegenerateModelError(RuntimeError):
    """One chain assigns zero likelihood to its observations."""


@dataclass(frozen=True)
class GradientSet:
    """Partial derivatives of the joint likelihood for every parameter.

    When computed with per-step scaling all entries share a single
    positive factor ``exp(log_scale)``; the multiplicative update is
    invariant to it, so re-estimation can consume scaled gradients from
    arbitrarily long sequences.
    """

    d_priors: np.ndarray    # (2, N)
    d_trans: np.ndarray     # (2, 2, N, N)
    d_emit: np.ndarray      # (2, N, M)
    d_coupling: np.ndarray  # (2, 2)
    log_scale: float = 0.0


@dataclass(frozen=True)
class AlphaGradients:
    """Trellis derivatives d alpha_t(c, j) / d w for all parameters w.

    The leading axes of each array are (t, chain, state); trailing axes
    index the parameter the derivative is taken in.
    """

    d_priors: np.ndarray    # (T, 2, N, 2, N)
    d_trans: np.ndarray     # (T, 2, N, 2, 2, N, N)
    d_emit: np.ndarray      # (T, 2, N, 2, N, M)
    d_coupling: np.ndarray  # (T, 2, N, 2, 2)
    trellis: ForwardTrellis


def _one_hot_obs(obs: ObservationSequence, n_bins: int) -> np.ndarray:
    hot = np.zeros((obs.length, 2, n_bins))
    for c in range(2):
        hot[np.arange(obs.length), c, obs.bins[c]] = 1.0
    return hot


def _gradient_pass(params: ChmmParams, obs: ObservationSequence, scale: bool, keep_history: bool):
    """Shared forward + derivative sweep.

    Returns (trellis, final derivative arrays, per-family history or None).
    With ``scale=True`` the trellis and every derivative are divided by
    the same per-step normalizer, keeping long products representable;
    the derivatives then carry the squared cumulative factor relative to
    their true values (the likelihood carries it once per chain).
    """
    check_params(params)
    n, m = params.n_states, params.n_bins
    t_len = obs.length
    bt = _emission_lookup(params, obs)          # (T, 2, N)
    hot = _one_hot_obs(obs, m)                  # (T, 2, M)
    eye2 = np.eye(2)
    eyen = np.eye(n)

    alpha = np.empty((2, t_len, n))
    scales = np.ones(t_len)

    d_pi = np.einsum("pa,qi,pq->pqai", eye2, eyen, bt[0])
    d_a = np.zeros((2, n, 2, 2, n, n))
    d_b = np.einsum("pa,qj,pk,pq->pqajk", eye2, eyen, hot[0], params.priors)
    d_th = np.zeros((2, n, 2, 2))

    step = params.priors * bt[0]
    if scale:
        s = step.sum()
        if s > 0.0:
            step = step / s
            d_pi = d_pi / s
            d_b = d_b / s
            scales[0] = s
    alpha[:, 0] = step

    history = ([d_pi], [d_a], [d_b], [d_th]) if keep_history else None

    for t in range(1, t_len):
        aprev = alpha[:, t - 1]
        z = params.coupling[:, :, None, None] * params.trans * bt[t][None, :, None, :]

        new_pi = np.einsum("acij,ai...->cj...", z, d_pi)
        new_a = np.einsum("acij,ai...->cj...", z, d_a)
        new_b = np.einsum("acij,ai...->cj...", z, d_b)
        new_th = np.einsum("acij,ai...->cj...", z, d_th)

        # Direct terms: derivative of this step's own factors.
        core_a = np.einsum("ac,cj,ai->acij", params.coupling, bt[t], aprev)
        new_a += np.einsum("pc,qj,acij->pqacij", eye2, eyen, core_a)
        mass = np.einsum("ac,acij,ai->cj", params.coupling, params.trans, aprev)
        new_b += np.einsum("pc,qj,ck,cj->pqcjk", eye2, eyen, hot[t], mass)
        core_th = np.einsum("acij,ai->acj", params.trans, aprev) * bt[t][None, :, :]
        new_th += np.einsum("pc,acj->pjac", eye2, core_th)

        step = mass * bt[t]
        if scale:
            s = step.sum()
            if s > 0.0:
                step = step / s
                new_pi = new_pi / s
                new_a = new_a / s
                new_b = new_b / s
                new_th = new_th / s
                scales[t] = s
        alpha[:, t] = step
        d_pi, d_a, d_b, d_th = new_pi, new_a, new_b, new_th
        if keep_history:
            for hist, arr in zip(history, (d_pi, d_a, d_b, d_th)):
                hist.append(arr)

    tail = alpha[:, -1].sum(axis=1)
    with np.errstate(divide="ignore"):
        log_scales = np.log(scales) if scale else np.zeros(t_len)
        log_pc = np.log(tail) + log_scales.sum()
    log_joint = float(log_pc.sum())
    with np.errstate(over="ignore"):
        per_chain = np.exp(log_pc) if scale else tail
        joint = float(np.exp(log_joint)) if scale else float(tail[0] * tail[1])
    alpha.setflags(write=False)
    trellis = ForwardTrellis(
        alpha=alpha,
        per_chain_likelihood=per_chain,
        joint_likelihood=joint,
        log_per_chain=log_pc,
        log_joint=log_joint,
        scale_factors=scales if scale else None,
    )
    finals = (d_pi, d_a, d_b, d_th)
    stacked = tuple(np.stack(h) for h in history) if keep_history else None
    return trellis, tail, float(log_scales.sum()), finals, stacked


def alpha_gradients(params: ChmmParams, obs: ObservationSequence, scale: bool = False) -> AlphaGradients:
    """Full trellis derivative history for all four parameter families."""
    trellis, _, _, _, stacked = _gradient_pass(params, obs, scale=scale, keep_history=True)
    d_pi, d_a, d_b, d_th = stacked
    return AlphaGradients(d_priors=d_pi, d_trans=d_a, d_emit=d_b, d_coupling=d_th, trellis=trellis)


def _assemble(trellis_tail: np.ndarray, log_total: float, finals) -> GradientSet:
    if not (trellis_tail > 0.0).all():
        raise DegenerateModelError(
            f"zero likelihood: per-chain trellis mass {trellis_tail.tolist()}"
        )
    weights = trellis_tail[::-1].copy()  # dP/dw weighs each chain by the other's mass
    parts = [np.einsum("c,cj...->...", weights, d) for d in finals]
    return GradientSet(
        d_priors=parts[0],
        d_trans=parts[1],
        d_emit=parts[2],
        d_coupling=parts[3],
        log_scale=2.0 * log_total,
    )


def likelihood_gradient(params: ChmmParams, obs: ObservationSequence, scale: bool = False) -> GradientSet:
    """Exact gradient of the joint likelihood in every raw parameter.

    Raises DegenerateModelError when either chain assigns probability
    zero to its observation sequence.
    """
    _, tail, log_total, finals, _ = _gradient_pass(params, obs, scale=scale, keep_history=False)
    return _assemble(tail, log_total, finals)


def _simplex_update(w: np.ndarray, g: np.ndarray, axis: int) -> np.ndarray:
    """Growth-transform update of one family; zero-gradient rows freeze."""
    num = w * g
    denom = num.sum(axis=axis, keepdims=True)
    safe = np.where(denom > 0.0, denom, 1.0)
    return np.where(denom > 0.0, num / safe, w)


def reestimate(params: ChmmParams, grads: GradientSet) -> ChmmParams:
    """One multiplicative re-estimation step; the input is not mutated.

    Each simplex row moves to ``w * g / sum(w * g)``.  Rows whose
    normalizer vanishes (the likelihood does not depend on them) keep
    their previous values, the unique continuous completion.
    """
    return ChmmParams(
        priors=_simplex_update(np.asarray(params.priors), grads.d_priors, axis=1),
        trans=_simplex_update(np.asarray(params.trans), grads.d_trans, axis=3),
        emit=_simplex_update(np.asarray(params.emit), grads.d_emit, axis=2),
        coupling=_simplex_update(np.asarray(params.coupling), grads.d_coupling, axis=0),
    )


@dataclass(frozen=True)
class FitConfig:
    """Knobs for the sweep loop.

    sweeps: update passes per fit; rel_tol: smallest relative likelihood
    improvement worth keeping; warm_start: seed each sliding-window fit
    from the previous window's result; seed: initialization jitter seed.
    """

    sweeps: int = 3
    rel_tol: float = 1e-6
    warm_start: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        if not self.rel_tol >= 0.0:
            raise ValueError("rel_tol must be >= 0")


@dataclass(frozen=True)
class FitResult:
    params: ChmmParams
    log_likelihoods: list[float]  # natural log of the joint likelihood per accepted state
    sweeps_run: int


def fit(params0: ChmmParams, obs: ObservationSequence, cfg: FitConfig = FitConfig()) -> FitResult:
    """Run up to ``cfg.sweeps`` gradient + re-estimation passes.

    A candidate whose relative likelihood improvement falls below
    ``cfg.rel_tol`` is rejected and the loop stops, so the returned trace
    is strictly the accepted states and is non-decreasing.  Deterministic:
    identical inputs give bit-identical parameters.
    """
    trellis, tail, log_total, finals, _ = _gradient_pass(params0, obs, scale=True, keep_history=False)
    grads = _assemble(tail, log_total, finals)
    params = params0
    log_p = trellis.log_joint
    trace = [log_p]
    sweeps_run = 0
    for _ in range(cfg.sweeps):
        cand = reestimate(params, grads)
        trellis, tail, log_total, finals, _ = _gradient_pass(cand, obs, scale=True, keep_history=False)
        cand_grads = _assemble(tail, log_total, finals)
        cand_log_p = trellis.log_joint
        # Relative improvement below rel_tol, compared in log space so huge
        # likelihood jumps cannot overflow: P1/P0 - 1 < tol  <=>  log P1 - log P0 < log1p(tol).
        if cand_log_p - log_p < math.log1p(cfg.rel_tol):
            break
        params, grads, log_p = cand, cand_grads, cand_log_p
        trace.append(log_p)
        sweeps_run += 1
    return FitResult(params=params, log_likelihoods=trace, sweeps_run=sweeps_run)
