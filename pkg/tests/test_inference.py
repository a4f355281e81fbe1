import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from chmmtrade import (
    ChmmParams,
    ObservationSequence,
    brute_likelihood,
    brute_viterbi,
    coupled_viterbi,
    forward,
    uniform_params,
)
from conftest import random_obs, random_params


def test_forward_single_step_base_case(rng):
    p = random_params(rng, 3, 4)
    obs = ObservationSequence.from_lists([2], [1])
    trellis = forward(p, obs)
    for c, o in ((0, 2), (1, 1)):
        assert_allclose(trellis.alpha[c, 0], p.priors[c] * p.emit[c, :, o])
    assert_allclose(trellis.per_chain_likelihood, trellis.alpha[:, 0].sum(axis=1))
    assert trellis.joint_likelihood == pytest.approx(
        trellis.per_chain_likelihood[0] * trellis.per_chain_likelihood[1]
    )


def test_forward_uniform_model_gives_bin_probability_power():
    p = uniform_params(2, 2)
    obs = ObservationSequence.from_lists([0, 1, 0], [1, 0, 1])
    trellis = forward(p, obs)
    assert_allclose(trellis.per_chain_likelihood, [1 / 8, 1 / 8])
    assert trellis.joint_likelihood == pytest.approx(1 / 64)


def test_forward_matches_brute_enumeration(rng):
    for _ in range(40):
        n = int(rng.integers(1, 4))
        m = int(rng.integers(2, 4))
        t_len = int(rng.integers(1, 5))
        p = random_params(rng, n, m)
        obs = random_obs(rng, m, t_len)
        trellis = forward(p, obs)
        p1, p2, joint = brute_likelihood(p, obs)
        assert_allclose(trellis.per_chain_likelihood, [p1, p2], rtol=1e-10)
        assert_allclose(trellis.joint_likelihood, joint, rtol=1e-10)


def test_forward_rejects_out_of_range_bins(rng):
    p = random_params(rng, 2, 3)
    obs = ObservationSequence.from_lists([0, 3], [0, 1])
    with pytest.raises(ValueError, match="bin"):
        forward(p, obs)


def test_forward_scaled_matches_linear(rng):
    p = random_params(rng, 3, 3)
    obs = random_obs(rng, 3, 4)
    lin = forward(p, obs)
    sc = forward(p, obs, scale=True)
    assert sc.scale_factors is not None
    assert_allclose(sc.log_per_chain, lin.log_per_chain, rtol=1e-12)
    assert_allclose(sc.per_chain_likelihood, lin.per_chain_likelihood, rtol=1e-12)
    # scaled alpha recovers raw alpha through the cumulative factors
    cum = np.cumprod(sc.scale_factors)
    assert_allclose(sc.alpha * cum[None, :, None], lin.alpha, rtol=1e-12)


def test_forward_scaled_survives_long_sequences(rng):
    p = random_params(rng, 3, 4)
    obs = random_obs(rng, 4, 3000)
    trellis = forward(p, obs, scale=True)
    assert np.isfinite(trellis.log_per_chain).all()
    assert trellis.log_joint < -3000  # far below linear-space underflow


def test_forward_zero_probability_emissions_are_permitted():
    base = uniform_params(2, 2)
    emit = np.array([[[1.0, 0.0], [1.0, 0.0]], [[0.5, 0.5], [0.5, 0.5]]])
    p = ChmmParams(priors=base.priors, trans=base.trans, emit=emit, coupling=base.coupling)

    # An impossible symbol at the final step zeroes that chain's tail mass.
    obs = ObservationSequence.from_lists([0, 1], [0, 0])
    trellis = forward(p, obs)
    assert trellis.per_chain_likelihood[0] == 0.0
    assert trellis.log_per_chain[0] == -np.inf
    assert trellis.log_joint == -np.inf

    # Earlier in the sequence the cross-chain mixing revives the trellis;
    # the brute enumeration agrees with the recursion on the exact value.
    obs = ObservationSequence.from_lists([1, 0], [0, 0])
    trellis = forward(p, obs)
    p1, p2, _ = brute_likelihood(p, obs)
    assert trellis.per_chain_likelihood[0] == pytest.approx(p1, rel=1e-12)
    assert p1 > 0.0


def test_viterbi_single_state_path():
    p = ChmmParams(
        priors=np.ones((2, 1)),
        trans=np.ones((2, 2, 1, 1)),
        emit=np.tile([[0.5, 0.3, 0.2]], (2, 1, 1)),
        coupling=np.full((2, 2), 0.5),
    )
    obs = ObservationSequence.from_lists([0, 1, 2], [2, 1, 0])
    vt = coupled_viterbi(p, obs)
    assert_array_equal(vt.paths, np.zeros((2, 3)))
    for c in range(2):
        expected = np.prod([p.emit[c, 0, o] for o in obs.bins[c]])
        assert vt.best_prob[c] == pytest.approx(expected, rel=1e-12)


def test_viterbi_absorbing_chain_stays_put():
    n = 3
    eye = np.eye(n)
    priors = np.zeros((2, n))
    priors[0, 2] = 1.0
    priors[1, 1] = 1.0
    p = ChmmParams(
        priors=priors,
        trans=np.broadcast_to(eye, (2, 2, n, n)).copy(),
        emit=np.full((2, n, 2), 0.5),
        coupling=np.full((2, 2), 0.5),
    )
    obs = ObservationSequence.from_lists([0, 1, 0, 1], [1, 0, 1, 0])
    vt = coupled_viterbi(p, obs)
    assert_array_equal(vt.paths[0], [2, 2, 2, 2])
    assert_array_equal(vt.paths[1], [1, 1, 1, 1])


def test_viterbi_matches_exhaustive_search(rng):
    from chmmtrade.oracle import score_path

    for _ in range(40):
        n = int(rng.integers(1, 4))
        m = int(rng.integers(2, 4))
        t_len = int(rng.integers(1, 5))
        p = random_params(rng, n, m)
        obs = random_obs(rng, m, t_len)
        vt = coupled_viterbi(p, obs)
        paths, scores = brute_viterbi(p, obs)
        assert_array_equal(vt.log_best, scores)  # bit-exact under shared tie-break
        for c in range(2):
            if not np.array_equal(vt.paths[c], paths[c]):
                # legitimate only on an exact score tie (rounding collapse)
                assert score_path(p, obs, c, vt.paths[c]) == scores[c]


def test_viterbi_permutation_equivariance(rng):
    for _ in range(10):
        n = int(rng.integers(2, 4))
        p = random_params(rng, n, 3)
        obs = random_obs(rng, 3, 4)
        sigma = rng.permutation(n)
        relabeled = ChmmParams(
            priors=p.priors[:, sigma],
            trans=p.trans[:, :, sigma][:, :, :, sigma],
            emit=p.emit[:, sigma],
            coupling=p.coupling,
        )
        vt = coupled_viterbi(p, obs)
        vt2 = coupled_viterbi(relabeled, obs)
        assert_array_equal(sigma[vt2.paths], vt.paths)


def test_viterbi_handles_zero_transitions():
    # hard zeros become -inf scores; decoding must stay NaN-free
    trans = np.zeros((2, 2, 2, 2))
    trans[:, :, :, 0] = 1.0
    p = ChmmParams(
        priors=np.full((2, 2), 0.5),
        trans=trans,
        emit=np.full((2, 2, 3), 1 / 3),
        coupling=np.full((2, 2), 0.5),
    )
    obs = ObservationSequence.from_lists([0, 1, 2], [2, 1, 0])
    vt = coupled_viterbi(p, obs)
    assert not np.isnan(vt.log_delta).any()
    assert_array_equal(vt.paths[:, 1:], np.zeros((2, 2)))


def test_viterbi_psi_stores_maximizing_pairs(rng):
    p = random_params(rng, 3, 3)
    obs = random_obs(rng, 3, 4)
    vt = coupled_viterbi(p, obs)
    log_a = np.log(p.trans)
    for c in range(2):
        for t in range(1, obs.length):
            for k in range(3):
                scores = vt.log_delta[c, t - 1][:, None] + log_a[0, c][:, k][:, None] + log_a[1, c][:, k][None, :]
                i, j = vt.psi[c, t, k]
                assert scores[i, j] == scores.max()
