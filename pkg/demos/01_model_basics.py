"""
Coupled-chain model basics
==========================

Builds a small two-chain model, runs the forward recursion and the
coupled Viterbi decoder, and cross-checks both against brute-force
enumeration.
"""

import numpy as np

from chmmtrade import (
    ChmmParams,
    ObservationSequence,
    brute_likelihood,
    brute_viterbi,
    coupled_viterbi,
    forward,
    joint_transition,
    validate_params,
)

# Two chains, three states each, four observation bins.  Chain 1 is mostly
# self-driven; chain 2 listens to chain 1 with weight 0.7.
params = ChmmParams(
    priors=[[0.6, 0.3, 0.1], [0.2, 0.5, 0.3]],
    trans=[
        [  # rows: source chain 1
            [[0.7, 0.2, 0.1], [0.1, 0.8, 0.1], [0.2, 0.3, 0.5]],  # into chain 1
            [[0.5, 0.4, 0.1], [0.2, 0.6, 0.2], [0.1, 0.2, 0.7]],  # into chain 2
        ],
        [  # rows: source chain 2
            [[0.6, 0.3, 0.1], [0.3, 0.4, 0.3], [0.1, 0.1, 0.8]],
            [[0.8, 0.1, 0.1], [0.1, 0.7, 0.2], [0.3, 0.3, 0.4]],
        ],
    ],
    emit=[
        [[0.7, 0.2, 0.05, 0.05], [0.1, 0.6, 0.2, 0.1], [0.05, 0.1, 0.25, 0.6]],
        [[0.6, 0.3, 0.05, 0.05], [0.2, 0.5, 0.2, 0.1], [0.1, 0.1, 0.2, 0.6]],
    ],
    coupling=[[0.9, 0.7], [0.1, 0.3]],
)
print("validation issues:", validate_params(params) or "none")

print("\njoint transition law out of (state 1, state 2):")
for j in range(3):
    print(f"  P(chain 1 -> {j}) = {joint_transition(params, 0, 1, 2, j):.4f}")
print("  (rows always sum to one)")

obs = ObservationSequence.from_lists([0, 1, 3, 2], [1, 0, 2, 3])
trellis = forward(params, obs)
p1, p2, joint = brute_likelihood(params, obs)
print("\nforward likelihoods per chain:", trellis.per_chain_likelihood)
print("brute-force enumeration:       ", np.array([p1, p2]))
print(f"joint likelihood {trellis.joint_likelihood:.3e} (relative gap "
      f"{abs(trellis.joint_likelihood - joint) / joint:.1e})")

vt = coupled_viterbi(params, obs)
paths, scores = brute_viterbi(params, obs)
print("\ndecoded state paths:")
print("  chain 1:", vt.paths[0], " chain 2:", vt.paths[1])
print("exhaustive best paths:")
print("  chain 1:", paths[0], " chain 2:", paths[1])
print("log scores decoder vs exhaustive:", vt.log_best, scores)

# Long sequences stay finite with per-step scaling.
long_obs = ObservationSequence(np.random.default_rng(0).integers(0, 4, size=(2, 2000)))
scaled = forward(params, long_obs, scale=True)
print("\n2000-step log likelihood via scaled forward:", scaled.log_joint)
