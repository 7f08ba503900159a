"""Forward-backward on a tiny chain, checked against brute force.

Run: python3 demos/01_chain_inference.py
"""
import numpy as np

from boostcrf import build_feature_set, brute_force_posteriors, build_potentials, posteriors, viterbi
from boostcrf.model import HIDDEN, LabelSpace, Model, ObservationSequence

rng = np.random.default_rng(0)

# three labels, bridge features (data association + every label pair)
labels = LabelSpace(("walk", "sit", "eat"))
feats = build_feature_set("bridge", labels)
model = Model(labels, feats, rng.uniform(-2, 2, len(feats)))
print(len(feats), "features")

# a five-slice track wandering around the unit square
x = ObservationSequence.from_track(rng.uniform(0, 1, size=(5, 2)))
print("channels (X, Y, uX, uY, s):")
print(np.round(x.g, 3))

pot = build_potentials(model, x)
free = posteriors(pot)
print("log Z =", free.log_z)
print("node marginals:")
print(np.round(free.node_marginals, 4))

# clamp slices 0 and 3, the others stay hidden
clamp = np.array([0, HIDDEN, HIDDEN, 2, HIDDEN])
clamped = posteriors(pot, clamp)
print("log Z(v) =", clamped.log_z, " p(v|x) =", np.exp(clamped.log_z - free.log_z))

# brute force over all 3**5 labellings agrees to rounding
ref = brute_force_posteriors(model, x, clamp)
print("max marginal gap vs enumeration:", np.abs(ref.node_marginals - clamped.node_marginals).max())

best = viterbi(model, x)
print("viterbi:", [labels.names[l] for l in best])
