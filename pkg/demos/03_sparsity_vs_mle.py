"""Sparse boosting versus dense maximum likelihood on a wide context feature set.

Context features with a window of 11 slices give 1375 candidate features for
five labels. Boosting touches only a small fraction of them in 100 rounds;
L-BFGS on the marginal likelihood moves all of them.

Run: python3 demos/03_sparsity_vs_mle.py
"""
import time

import numpy as np

from boostcrf import (BoostConfig, MleConfig, build_feature_set, default_scenario, evaluate,
                      generate_dataset, mask_labels, train_boost, train_mle, viterbi)

spec = default_scenario(seed=1)
train, test = generate_dataset(spec)
train = mask_labels(train, 0.5, 1)
feats = build_feature_set("context", train.label_space, 11)
truth = [s.truth for s in test]

t = time.perf_counter()
boosted, btrace = train_boost(train, feats, BoostConfig(rounds=100))
tb = time.perf_counter() - t
t = time.perf_counter()
mle, mtrace = train_mle(train, feats, MleConfig())
tm = time.perf_counter() - t

for name, model, secs in (("boost", boosted, tb), ("mle", mle, tm)):
    r = evaluate([viterbi(model, s.x) for s in test], truth, len(spec.labels))
    active = np.count_nonzero(model.weights)
    print(f"{name:>5}: {active:4d}/{len(feats)} active features, test error {100 * r.per_label_error:5.2f}%, "
          f"macro F1 {r.macro_f1:.3f}, {secs:.1f}s")
print(f"mle stopped after {len(mtrace.losses) - 1} iterations: {mtrace.message}")

# which offsets did boosting pick? a histogram over eps of the selected features
eps = [feats[k].eps for k in np.flatnonzero(boosted.weights)]
values, counts = np.unique(eps, return_counts=True)
print("selected offsets:", {int(v): int(c) for v, c in zip(values, counts)})
