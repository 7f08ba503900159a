"""Random small instances and enumeration oracles for verification.

The oracles here score labellings through :func:`inference.enumerate_scores`
(feature-by-feature ``eval_feature`` tables) and never touch the
forward-backward code they are used to check.
"""

from __future__ import annotations

import numpy as np

from .inference import enumerate_scores
from .model import (HIDDEN, N_CHANNELS, Feature, LabelSpace, LabeledSequence, Model,
                    ObservationSequence, feature_count)


def random_features(rng: np.random.Generator, n_labels: int, n_features: int,
                    max_eps: int = 2) -> list[Feature]:
    out = []
    for i in range(n_features):
        kind = str(rng.choice(["data", "persist", "transition", "context", "bridge"]))
        l1, l2 = (int(v) for v in rng.integers(n_labels, size=2))
        m = int(rng.integers(N_CHANNELS))
        if kind == "data":
            out.append(Feature(i, kind, l1, -1, m))
        elif kind == "persist":
            out.append(Feature(i, kind, l1, l1))
        elif kind == "transition":
            out.append(Feature(i, kind, l1, l2, m))
        elif kind == "context":
            out.append(Feature(i, kind, l1, l2, m, int(rng.integers(-max_eps, max_eps + 1))))
        else:
            out.append(Feature(i, kind, l1, l2))
    return out


def random_observation(rng: np.random.Generator, T: int) -> ObservationSequence:
    return ObservationSequence.from_track(rng.uniform(-1.0, 1.0, size=(T, 2)))


def random_clamp(rng: np.random.Generator, T: int, n_labels: int, min_observed: int = 0,
                 p_observed: float = 0.5) -> np.ndarray:
    v = np.where(rng.random(T) < p_observed, rng.integers(n_labels, size=T), HIDDEN)
    while np.count_nonzero(v >= 0) < min_observed:
        t = int(rng.integers(T))
        v[t] = int(rng.integers(n_labels))
    return v


def random_model(rng: np.random.Generator, n_labels: int, n_features: int,
                 scale: float = 3.0) -> Model:
    feats = random_features(rng, n_labels, n_features)
    return Model(LabelSpace.of_size(n_labels), feats, rng.uniform(-scale, scale, n_features))


def random_instance(rng: np.random.Generator, max_T: int = 6, max_labels: int = 4,
                    n_seqs: int = 1, n_features: int | None = None, scale: float = 3.0,
                    min_observed: int = 1, p_observed: float = 0.5):
    """``(model, [LabeledSequence])`` with random sizes, weights and clamps."""
    L = int(rng.integers(2, max_labels + 1))
    K = n_features or int(rng.integers(3, 13))
    model = random_model(rng, L, K, scale)
    seqs = []
    for _ in range(n_seqs):
        T = int(rng.integers(1, max_T + 1))
        x = random_observation(rng, T)
        v = random_clamp(rng, T, L, min(min_observed, T), p_observed)
        seqs.append(LabeledSequence(x, v))
    return model, seqs


# -- enumeration oracles ---------------------------------------------------


def _overwrite_rows(Y, v, L):
    obs = v >= 0
    Yo = Y.copy()
    Yo[:, obs] = v[obs]
    return Yo @ (L ** np.arange(Y.shape[1] - 1, -1, -1))


def _lse(a):
    m = a.max()
    return m + np.log(np.exp(a - m).sum())


def enum_log_partitions(model: Model, x, v):
    """``(log Z, log Z(v))`` by enumeration."""
    Y, F = enumerate_scores(model, x)
    obs = v >= 0
    cons = np.all(Y[:, obs] == v[obs], axis=1)
    return _lse(F), _lse(F[cons])


def enum_exp_loss_expected(model: Model, seqs) -> float:
    """``sum_i sum_h p(h|v_i) sum_v exp(F(v,h) - F(v_i,h))`` by enumeration."""
    total = 0.0
    L = model.n_labels
    for s in seqs:
        v = np.asarray(s.labels)
        Y, F = enumerate_scores(model, s.x)
        own = _overwrite_rows(Y, v, L)
        obs = v >= 0
        cons = np.all(Y[:, obs] == v[obs], axis=1)
        log_zv = _lse(F[cons])
        for idx in np.flatnonzero(cons):
            p_h = np.exp(F[idx] - log_zv)
            group = own == idx
            total += p_h * np.exp(F[group] - F[idx]).sum()
    return float(total)


def enum_frozen_objective(model: Model, seqs, k: int):
    """The round-frozen objective ``J(alpha)`` for feature ``k``, as a closure.

    ``p(h | v_i)`` is fixed at the current weights; ``dF`` and ``df_k`` are
    differences against the labelling with visible slots overwritten.
    """
    L = model.n_labels
    f = model.features[k]
    parts = []
    for s in seqs:
        v = np.asarray(s.labels)
        Y, F = enumerate_scores(model, s.x)
        g = model.channels(s.x)
        fk = np.array([feature_count(f, g, y) for y in Y])
        own = _overwrite_rows(Y, v, L)
        obs = v >= 0
        cons = np.all(Y[:, obs] == v[obs], axis=1)
        log_zv = _lse(F[cons])
        p_h = np.exp(F[own] - log_zv)
        parts.append((p_h, F - F[own], fk - fk[own], 2 * len(v) - 1))
    def J(alpha: float) -> float:
        return float(sum((p * np.exp(dF + alpha * df)).sum() for p, dF, df, _ in parts))

    def J2() -> float:
        return float(sum((p * np.exp(dF) * df ** 2).sum() for p, dF, df, _ in parts))

    J.second_derivative = J2
    return J


def enum_nll(model: Model, seqs) -> float:
    total = 0.0
    for s in seqs:
        lz, lzv = enum_log_partitions(model, s.x, np.asarray(s.labels))
        total += lz - lzv
    return float(total)
