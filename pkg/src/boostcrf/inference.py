"""Exact inference on the linear chain, in the log domain.

All recursions run over a padded batch ``(N, T, L)`` so a whole training set
is processed with one Python loop over time.  Padded slices are forced onto
label 0 with a zero score, which leaves partition functions untouched.
Clamping an observed slice to its label is a support restriction: every
other label at that slice gets a score of ``-inf``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .features import FeatureTable, compile_features
from .model import HIDDEN, Model, ObservationSequence, check_partial, eval_feature

MAX_ENUMERATION = 10 ** 6


def logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis)


def forward(node: np.ndarray, edge: np.ndarray):
    """Forward messages and log-partition for a batch.

    ``node`` is ``(N, T, L)``; ``edge`` is ``(N, T, L, L)`` where
    ``edge[:, t, a, b]`` scores ``(y_{t-1}, y_t) = (a, b)`` and ``edge[:, 0]``
    is ignored.
    """
    N, T, L = node.shape
    alpha = np.empty((N, T, L))
    alpha[:, 0] = node[:, 0]
    for t in range(1, T):
        alpha[:, t] = logsumexp(alpha[:, t - 1, :, None] + edge[:, t], axis=1) + node[:, t]
    return alpha, logsumexp(alpha[:, -1], axis=-1)


def backward(node: np.ndarray, edge: np.ndarray) -> np.ndarray:
    N, T, L = node.shape
    beta = np.zeros((N, T, L))
    for t in range(T - 2, -1, -1):
        beta[:, t] = logsumexp(edge[:, t + 1] + (node[:, t + 1] + beta[:, t + 1])[:, None, :], axis=2)
    return beta


def forward_backward(node: np.ndarray, edge: np.ndarray):
    """Return ``(log_Z, node_marginals, edge_marginals)`` for a batch.

    ``edge_marginals[:, 0]`` is zero; ``edge_marginals[:, t]`` is the joint
    of ``(y_{t-1}, y_t)``.
    """
    alpha, log_z = forward(node, edge)
    beta = backward(node, edge)
    lz = log_z[:, None, None]
    node_m = np.exp(alpha + beta - lz)
    edge_m = np.zeros(edge.shape)
    if node.shape[1] > 1:
        nb = node + beta
        edge_m[:, 1:] = np.exp(
            alpha[:, :-1, :, None] + edge[:, 1:] + nb[:, 1:, None, :] - lz[..., None]
        )
    return log_z, node_m, edge_m


class ChainBatch:
    """Padded, precomputed view of many sequences under one feature set.

    Holds the value-column tensor ``(N, T, C)`` of every sequence (after
    normalisation) together with clamp masks, so potentials for any weight
    vector cost two tensor contractions.
    """

    def __init__(self, table: FeatureTable, gs, clamps, n_labels: int):
        self.table = table
        self.n_labels = L = n_labels
        self.lengths = np.array([g.shape[0] for g in gs], dtype=np.int64)
        N, T = len(gs), int(self.lengths.max())
        self.values = np.zeros((N, T, table.n_columns))
        self.clamp = np.full((N, T), HIDDEN, dtype=np.int64)
        for i, (g, v) in enumerate(zip(gs, clamps)):
            self.values[i, : g.shape[0]] = table.values(g)
            self.clamp[i, : g.shape[0]] = check_partial(v, g.shape[0], L)
        t = np.arange(T)
        self.valid = t[None, :] < self.lengths[:, None]
        self.edge_valid = self.valid & (t[None, :] >= 1)
        self.observed = self.clamp >= 0
        self.onehot = np.zeros((N, T, L))
        n_idx, t_idx = np.nonzero(self.observed)
        self.onehot[n_idx, t_idx, self.clamp[n_idx, t_idx]] = 1.0
        self.pad_penalty = np.zeros((N, T, L))
        self.pad_penalty[~self.valid, 1:] = -np.inf
        self.clamp_penalty = np.where(
            self.observed[..., None] & (self.onehot == 0), -np.inf, 0.0
        )
        self.n_cliques = 2 * self.lengths - 1

    @classmethod
    def from_model(cls, model: Model, sequences, clamps=None) -> "ChainBatch":
        """Build from a model and ``LabeledSequence`` items (or bare observations)."""
        xs = [getattr(s, "x", s) for s in sequences]
        if clamps is None:
            clamps = [getattr(s, "labels", None) for s in sequences]
        clamps = [np.full(len(x), HIDDEN) if c is None else c for x, c in zip(xs, clamps)]
        table = compile_features(model.features)
        return cls(table, [model.channels(x) for x in xs], clamps, model.n_labels)

    def __len__(self):
        return self.values.shape[0]

    def potentials(self, weights):
        """Unclamped padded ``(node, edge)`` scores for ``weights``."""
        weights = np.asarray(weights, dtype=float)
        wn, we = self.table.weight_tensors(weights, self.n_labels)
        node = self.values @ wn + self.pad_penalty
        edge = np.einsum("ntc,cab->ntab", self.values, we)
        edge *= self.edge_valid[..., None, None]
        return node, edge

    def unit_potentials(self, k: int):
        """Score change per unit weight on feature ``k``."""
        tab = self.table
        vals = self.values[..., tab.col[k]]
        N, T, L = self.onehot.shape
        node = np.zeros((N, T, L))
        edge = np.zeros((N, T, L, L))
        if tab.is_node[k]:
            node[..., tab.l1[k]] = vals * self.valid
        else:
            edge[..., tab.l1[k], tab.l2[k]] = vals * self.edge_valid
        return node, edge

    def clamped(self, node):
        return node + self.clamp_penalty


@dataclass(frozen=True, eq=False)
class PotentialTable:
    node_scores: np.ndarray
    edge_scores: np.ndarray

    def __post_init__(self):
        node = np.asarray(self.node_scores, dtype=float)
        T, L = node.shape
        edge = np.asarray(self.edge_scores, dtype=float).reshape(max(T - 1, 0), L, L)
        if not (np.all(np.isfinite(node)) and np.all(np.isfinite(edge))):
            raise ValueError("potential tables must be finite")
        object.__setattr__(self, "node_scores", node)
        object.__setattr__(self, "edge_scores", edge)

    @property
    def length(self) -> int:
        return self.node_scores.shape[0]

    @property
    def n_labels(self) -> int:
        return self.node_scores.shape[1]

    def padded_edges(self) -> np.ndarray:
        L = self.n_labels
        return np.concatenate([np.zeros((1, L, L)), self.edge_scores])


@dataclass(frozen=True, eq=False)
class ChainPosteriors:
    log_z: float
    node_marginals: np.ndarray
    edge_marginals: np.ndarray
    clamp: np.ndarray


def build_potentials(model: Model, x: ObservationSequence) -> PotentialTable:
    bad = np.flatnonzero(~np.isfinite(model.weights))
    if bad.size:
        raise ValueError(f"non-finite weight for feature id {int(bad[0])}")
    g = model.channels(x)
    if not np.all(np.isfinite(g)):
        raise ValueError("non-finite observation channel after normalisation")
    table = compile_features(model.features)
    vals = table.values(g)
    wn, we = table.weight_tensors(model.weights, model.n_labels)
    return PotentialTable(vals @ wn, np.einsum("tc,cab->tab", vals[1:], we))


def posteriors(potentials: PotentialTable, clamp=None) -> ChainPosteriors:
    """Forward-backward under an optional partial clamp (``HIDDEN`` = free)."""
    T, L = potentials.length, potentials.n_labels
    v = np.full(T, HIDDEN) if clamp is None else check_partial(clamp, T, L)
    node = potentials.node_scores.copy()
    obs = v >= 0
    mask = np.zeros((T, L), dtype=bool)
    mask[obs] = True
    mask[np.flatnonzero(obs), v[obs]] = False
    node[mask] = -np.inf
    log_z, nm, em = forward_backward(node[None], potentials.padded_edges()[None])
    return ChainPosteriors(float(log_z[0]), nm[0], em[0, 1:], v)


def conditional_log_prob(model: Model, x: ObservationSequence, v) -> float:
    """``log p(v | x) = log Z(v) - log Z``; zero when nothing is observed."""
    v = check_partial(v, len(x), model.n_labels)
    if not np.any(v >= 0):
        return 0.0
    pot = build_potentials(model, x)
    return posteriors(pot, v).log_z - posteriors(pot).log_z


def viterbi_potentials(potentials: PotentialTable) -> np.ndarray:
    node, edge = potentials.node_scores, potentials.edge_scores
    T, L = node.shape
    delta = node[0].copy()
    back = np.zeros((T, L), dtype=np.int64)
    for t in range(1, T):
        cand = delta[:, None] + edge[t - 1]
        back[t] = np.argmax(cand, axis=0)  # first maximum: lowest previous label
        delta = cand[back[t], np.arange(L)] + node[t]
    y = np.empty(T, dtype=np.int64)
    y[-1] = int(np.argmax(delta))
    for t in range(T - 1, 0, -1):
        y[t - 1] = back[t, y[t]]
    return y


def viterbi(model: Model, x: ObservationSequence) -> np.ndarray:
    """Highest-scoring complete labelling ``argmax_y F(x, y)``."""
    return viterbi_potentials(build_potentials(model, x))


def clique_tables(model: Model, x: ObservationSequence):
    """Per-clique score tables computed feature by feature with ``eval_feature``.

    Deliberately independent of :func:`build_potentials`; used by the
    enumeration oracles.
    """
    g = model.channels(x)
    T, L = g.shape[0], model.n_labels
    node = np.zeros((T, L))
    edge = np.zeros((max(T - 1, 0), L, L))
    for f, w in zip(model.features, model.weights):
        if w == 0:
            continue
        if f.clique_kind == "node":
            for t in range(T):
                for y in range(L):
                    node[t, y] += w * eval_feature(f, g, t, (y,))
        else:
            for t in range(1, T):
                for a in range(L):
                    for b in range(L):
                        edge[t - 1, a, b] += w * eval_feature(f, g, t, (a, b))
    return node, edge


def enumerate_scores(model: Model, x: ObservationSequence):
    """All ``L**T`` labellings (rows of ``Y``) and their global scores."""
    T, L = len(x), model.n_labels
    if L ** T > MAX_ENUMERATION:
        raise ValueError(f"enumeration of {L}**{T} labellings exceeds {MAX_ENUMERATION}")
    node, edge = clique_tables(model, x)
    Y = np.array(list(itertools.product(range(L), repeat=T)), dtype=np.int64).reshape(-1, T)
    scores = node[np.arange(T), Y].sum(axis=1)
    if T > 1:
        scores += edge[np.arange(T - 1), Y[:, :-1], Y[:, 1:]].sum(axis=1)
    return Y, scores


def brute_force_posteriors(model: Model, x: ObservationSequence, clamp=None) -> ChainPosteriors:
    """Exact posteriors by explicit enumeration (testing oracle)."""
    T, L = len(x), model.n_labels
    v = np.full(T, HIDDEN) if clamp is None else check_partial(clamp, T, L)
    Y, scores = enumerate_scores(model, x)
    obs = v >= 0
    keep = np.all(Y[:, obs] == v[obs], axis=1)
    Y, scores = Y[keep], scores[keep]
    m = scores.max()
    log_z = float(m + np.log(np.exp(scores - m).sum()))
    p = np.exp(scores - log_z)
    node = np.zeros((T, L))
    for t in range(T):
        np.add.at(node[t], Y[:, t], p)
    edge = np.zeros((max(T - 1, 0), L, L))
    for t in range(1, T):
        np.add.at(edge[t - 1], (Y[:, t - 1], Y[:, t]), p)
    return ChainPosteriors(log_z, node, edge, v)
