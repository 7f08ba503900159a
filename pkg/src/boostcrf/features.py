"""Observation channels and the four feature-set templates."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .model import N_CHANNELS, Feature, LabelSpace, NormStats

FEATURE_SET_NAMES = ("persist", "transition", "context", "bridge")


@dataclass(frozen=True)
class FeatureSetKind:
    kind: str
    window: int = 1

    def __post_init__(self):
        if self.kind not in FEATURE_SET_NAMES:
            raise ValueError(f"unknown feature set {self.kind!r}; choose from {FEATURE_SET_NAMES}")
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError(f"window must be odd and >= 1, got {self.window}")

    @property
    def offsets(self) -> range:
        half = (self.window - 1) // 2
        return range(-half, half + 1)


def extract_obs_features(track) -> np.ndarray:
    """Channels ``(X, Y, uX, uY, s)`` for every slice of a 2-D track."""
    pos = np.asarray(track, dtype=float)
    if pos.size == 0:
        raise ValueError("cannot extract features from an empty track")
    pos = pos.reshape(-1, 2)
    vel = np.zeros_like(pos)
    vel[1:] = pos[1:] - pos[:-1]
    speed = np.hypot(vel[:, 0], vel[:, 1])
    return np.column_stack([pos, vel, speed])


def build_feature_set(kind: FeatureSetKind | str, label_space: LabelSpace | int,
                      window: int | None = None) -> list[Feature]:
    """Enumerate a feature set with dense ids.

    Ids follow lexicographic order over (block, l1, l2, m, eps), data
    association block first where present.
    """
    if isinstance(kind, str):
        kind = FeatureSetKind(kind, window or 1)
    n = label_space if isinstance(label_space, int) else label_space.size
    specs = []
    if kind.kind in ("persist", "bridge"):
        specs += [("data", l, -1, m, 0) for l in range(n) for m in range(N_CHANNELS)]
    if kind.kind == "persist":
        specs += [("persist", l, l, -1, 0) for l in range(n)]
    elif kind.kind == "bridge":
        specs += [("bridge", a, b, -1, 0) for a in range(n) for b in range(n)]
    elif kind.kind == "transition":
        specs += [("transition", a, b, m, 0)
                  for a in range(n) for b in range(n) for m in range(N_CHANNELS)]
    else:
        specs += [("context", a, b, m, e)
                  for a in range(n) for b in range(n) for m in range(N_CHANNELS)
                  for e in kind.offsets]
    return [Feature(i, *s) for i, s in enumerate(specs)]


def expected_feature_count(kind: FeatureSetKind | str, n_labels: int, window: int = 1) -> int:
    name = kind if isinstance(kind, str) else kind.kind
    if not isinstance(kind, str):
        window = kind.window
    return {
        "persist": N_CHANNELS * n_labels + n_labels,
        "transition": N_CHANNELS * n_labels ** 2,
        "context": N_CHANNELS * window * n_labels ** 2,
        "bridge": N_CHANNELS * n_labels + n_labels ** 2,
    }[name]


def compute_norm_stats(gs) -> NormStats:
    """Mean/std of every channel over all slices of all sequences.

    A constant channel gets std 1 (with a warning) so it normalises to zero.
    """
    stacked = np.concatenate([np.asarray(g, dtype=float).reshape(-1, N_CHANNELS) for g in gs])
    mean = stacked.mean(axis=0)
    std = stacked.std(axis=0)
    flat = ~(std > 1e-12)
    if np.any(flat):
        warnings.warn(
            f"constant observation channel(s) {np.flatnonzero(flat).tolist()}; using std=1",
            RuntimeWarning,
            stacklevel=2,
        )
        std = np.where(flat, 1.0, std)
    return NormStats(tuple(mean), tuple(std))


def normalize(g, stats: NormStats) -> np.ndarray:
    return stats.apply(g)


@dataclass(frozen=True, eq=False)
class FeatureTable:
    """Array form of a feature list used by the vectorised inference code.

    Every feature reads one *value column*: column 0 is the constant 1 and
    the remaining columns are ``g_m(t + eps)`` for the distinct ``(m, eps)``
    pairs in the set.  A node feature contributes ``w * value`` to
    ``node[t, l1]``; an edge feature to ``edge[t, l1, l2]``.
    """

    columns: tuple[tuple[int, int], ...]
    col: np.ndarray
    is_node: np.ndarray
    l1: np.ndarray
    l2: np.ndarray

    @property
    def n_columns(self) -> int:
        return len(self.columns)

    def values(self, g: np.ndarray) -> np.ndarray:
        """``T x C`` value-column matrix for one (normalised) channel matrix."""
        T = g.shape[0]
        out = np.empty((T, self.n_columns))
        out[:, 0] = 1.0
        t = np.arange(T)
        for j, (m, eps) in enumerate(self.columns[1:], start=1):
            out[:, j] = g[np.clip(t + eps, 0, T - 1), m]
        return out

    def weight_tensors(self, weights: np.ndarray, n_labels: int):
        """Scatter weights into ``(C, L)`` node and ``(C, L, L)`` edge tensors."""
        weights = np.asarray(weights, dtype=float)
        wn = np.zeros((self.n_columns, n_labels))
        we = np.zeros((self.n_columns, n_labels, n_labels))
        node = self.is_node
        np.add.at(wn, (self.col[node], self.l1[node]), weights[node])
        edge = ~node
        np.add.at(we, (self.col[edge], self.l1[edge], self.l2[edge]), weights[edge])
        return wn, we

    def gather(self, node_stat: np.ndarray, edge_stat: np.ndarray) -> np.ndarray:
        """Per-feature vector from ``(C, L)`` node and ``(C, L, L)`` edge statistics."""
        out = np.empty(self.col.shape[0])
        node = self.is_node
        out[node] = node_stat[self.col[node], self.l1[node]]
        edge = ~node
        out[edge] = edge_stat[self.col[edge], self.l1[edge], self.l2[edge]]
        return out


@lru_cache(maxsize=64)
def compile_features(features: tuple[Feature, ...]) -> FeatureTable:
    columns: dict[tuple[int, int], int] = {(-1, 0): 0}
    col = np.empty(len(features), dtype=np.int64)
    for i, f in enumerate(features):
        key = (f.m, f.eps) if f.uses_channel else (-1, 0)
        col[i] = columns.setdefault(key, len(columns))
    is_node = np.array([f.clique_kind == "node" for f in features], dtype=bool)
    l1 = np.array([f.l1 for f in features], dtype=np.int64)
    l2 = np.array([max(f.l2, 0) for f in features], dtype=np.int64)
    return FeatureTable(tuple(columns), col, is_node, l1, l2)
