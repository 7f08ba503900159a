"""Domain types for labels, observation sequences, features and models.

A feature is an indicator-style weak hypothesis living on one clique of the
chain: a node ``tau`` or an edge ``(tau - 1, tau)``.  The global score of a
full labelling is ``F(x, y) = sum_k w_k sum_c f_k(x, y_c)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

N_CHANNELS = 5
CHANNEL_NAMES = ("X", "Y", "uX", "uY", "speed")

HIDDEN = -1

FEATURE_KINDS = ("data", "persist", "transition", "context", "bridge")


@dataclass(frozen=True)
class LabelSpace:
    names: tuple[str, ...]

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        object.__setattr__(self, "names", names)
        if len(names) < 2:
            raise ValueError("a label space needs at least two labels")
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate label names in {names}")

    @property
    def size(self) -> int:
        return len(self.names)

    def __len__(self):
        return len(self.names)

    def index(self, name) -> int:
        return self.names.index(str(name))

    @classmethod
    def of_size(cls, n: int) -> "LabelSpace":
        return cls(tuple(str(i) for i in range(n)))


@dataclass(frozen=True, eq=False)
class ObservationSequence:
    """A 2-D track plus its derived ``T x 5`` channel matrix.

    Channels are ``(X, Y, uX, uY, s)`` with backward-difference velocities
    and ``u(0) = (0, 0)``.  Build from a track with :meth:`from_track`.
    """

    track: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        track = np.array(self.track, dtype=float).reshape(-1, 2)
        g = np.array(self.g, dtype=float)
        if g.ndim != 2 or g.shape[1] != N_CHANNELS:
            raise ValueError(f"g must be T x {N_CHANNELS}, got {g.shape}")
        if g.shape[0] < 1 or g.shape[0] != track.shape[0]:
            raise ValueError("track and g must have the same length T >= 1")
        if not np.all(np.isfinite(g)):
            raise ValueError("observation channels contain NaN or Inf")
        track.flags.writeable = False
        g.flags.writeable = False
        object.__setattr__(self, "track", track)
        object.__setattr__(self, "g", g)

    @classmethod
    def from_track(cls, track) -> "ObservationSequence":
        from .features import extract_obs_features

        return cls(np.asarray(track, dtype=float), extract_obs_features(track))

    def __len__(self):
        return self.g.shape[0]


@dataclass(frozen=True)
class NormStats:
    """Per-channel mean and standard deviation used to z-score ``g``."""

    mean: tuple[float, ...]
    std: tuple[float, ...]

    def __post_init__(self):
        mean = tuple(float(v) for v in self.mean)
        std = tuple(float(v) for v in self.std)
        if len(mean) != N_CHANNELS or len(std) != N_CHANNELS:
            raise ValueError(f"norm stats need {N_CHANNELS} entries")
        if not all(s > 0 and np.isfinite(s) for s in std):
            raise ValueError(f"standard deviations must be positive, got {std}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @classmethod
    def identity(cls) -> "NormStats":
        return cls((0.0,) * N_CHANNELS, (1.0,) * N_CHANNELS)

    def apply(self, g: np.ndarray) -> np.ndarray:
        return (np.asarray(g, dtype=float) - np.asarray(self.mean)) / np.asarray(self.std)


@dataclass(frozen=True, order=True)
class Feature:
    """One weak hypothesis.

    ``kind`` selects the predicate:

    ``data``        node feature ``[y_t = l1] * g_m(t)``
    ``persist``     ``[y_{t-1} = y_t = l1]`` (``l2 == l1``)
    ``transition``  ``[y_{t-1} = l1][y_t = l2] * g_m(t)``
    ``context``     ``[y_{t-1} = l1][y_t = l2] * g_m(t + eps)``
    ``bridge``      ``[y_{t-1} = l1][y_t = l2]``
    """

    id: int
    kind: str
    l1: int
    l2: int = -1
    m: int = -1
    eps: int = 0

    def __post_init__(self):
        if self.kind not in FEATURE_KINDS:
            raise ValueError(f"unknown feature kind {self.kind!r}")
        if self.kind == "persist" and self.l2 != self.l1:
            object.__setattr__(self, "l2", self.l1)
        uses_channel = self.kind in ("data", "transition", "context")
        if uses_channel and not 0 <= self.m < N_CHANNELS:
            raise ValueError(f"feature {self.id}: channel {self.m} out of range")
        if self.kind != "data" and self.l2 < 0:
            raise ValueError(f"feature {self.id}: edge feature needs l2")
        if self.kind != "context" and self.eps != 0:
            raise ValueError(f"feature {self.id}: only context features take an offset")

    @property
    def clique_kind(self) -> str:
        return "node" if self.kind == "data" else "edge"

    @property
    def uses_channel(self) -> bool:
        return self.kind in ("data", "transition", "context")

    @property
    def is_label_label(self) -> bool:
        return self.kind in ("persist", "bridge")

    def params(self) -> dict:
        if self.kind == "data":
            return {"l": self.l1, "m": self.m}
        if self.kind == "persist":
            return {"l": self.l1}
        if self.kind == "transition":
            return {"l1": self.l1, "l2": self.l2, "m": self.m}
        if self.kind == "context":
            return {"l1": self.l1, "l2": self.l2, "m": self.m, "eps": self.eps}
        return {"l1": self.l1, "l2": self.l2}

    @classmethod
    def from_params(cls, id: int, kind: str, params: dict) -> "Feature":
        if kind in ("data", "persist"):
            l = int(params["l"])
            return cls(id, kind, l, l if kind == "persist" else -1, int(params.get("m", -1)))
        return cls(
            id,
            kind,
            int(params["l1"]),
            int(params["l2"]),
            int(params.get("m", -1)),
            int(params.get("eps", 0)),
        )


@dataclass(frozen=True, eq=False)
class Model:
    label_space: LabelSpace
    features: tuple[Feature, ...]
    weights: np.ndarray
    norm_stats: NormStats = field(default_factory=NormStats.identity)

    def __post_init__(self):
        features = tuple(self.features)
        weights = np.array(self.weights, dtype=float).reshape(-1)
        if weights.shape[0] != len(features):
            raise ValueError(
                f"{weights.shape[0]} weights for {len(features)} features"
            )
        if [f.id for f in features] != list(range(len(features))):
            raise ValueError("feature ids must be 0..K-1 in order")
        n = self.label_space.size
        for f in features:
            if not 0 <= f.l1 < n or (f.clique_kind == "edge" and not 0 <= f.l2 < n):
                raise ValueError(f"feature {f.id} references a label outside 0..{n - 1}")
        weights.flags.writeable = False
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def zeros(cls, label_space, features, norm_stats=None) -> "Model":
        return cls(label_space, tuple(features), np.zeros(len(features)),
                   norm_stats or NormStats.identity())

    @property
    def n_labels(self) -> int:
        return self.label_space.size

    def with_weights(self, weights) -> "Model":
        return Model(self.label_space, self.features, weights, self.norm_stats)

    def channels(self, x: ObservationSequence) -> np.ndarray:
        """Normalised channel matrix of ``x`` under this model's statistics."""
        return self.norm_stats.apply(x.g)


@dataclass(frozen=True, eq=False)
class LabeledSequence:
    """An observation sequence with its (possibly partial) label vector.

    ``labels`` holds label indices with ``HIDDEN`` (-1) for unobserved slices.
    ``truth`` optionally carries the complete ground truth.
    """

    x: ObservationSequence
    labels: np.ndarray
    truth: np.ndarray | None = None

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.int64).reshape(-1)
        if labels.shape[0] != len(self.x):
            raise ValueError("labelling length does not match the observation sequence")
        if np.any(labels < HIDDEN):
            raise ValueError("label indices must be >= 0 or HIDDEN")
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        if self.truth is not None:
            truth = np.array(self.truth, dtype=np.int64).reshape(-1)
            if truth.shape != labels.shape or np.any(truth < 0):
                raise ValueError("ground truth must be a complete labelling")
            truth.flags.writeable = False
            object.__setattr__(self, "truth", truth)

    @property
    def observed(self) -> np.ndarray:
        return self.labels != HIDDEN

    def __len__(self):
        return self.labels.shape[0]


@dataclass(frozen=True, eq=False)
class Dataset:
    label_space: LabelSpace
    sequences: tuple[LabeledSequence, ...]
    header: dict = field(default_factory=dict)

    def __post_init__(self):
        seqs = tuple(self.sequences)
        n = self.label_space.size
        for s in seqs:
            if np.any(s.labels >= n) or (s.truth is not None and np.any(s.truth >= n)):
                raise ValueError(f"label index outside 0..{n - 1}")
        object.__setattr__(self, "sequences", seqs)

    def __len__(self):
        return len(self.sequences)

    def __iter__(self):
        return iter(self.sequences)

    def __getitem__(self, i):
        return self.sequences[i]


def check_partial(labels, T: int, n_labels: int) -> np.ndarray:
    v = np.asarray(labels, dtype=np.int64).reshape(-1)
    if v.shape[0] != T:
        raise ValueError(f"labelling has length {v.shape[0]}, expected {T}")
    if np.any((v < HIDDEN) | (v >= n_labels)):
        raise ValueError("labelling holds indices outside the label space")
    return v


def _channels(x) -> np.ndarray:
    return x.g if isinstance(x, ObservationSequence) else np.asarray(x, dtype=float)


def eval_feature(feature: Feature, x, tau: int, labels: Sequence[int]) -> float:
    """Value of ``feature`` on a single clique.

    ``labels`` is ``(y_tau,)`` for node features and ``(y_{tau-1}, y_tau)``
    for edge features.  ``x`` is an :class:`ObservationSequence` or a raw
    channel matrix.  Context offsets are clamped into ``[0, T - 1]``.
    """
    g = _channels(x)
    T = g.shape[0]
    if feature.clique_kind == "node":
        assert 0 <= tau < T, f"node clique tau={tau} out of range for T={T}"
        (y,) = labels
        return float(g[tau, feature.m]) if y == feature.l1 else 0.0
    assert 1 <= tau < T, f"edge clique tau={tau} out of range for T={T}"
    a, b = labels
    if a != feature.l1 or b != feature.l2:
        return 0.0
    if not feature.uses_channel:
        return 1.0
    t = min(max(tau + feature.eps, 0), T - 1)
    return float(g[t, feature.m])


def feature_count(feature: Feature, x, y: Sequence[int]) -> float:
    """``f_k(x, y)``: sum of the feature over every clique of the chain."""
    g = _channels(x)
    T = g.shape[0]
    if feature.clique_kind == "node":
        return sum(eval_feature(feature, g, t, (y[t],)) for t in range(T))
    return sum(eval_feature(feature, g, t, (y[t - 1], y[t])) for t in range(1, T))


def score_assignment(model: Model, x: ObservationSequence, y) -> float:
    """Global score ``F(x, y)`` of a complete labelling."""
    y = check_partial(y, len(x), model.n_labels)
    if np.any(y == HIDDEN):
        raise ValueError("score_assignment needs a complete labelling")
    g = model.channels(x)
    return float(
        sum(w * feature_count(f, g, y) for f, w in zip(model.features, model.weights) if w != 0)
    )
