"""Seedable activity-trajectory scenarios and the random label-masking protocol.

A scenario places landmarks in the unit square; each activity walks from one
landmark to another.  A sequence is a walk over the activity adjacency,
holding each activity for a sampled number of slices while the position is
interpolated between its landmarks plus isotropic Gaussian noise.

Randomness comes from numpy's PCG64 generator.  Every sequence draws from
its own stream spawned from ``SeedSequence(seed)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .model import HIDDEN, Dataset, LabelSpace, LabeledSequence, ObservationSequence

RNG_NAME = "numpy.PCG64/SeedSequence"

# cross pattern: centre, north, east, south, west
CROSS_LANDMARKS = ((0.5, 0.5), (0.5, 0.9), (0.9, 0.5), (0.5, 0.1), (0.1, 0.5))

# activity transitions of the short-meal scenario, labels 1, 2, 3, 4, 11
SHORT_MEAL_ADJACENCY = (
    (1, 1, 0, 0, 0),
    (0, 1, 1, 0, 1),
    (0, 0, 1, 1, 0),
    (0, 0, 0, 1, 0),
    (0, 0, 0, 0, 1),
)


@dataclass(frozen=True)
class ScenarioSpec:
    landmarks: tuple[tuple[float, float], ...] = CROSS_LANDMARKS
    # (from, to) landmark indices per activity
    activities: tuple[tuple[int, int], ...] = ((4, 0), (0, 1), (1, 2), (2, 3), (1, 4))
    transition: tuple[tuple[int, ...], ...] = SHORT_MEAL_ADJACENCY
    labels: tuple[str, ...] = ("1", "2", "3", "4", "11")
    duration_range: tuple[int, int] = (8, 15)
    noise_std: float = 0.02
    n_train: int = 42
    n_test: int = 44
    seed: int = 0
    max_path: int = 0  # 0 means 2 * number of activities

    def __post_init__(self):
        for name in ("landmarks", "activities", "transition"):
            object.__setattr__(self, name, tuple(tuple(r) for r in getattr(self, name)))
        object.__setattr__(self, "labels", tuple(str(l) for l in self.labels))
        object.__setattr__(self, "duration_range", tuple(int(d) for d in self.duration_range))
        n = len(self.activities)
        adj = np.asarray(self.transition)
        if adj.shape != (n, n) or not np.isin(adj, (0, 1)).all():
            raise ValueError(f"transition must be a {n}x{n} 0/1 matrix")
        if len(self.labels) != n:
            raise ValueError("one label name per activity is required")
        lo, hi = self.duration_range
        if lo < 2 or hi < lo:
            raise ValueError(f"bad duration range {self.duration_range}")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        for a, b in self.activities:
            if not (0 <= a < len(self.landmarks) and 0 <= b < len(self.landmarks)):
                raise ValueError("activity references a missing landmark")
        if (adj.sum(axis=1) == 0).any():
            raise ValueError("every activity row needs at least one allowed successor")
        unreachable = set(range(n)) - _reachable(adj)
        if unreachable:
            raise ValueError(f"activities {sorted(unreachable)} cannot be reached from a start activity")

    @property
    def adjacency(self) -> np.ndarray:
        return np.asarray(self.transition, dtype=np.int64)

    @property
    def label_space(self) -> LabelSpace:
        return LabelSpace(self.labels)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rng"] = RNG_NAME
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        d = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**d)


def _start_activities(adj: np.ndarray) -> list[int]:
    off = adj.astype(bool) & ~np.eye(adj.shape[0], dtype=bool)
    starts = [j for j in range(adj.shape[0]) if not off[:, j].any()]
    return starts or list(range(adj.shape[0]))


def _reachable(adj: np.ndarray) -> set[int]:
    seen, todo = set(), list(_start_activities(adj))
    while todo:
        a = todo.pop()
        if a in seen:
            continue
        seen.add(a)
        todo.extend(int(b) for b in np.flatnonzero(adj[a]))
    return seen


def sample_path(spec: ScenarioSpec, rng: np.random.Generator) -> list[int]:
    """Activity sequence: start at a source activity, follow non-self edges.

    The walk stops at an activity with no other successor or after
    ``max_path`` activities.
    """
    adj = spec.adjacency
    n = adj.shape[0]
    limit = spec.max_path or 2 * n
    starts = _start_activities(adj)
    path = [starts[int(rng.integers(len(starts)))]]
    while len(path) < limit:
        succ = [b for b in np.flatnonzero(adj[path[-1]]) if b != path[-1]]
        if not succ:
            break
        path.append(int(succ[int(rng.integers(len(succ)))]))
    return path


def generate_sequence(spec: ScenarioSpec, rng: np.random.Generator, path=None):
    """One ``(track, labels)`` pair following ``path`` (sampled when omitted)."""
    if path is None:
        path = sample_path(spec, rng)
    lo, hi = spec.duration_range
    marks = np.asarray(spec.landmarks, dtype=float)
    points, labels = [], []
    for act in path:
        d = int(rng.integers(lo, hi + 1))
        a, b = spec.activities[act]
        frac = np.linspace(0.0, 1.0, d)[:, None]
        points.append(marks[a] + frac * (marks[b] - marks[a]))
        labels += [act] * d
    track = np.concatenate(points)
    if spec.noise_std > 0:
        track = track + rng.normal(0.0, spec.noise_std, size=track.shape)
    return track, np.asarray(labels, dtype=np.int64)


def generate_dataset(spec: ScenarioSpec) -> tuple[Dataset, Dataset]:
    """Fully labelled ``(train, test)`` datasets, deterministic in ``spec.seed``."""
    children = np.random.SeedSequence(spec.seed).spawn(spec.n_train + spec.n_test)
    seqs = []
    for child in children:
        track, y = generate_sequence(spec, np.random.default_rng(child))
        seqs.append(LabeledSequence(ObservationSequence.from_track(track), y, y))
    header = {"generator": spec.to_dict()}
    ls = spec.label_space
    train = Dataset(ls, seqs[: spec.n_train], {**header, "split": "train"})
    test = Dataset(ls, seqs[spec.n_train:], {**header, "split": "test"})
    return train, test


def mask_labels(dataset: Dataset, fraction: float, seed: int) -> Dataset:
    """Keep a uniformly random ``ceil(fraction * T)`` slices observed per sequence."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    children = np.random.SeedSequence(seed).spawn(len(dataset))
    out = []
    for s, child in zip(dataset.sequences, children):
        truth = s.truth if s.truth is not None else s.labels
        if np.any(truth == HIDDEN):
            raise ValueError("masking needs fully labelled sequences")
        T = len(s)
        keep = max(1, math.ceil(fraction * T - 1e-12))
        idx = np.random.default_rng(child).choice(T, size=keep, replace=False)
        labels = np.full(T, HIDDEN, dtype=np.int64)
        labels[idx] = truth[idx]
        out.append(LabeledSequence(s.x, labels, truth))
    header = {**dataset.header, "mask": {"fraction": fraction, "seed": seed}}
    return Dataset(dataset.label_space, out, header)


def default_scenario(seed: int = 0, **overrides) -> ScenarioSpec:
    return ScenarioSpec(seed=seed, **overrides)
