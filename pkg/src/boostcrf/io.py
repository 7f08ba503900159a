"""Plain-text formats for datasets, models, traces, predictions and manifests.

Dataset: JSON Lines.  The first line is a header record
``{"format": "boostcrf-dataset", "version": 1, "labels": [...], ...}``;
each following line is one sequence
``{"track": [[X, Y], ...], "labels": [...], "observed": [...]}`` with label
*names* and a 0/1 observed mask.

Model: one JSON document with format version, label names, normalisation
statistics, feature descriptors and weights written with 17 significant
digits, so save -> load -> save is byte-identical.

Infinite sigma is spelled ``"inf"``.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .model import HIDDEN, Dataset, Feature, LabelSpace, LabeledSequence, Model, NormStats, \
    ObservationSequence

DATASET_FORMAT = "boostcrf-dataset"
MODEL_FORMAT = "boostcrf-model"
FORMAT_VERSION = 1


class FormatError(ValueError):
    """A file does not follow the expected format; the message names the place."""


def fmt_float(v: float) -> str:
    v = float(v)
    if math.isinf(v):
        return '"inf"' if v > 0 else '"-inf"'
    if math.isnan(v):
        raise ValueError("NaN cannot be serialised")
    return format(v, ".17g")


def parse_float(v) -> float:
    if isinstance(v, str):
        if v in ("inf", "-inf"):
            return float(v)
        raise ValueError(f"expected a number or 'inf', got {v!r}")
    return float(v)


def jsonable(obj):
    """Convert numpy scalars/arrays and infinities for ``json.dumps``."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, separators=(",", ":"))


# -- datasets ----------------------------------------------------------------


def _line(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, separators=(",", ":"))


def save_dataset(dataset: Dataset, path) -> None:
    names = dataset.label_space.names
    lines = [_line({"format": DATASET_FORMAT, "version": FORMAT_VERSION,
                    "labels": list(names), **{k: v for k, v in dataset.header.items()
                                              if k not in ("format", "version", "labels")}})]
    for s in dataset.sequences:
        truth = s.truth if s.truth is not None else s.labels
        lines.append(_line({
            "track": s.x.track.tolist(),
            "labels": [names[l] if l >= 0 else None for l in truth],
            "observed": [int(o) for o in s.observed],
        }))
    Path(path).write_text("\n".join(lines) + "\n")


def load_dataset(path) -> Dataset:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines:
        raise FormatError(f"{path}: empty file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}:1: invalid JSON ({e.msg})") from None
    if header.get("format") != DATASET_FORMAT:
        raise FormatError(f"{path}:1: field 'format' must be {DATASET_FORMAT!r}")
    if header.get("version") != FORMAT_VERSION:
        raise FormatError(f"{path}:1: unsupported version {header.get('version')!r}")
    try:
        ls = LabelSpace(tuple(header["labels"]))
    except (KeyError, ValueError) as e:
        raise FormatError(f"{path}:1: field 'labels': {e}") from None
    index = {n: i for i, n in enumerate(ls.names)}
    seqs = []
    for lineno, text in enumerate(lines[1:], start=2):
        if not text.strip():
            continue
        try:
            rec = json.loads(text)
        except json.JSONDecodeError as e:
            raise FormatError(f"{path}:{lineno}: invalid JSON ({e.msg})") from None
        for key in ("track", "labels", "observed"):
            if key not in rec:
                raise FormatError(f"{path}:{lineno}: missing field {key!r}")
        try:
            track = np.asarray(rec["track"], dtype=float).reshape(-1, 2)
        except (TypeError, ValueError):
            raise FormatError(f"{path}:{lineno}: field 'track' must be a list of [X, Y]") from None
        names, observed = rec["labels"], rec["observed"]
        if len(names) != len(track) or len(observed) != len(track):
            raise FormatError(f"{path}:{lineno}: 'track', 'labels' and 'observed' lengths differ")
        try:
            truth_idx = [index[str(n)] if n is not None else HIDDEN for n in names]
        except KeyError as e:
            raise FormatError(f"{path}:{lineno}: field 'labels': unknown label {e.args[0]!r}") from None
        truth = np.asarray(truth_idx, dtype=np.int64)
        obs = np.asarray(observed, dtype=bool)
        if np.any(obs & (truth == HIDDEN)):
            raise FormatError(f"{path}:{lineno}: observed slice without a label")
        labels = np.where(obs, truth, HIDDEN)
        complete = None if np.any(truth == HIDDEN) else truth
        try:
            x = ObservationSequence.from_track(track)
        except ValueError as e:
            raise FormatError(f"{path}:{lineno}: field 'track': {e}") from None
        seqs.append(LabeledSequence(x, labels, complete))
    rest = {k: v for k, v in header.items() if k not in ("format", "version", "labels")}
    return Dataset(ls, seqs, rest)


# -- models ------------------------------------------------------------------


def model_to_text(model: Model) -> str:
    feats = ",\n".join(
        "    " + json.dumps({"id": f.id, "kind": f.kind, "params": f.params()}, sort_keys=True)
        for f in model.features
    )
    mean = ", ".join(fmt_float(v) for v in model.norm_stats.mean)
    std = ", ".join(fmt_float(v) for v in model.norm_stats.std)
    weights = ",\n".join("    " + fmt_float(w) for w in model.weights)
    return (
        "{\n"
        f'  "format": "{MODEL_FORMAT}",\n'
        f'  "version": {FORMAT_VERSION},\n'
        f'  "labels": {json.dumps(list(model.label_space.names))},\n'
        f'  "norm_stats": {{"mean": [{mean}], "std": [{std}]}},\n'
        f'  "features": [\n{feats}\n  ],\n'
        f'  "weights": [\n{weights}\n  ]\n'
        "}\n"
    )


def model_from_text(text: str, source: str = "<model>") -> Model:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"{source}:{e.lineno}: invalid JSON ({e.msg})") from None
    if doc.get("format") != MODEL_FORMAT:
        raise FormatError(f"{source}: field 'format' must be {MODEL_FORMAT!r}")
    if doc.get("version") != FORMAT_VERSION:
        raise FormatError(f"{source}: unsupported version {doc.get('version')!r}")
    try:
        ls = LabelSpace(tuple(doc["labels"]))
        ns = NormStats(tuple(doc["norm_stats"]["mean"]), tuple(doc["norm_stats"]["std"]))
        feats = [Feature.from_params(int(f["id"]), f["kind"], f["params"]) for f in doc["features"]]
        weights = np.array([parse_float(w) for w in doc["weights"]])
        return Model(ls, feats, weights, ns)
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"{source}: {type(e).__name__}: {e}") from None


def save_model(model: Model, path) -> None:
    Path(path).write_text(model_to_text(model))


def load_model(path) -> Model:
    return model_from_text(Path(path).read_text(), str(path))


# -- predictions, traces, reports -------------------------------------------


def save_predictions(predictions, label_space: LabelSpace, path) -> None:
    lines = [_line({"format": "boostcrf-predictions", "version": FORMAT_VERSION,
                    "labels": list(label_space.names)})]
    lines += [_line({"labels": [label_space.names[l] for l in p]}) for p in predictions]
    Path(path).write_text("\n".join(lines) + "\n")


def load_predictions(path, label_space: LabelSpace | None = None):
    lines = Path(path).read_text().splitlines()
    header = json.loads(lines[0])
    if header.get("format") != "boostcrf-predictions":
        raise FormatError(f"{path}:1: field 'format' must be 'boostcrf-predictions'")
    names = header["labels"]
    if label_space is not None and tuple(names) != label_space.names:
        raise FormatError(f"{path}:1: label set {names} does not match {list(label_space.names)}")
    index = {n: i for i, n in enumerate(names)}
    out = []
    for lineno, text in enumerate(lines[1:], start=2):
        try:
            out.append(np.array([index[n] for n in json.loads(text)["labels"]], dtype=np.int64))
        except (KeyError, json.JSONDecodeError) as e:
            raise FormatError(f"{path}:{lineno}: bad prediction record ({e})") from None
    return out


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(jsonable(obj), sort_keys=True, indent=2) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())
