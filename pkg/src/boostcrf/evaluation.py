"""Per-label error, macro F1 and transition-model recovery."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .model import Model


@dataclass(frozen=True, eq=False)
class EvalReport:
    per_label_error: float
    macro_f1: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    n_slices: int
    n_excluded: int

    @property
    def accuracy(self) -> float:
        return 1.0 - self.per_label_error

    def rows(self, label_names=None) -> list[dict]:
        names = label_names or [str(i) for i in range(len(self.support))]
        return [
            {"label": names[l], "precision": float(self.precision[l]),
             "recall": float(self.recall[l]), "f1": float(self.f1[l]),
             "support": int(self.support[l])}
            for l in range(len(self.support))
        ]

    def render(self, label_names=None) -> str:
        lines = [f"{'label':>8} {'prec':>7} {'recall':>7} {'f1':>7} {'support':>8}"]
        for r in self.rows(label_names):
            lines.append(f"{r['label']:>8} {r['precision']:7.4f} {r['recall']:7.4f} "
                         f"{r['f1']:7.4f} {r['support']:8d}")
        lines.append(f"per-label error {self.per_label_error:.4f} over {self.n_slices} slices")
        lines.append(f"macro F1 {self.macro_f1:.4f} ({self.n_excluded} zero-support labels excluded)")
        return "\n".join(lines)


def _flatten(seqs) -> np.ndarray:
    seqs = list(seqs)
    if seqs and np.ndim(seqs[0]) == 0:
        return np.asarray(seqs, dtype=np.int64)
    return np.concatenate([np.asarray(s, dtype=np.int64).reshape(-1) for s in seqs]) if seqs \
        else np.zeros(0, dtype=np.int64)


def evaluate(predictions, ground_truth, n_labels: int | None = None) -> EvalReport:
    """Score predicted against true labels.

    Both arguments are label-index sequences, or lists of them with matching
    lengths.  Macro F1 averages only labels present in the ground truth.
    """
    pred_list, true_list = list(predictions), list(ground_truth)
    if len(pred_list) != len(true_list):
        raise ValueError(f"{len(pred_list)} predictions for {len(true_list)} sequences")
    for p, t in zip(pred_list, true_list):
        if np.shape(p) != np.shape(t):
            raise ValueError(f"length mismatch: {np.shape(p)} vs {np.shape(t)}")
    pred, true = _flatten(pred_list), _flatten(true_list)
    if pred.size == 0:
        raise ValueError("nothing to evaluate")
    L = n_labels or int(max(pred.max(), true.max())) + 1
    conf = np.zeros((L, L), dtype=np.int64)
    np.add.at(conf, (true, pred), 1)
    tp = np.diag(conf).astype(float)
    predicted = conf.sum(axis=0).astype(float)
    support = conf.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(predicted > 0, tp / predicted, 0.0)
        recall = np.where(support > 0, tp / support, 0.0)
        denom = precision + recall
        f1 = np.where(denom > 0, 2 * precision * recall / denom, 0.0)
    present = support > 0
    error = 1.0 - tp.sum() / pred.size
    return EvalReport(float(error), float(f1[present].mean()), precision, recall, f1,
                      support, int(pred.size), int((~present).sum()))


def transition_weights(model: Model):
    """``(weights, selected)`` label-label matrices of a model.

    Transitions without a label-label feature read as weight 0, unselected.
    Persistence features populate only the diagonal.
    """
    L = model.n_labels
    weights = np.zeros((L, L))
    selected = np.zeros((L, L), dtype=bool)
    found = False
    for f, w in zip(model.features, model.weights):
        if f.is_label_label:
            found = True
            weights[f.l1, f.l2] += w
            selected[f.l1, f.l2] |= w != 0
    if not found:
        raise ValueError("model has no label-label (persist or bridge) features")
    return weights, selected


def recover_transition_matrix(model: Model) -> np.ndarray:
    """0/1 transition matrix: 1 where the label-label weight is non-negative."""
    weights, selected = transition_weights(model)
    if not selected.any():
        warnings.warn("all label-label weights are zero; the recovered matrix is all ones",
                      RuntimeWarning, stacklevel=2)
    return (weights >= 0).astype(np.int64)
