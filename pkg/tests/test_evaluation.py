import numpy as np
import pytest

from boostcrf import Feature, LabelSpace, Model, evaluate, recover_transition_matrix
from boostcrf.evaluation import transition_weights


def test_perfect_prediction():
    r = evaluate([[0, 1, 2], [2, 2]], [[0, 1, 2], [2, 2]])
    assert r.per_label_error == 0.0 and r.macro_f1 == 1.0 and r.accuracy == 1.0


def test_all_wrong_on_two_labels():
    r = evaluate([1, 0, 0, 1], [0, 1, 1, 0])
    assert r.per_label_error == 1.0 and r.macro_f1 == 0.0


def test_three_label_confusion_matches_tally():
    truth = [0, 0, 0, 1, 1, 2, 2, 2, 2, 1]
    pred = [0, 1, 0, 1, 2, 2, 2, 0, 2, 1]
    r = evaluate(pred, truth)
    for l in range(3):
        tp = sum(p == l and t == l for p, t in zip(pred, truth))
        fp = sum(p == l and t != l for p, t in zip(pred, truth))
        fn = sum(p != l and t == l for p, t in zip(pred, truth))
        prec, rec = tp / (tp + fp), tp / (tp + fn)
        assert r.precision[l] == pytest.approx(prec)
        assert r.recall[l] == pytest.approx(rec)
        assert r.f1[l] == pytest.approx(2 * prec * rec / (prec + rec))
    assert r.per_label_error == pytest.approx(3 / 10)
    assert r.macro_f1 == pytest.approx(r.f1.mean())


def test_zero_support_labels_are_excluded():
    r = evaluate([0, 1, 2], [0, 1, 1], n_labels=4)
    assert r.n_excluded == 2
    assert r.macro_f1 == pytest.approx((1.0 + 2 / 3) / 2)


def test_length_mismatch_rejected():
    with pytest.raises(ValueError):
        evaluate([[0, 1]], [[0, 1, 1]])
    with pytest.raises(ValueError):
        evaluate([[0]], [[0], [1]])


def test_permutation_and_relabeling_invariance(rng):
    truth = [rng.integers(4, size=int(rng.integers(1, 9))) for _ in range(6)]
    pred = [np.where(rng.random(len(t)) < 0.7, t, rng.integers(4, size=len(t))) for t in truth]
    base = evaluate(pred, truth, 4)
    order = rng.permutation(6)
    perm = rng.permutation(4)
    shuffled = evaluate([perm[pred[i]] for i in order], [perm[truth[i]] for i in order], 4)
    assert shuffled.per_label_error == pytest.approx(base.per_label_error)
    assert shuffled.macro_f1 == pytest.approx(base.macro_f1)


def bridge_model(W):
    L = len(W)
    feats = [Feature(a * L + b, "bridge", a, b) for a in range(L) for b in range(L)]
    return Model(LabelSpace.of_size(L), feats, np.asarray(W, dtype=float).reshape(-1))


def test_table_row_example():
    W = np.zeros((5, 5))
    W[2] = (-5904.9, -5904.9, 2.425, 0.0, -5904.9)
    W[[0, 1, 3, 4]] = -1.0
    assert recover_transition_matrix(bridge_model(W))[2].tolist() == [0, 0, 1, 1, 0]


def test_zero_weights_warn_and_give_all_ones():
    with pytest.warns(RuntimeWarning, match="all label-label weights are zero"):
        R = recover_transition_matrix(bridge_model(np.zeros((3, 3))))
    assert R.tolist() == [[1] * 3] * 3


def test_recovery_depends_only_on_signs(rng):
    W = rng.normal(size=(4, 4))
    R = recover_transition_matrix(bridge_model(W))
    assert np.array_equal(R, recover_transition_matrix(bridge_model(W * rng.uniform(0.1, 50, W.shape))))


def test_unselected_weights_are_flagged():
    W = np.array([[1.0, 0.0], [-2.0, 0.0]])
    weights, selected = transition_weights(bridge_model(W))
    assert selected.tolist() == [[True, False], [True, False]]


def test_models_without_label_label_features_are_rejected():
    m = Model.zeros(LabelSpace.of_size(2), [Feature(0, "transition", 0, 1, 0)])
    with pytest.raises(ValueError, match="label-label"):
        recover_transition_matrix(m)
