"""Boosted training of chain models under the hidden-variable exponential loss.

The loss of a model on partially labelled data is ``sum_i 1 / p(v_i | x_i)``
plus an optional l2 penalty.  Each round scores every feature by the
quadratic model of the round-frozen objective

    J(alpha, k) = sum_i E_{h | v_i, t} [ sum_v exp(dF + alpha * df_k) ]

whose derivatives at ``alpha = 0`` reduce to clique marginals:

    J'  = sum_i w_i sum_c sum_{y_c} p(y_c | x_i) df_k(y_c)
    J'' <= kappa * sum_i w_i sum_c sum_{y_c} p(y_c | x_i) df_k(y_c)**2

with ``w_i = 1 / p(v_i | x_i)`` and ``df_k(y_c) = f_k(y_c) - f_k(y_c with
its visible coordinates overwritten by the observed labels)``.  The best
features take a Newton step refined by Armijo backtracking on the exact loss.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .features import compile_features, compute_norm_stats
from .inference import ChainBatch, enumerate_scores, forward, forward_backward
from .model import HIDDEN, Dataset, LabeledSequence, Model, NormStats, check_partial

logger = logging.getLogger(__name__)

MAX_LOG_WEIGHT = 700.0


class TrainingDiverged(RuntimeError):
    """A sequence weight ``1/p(v|x)`` left the floating-point range."""


@dataclass(frozen=True)
class BoostConfig:
    rounds: int = 100
    beam_size: int = 1
    sigma: float = math.inf
    armijo_c1: float = 1e-4
    backtrack_factor: float = 0.5
    max_backtracks: int = 50
    kappa: float = 1.0
    # next-ranked candidates tried when a selected feature admits no Armijo step
    max_substitutes: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        if self.beam_size < 1:
            raise ValueError("beam size must be >= 1")
        if not self.sigma > 0:
            raise ValueError("sigma must lie in (0, inf]")
        if not 0 < self.armijo_c1 < 1:
            raise ValueError("armijo_c1 must lie in (0, 1)")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if self.max_backtracks < 1 or self.kappa <= 0:
            raise ValueError("max_backtracks and kappa must be positive")


@dataclass(frozen=True)
class CandidateStats:
    k: int
    grad: float
    curv_bound: float
    score: float

    @property
    def newton_step(self) -> float:
        return -self.grad / self.curv_bound if self.curv_bound > 0 else 0.0


@dataclass
class RoundRecord:
    selected: list[int]
    steps: list[float]
    loss: float
    n_active: int


@dataclass
class TrainTrace:
    initial_loss: float
    rounds: list[RoundRecord] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def losses(self) -> np.ndarray:
        return np.array([self.initial_loss] + [r.loss for r in self.rounds])

    def to_dict(self) -> dict:
        return {"initial_loss": self.initial_loss, "config": self.config,
                "rounds": [asdict(r) for r in self.rounds]}


def _sequences(data):
    return data.sequences if isinstance(data, Dataset) else tuple(data)


def _penalty(weights, sigma: float) -> float:
    if math.isinf(sigma):
        return 0.0
    return float(np.dot(weights, weights) / (2.0 * sigma ** 2))


def _inv_sigma2(sigma: float) -> float:
    return 0.0 if math.isinf(sigma) else 1.0 / sigma ** 2


class ExpLossProblem:
    """Exact exponential loss and its per-feature statistics over one dataset."""

    def __init__(self, model: Model, data, sigma: float = math.inf):
        seqs = _sequences(data)
        if not seqs:
            raise ValueError("empty training set")
        for i, s in enumerate(seqs):
            if not np.any(s.labels != HIDDEN):
                raise ValueError(f"sequence {i} has no observed label")
        self.model = model
        self.sigma = sigma
        self.batch = ChainBatch.from_model(model, seqs)

    def log_weights(self, node, edge) -> np.ndarray:
        b = self.batch
        _, log_z = forward(node, edge)
        _, log_zv = forward(b.clamped(node), edge)
        return log_z - log_zv

    def _check(self, log_w):
        worst = float(np.max(log_w))
        if worst > MAX_LOG_WEIGHT:
            raise TrainingDiverged(
                f"log(1/p(v|x)) reached {worst:.1f} > {MAX_LOG_WEIGHT:g}; "
                "weights diverged, use a finite sigma"
            )

    def loss(self, weights) -> float:
        node, edge = self.batch.potentials(weights)
        log_w = self.log_weights(node, edge)
        self._check(log_w)
        return float(np.exp(log_w).sum()) + _penalty(weights, self.sigma)

    def sequence_weights(self, weights) -> np.ndarray:
        node, edge = self.batch.potentials(weights)
        log_w = self.log_weights(node, edge)
        self._check(log_w)
        return np.exp(log_w)

    def stats(self, weights, kappa=1.0):
        """Regularised ``(grad, curv_bound)`` arrays over all features.

        ``kappa="cliques"`` uses each sequence's clique count, which makes
        the curvature a true upper bound on the second derivative.
        """
        b = self.batch
        weights = np.asarray(weights, dtype=float)
        node, edge = b.potentials(weights)
        log_z, pn, pe = forward_backward(node, edge)
        _, log_zv = forward(b.clamped(node), edge)
        log_w = log_z - log_zv
        self._check(log_w)
        w = np.exp(log_w)
        wc = w * (b.n_cliques if kappa == "cliques" else float(kappa))

        obs = b.observed
        onehot = b.onehot
        n1 = obs[..., None] * (pn - onehot)
        n2 = obs[..., None] * (pn + onehot - 2.0 * onehot * pn)

        # edge (t-1, t): a visible endpoint is overwritten by its observed label
        L = b.n_labels
        eye = np.eye(L)
        A = np.where(obs[:, :-1, None, None], onehot[:, :-1, None, :], eye)
        B = np.where(obs[:, 1:, None, None], onehot[:, 1:, None, :], eye)
        P = pe[:, 1:]
        Q = np.einsum("ntal,ntab,ntbm->ntlm", A, P, B)
        R = P * np.diagonal(A, axis1=2, axis2=3)[..., :, None] * np.diagonal(B, axis1=2, axis2=3)[..., None, :]
        ev = b.edge_valid[:, 1:, None, None]
        e1 = (P - Q) * ev
        e2 = (P + Q - 2.0 * R) * ev

        vals = b.values
        vals2 = vals ** 2
        s1n = np.einsum("n,ntc,ntl->cl", w, vals, n1)
        s2n = np.einsum("n,ntc,ntl->cl", wc, vals2, n2)
        s1e = np.einsum("n,ntc,ntab->cab", w, vals[:, 1:], e1)
        s2e = np.einsum("n,ntc,ntab->cab", wc, vals2[:, 1:], e2)
        tab = b.table
        grad = tab.gather(s1n, s1e) + weights * _inv_sigma2(self.sigma)
        curv = np.maximum(tab.gather(s2n, s2e), 0.0) + _inv_sigma2(self.sigma)
        return grad, curv

    def loss_along(self, base, k: int):
        """Closure ``alpha -> exact regularised loss at weights + alpha e_k``."""
        weights = np.asarray(base, dtype=float)
        node, edge = self.batch.potentials(weights)
        dn, de = self.batch.unit_potentials(k)

        def f(alpha: float) -> float:
            w = weights.copy()
            w[k] += alpha
            log_w = self.log_weights(node + alpha * dn, edge + alpha * de)
            self._check(log_w)
            return float(np.exp(log_w).sum()) + _penalty(w, self.sigma)

        return f


def scores_from(grad, curv) -> np.ndarray:
    out = np.zeros_like(grad)
    ok = curv > 0
    out[ok] = -0.5 * grad[ok] ** 2 / curv[ok]
    return out


def sequence_weights(model: Model, data) -> np.ndarray:
    """``w_i = 1 / p(v_i | x_i)`` for every sequence."""
    return ExpLossProblem(model, data).sequence_weights(model.weights)


def exp_loss(model: Model, data, sigma: float = math.inf) -> float:
    """Exact regularised exponential loss ``sum_i 1/p(v_i|x_i) + |w|^2 / 2 sigma^2``."""
    return ExpLossProblem(model, data, sigma).loss(model.weights)


def all_candidate_stats(model: Model, data, sigma: float = math.inf, kappa=1.0) -> list[CandidateStats]:
    grad, curv = ExpLossProblem(model, data, sigma).stats(model.weights, kappa)
    score = scores_from(grad, curv)
    return [CandidateStats(k, float(grad[k]), float(curv[k]), float(score[k]))
            for k in range(len(grad))]


def candidate_stats(model: Model, data, k: int, sigma: float = math.inf, kappa=1.0) -> CandidateStats:
    return all_candidate_stats(model, data, sigma, kappa)[k]


def select_beam(stats, S: int) -> list[int]:
    """Ids of the ``S`` most negative scores, ties going to the lower id."""
    if S > len(stats):
        raise ValueError(f"beam size {S} exceeds the {len(stats)} candidates")
    ranked = sorted(stats, key=lambda s: (s.score, s.k))
    return [s.k for s in ranked[:S]]


def armijo_backtrack(loss_at, loss0: float, grad: float, alpha0: float,
                     c1: float, factor: float, max_backtracks: int) -> tuple[float, float]:
    """Backtrack from ``alpha0`` until sufficient decrease; ``(0, loss0)`` on failure."""
    if grad == 0 or alpha0 == 0 or not np.isfinite(alpha0):
        return 0.0, loss0
    alpha = alpha0
    # a decrease smaller than this is indistinguishable from rounding in loss0
    resolution = 8 * np.finfo(float).eps * abs(loss0)
    for _ in range(max_backtracks):
        if c1 * abs(alpha * grad) < resolution:
            break
        try:
            trial = loss_at(alpha)
        except TrainingDiverged:
            trial = math.inf
        # strict decrease too: in floating point the Armijo slack can vanish
        if trial <= loss0 + c1 * alpha * grad and trial < loss0:
            return alpha, trial
        alpha *= factor
    return 0.0, loss0


def line_search_step(model: Model, data, k: int, alpha0: float,
                     config: BoostConfig = BoostConfig(), grad: float | None = None) -> float:
    """Accepted step along feature ``k`` starting from the Newton step ``alpha0``."""
    problem = ExpLossProblem(model, data, config.sigma)
    if grad is None:
        g, _ = problem.stats(model.weights, config.kappa)
        grad = float(g[k])
    loss0 = problem.loss(model.weights)
    alpha, _ = armijo_backtrack(problem.loss_along(model.weights, k), loss0, grad, alpha0,
                                config.armijo_c1, config.backtrack_factor, config.max_backtracks)
    return alpha


def train_boost(data: Dataset, features, config: BoostConfig = BoostConfig(),
                norm_stats: NormStats | None = None) -> tuple[Model, TrainTrace]:
    """Greedy boosting from the zero model for ``config.rounds`` rounds.

    Each round refreshes the posteriors, ranks every feature by its predicted
    loss change and updates the top ``beam_size`` features one after another,
    recomputing the statistics after every accepted step.  A selected feature
    that admits no Armijo step is replaced by the next-ranked candidate, at
    most ``max_substitutes`` times per round.
    """
    seqs = _sequences(data)
    if not seqs:
        raise ValueError("empty training set")
    if norm_stats is None:
        norm_stats = compute_norm_stats([s.x.g for s in seqs])
    model = Model.zeros(data.label_space, features, norm_stats)
    K = len(model.features)
    problem = ExpLossProblem(model, seqs, config.sigma)
    weights = np.zeros(K)
    loss = problem.loss(weights)
    trace = TrainTrace(initial_loss=loss, config=asdict(config))
    cfg = config

    for r in range(cfg.rounds):
        grad, curv = problem.stats(weights, cfg.kappa)
        score = scores_from(grad, curv)
        ranking = [int(k) for k in np.lexsort((np.arange(K), score)) if score[k] < 0]
        beam = ranking[: cfg.beam_size]
        reserve = ranking[cfg.beam_size:]
        selected, steps = [], []
        substitutes = 0
        fresh = True
        while beam:
            k = beam.pop(0)
            if not fresh:
                grad, curv = problem.stats(weights, cfg.kappa)
            g, c = float(grad[k]), float(curv[k])
            alpha0 = -g / c if c > 0 else 0.0
            alpha, new_loss = armijo_backtrack(problem.loss_along(weights, k), loss, g, alpha0,
                                               cfg.armijo_c1, cfg.backtrack_factor,
                                               cfg.max_backtracks)
            if alpha != 0.0:
                weights[k] += alpha
                loss = new_loss
                fresh = False
                selected.append(k)
                steps.append(alpha)
            elif reserve and substitutes < cfg.max_substitutes:
                substitutes += 1
                beam.append(reserve.pop(0))
        n_active = int(np.count_nonzero(weights))
        trace.rounds.append(RoundRecord(selected, steps, loss, n_active))
        logger.debug("round %d: features %s steps %s loss %.6g", r, selected, steps, loss)
        if not selected:
            # nothing improves the loss; later rounds would repeat this one
            for _ in range(r + 1, cfg.rounds):
                trace.rounds.append(RoundRecord([], [], loss, n_active))
            break
    return model.with_weights(weights), trace


def overwrite_index(Y: np.ndarray, v: np.ndarray, n_labels: int) -> np.ndarray:
    """Row index in ``Y`` of each labelling with its visible slots set to ``v``."""
    obs = v >= 0
    Yo = Y.copy()
    Yo[:, obs] = v[obs]
    T = Y.shape[1]
    radix = n_labels ** np.arange(T - 1, -1, -1)
    return Yo @ radix


def rank_loss_exact(model: Model, data) -> float:
    """Expected ranking loss by enumeration (small instances only).

    For every hidden completion ``h`` weighted by ``p(h | v_i)``, counts
    visible labellings ``v != v_i`` scoring strictly above ``(v_i, h)``.
    """
    total = 0.0
    for s in _sequences(data):
        v = check_partial(s.labels, len(s), model.n_labels)
        Y, F = enumerate_scores(model, s.x)
        own = overwrite_index(Y, v, model.n_labels)
        obs = v >= 0
        consistent = np.all(Y[:, obs] == v[obs], axis=1)
        m = F[consistent].max()
        log_zv = m + np.log(np.exp(F[consistent] - m).sum())
        p_h = np.exp(F[own] - log_zv)
        wrong = ~consistent & (F - F[own] > 0)
        total += float(p_h[wrong].sum())
    return total
