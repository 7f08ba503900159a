"""Maximum-likelihood baseline: marginal NLL over hidden slices, minimised by L-BFGS."""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import line_search

from .boost import _inv_sigma2, _penalty, _sequences
from .features import compute_norm_stats
from .inference import ChainBatch, forward_backward
from .model import HIDDEN, Dataset, Model, NormStats

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MleConfig:
    sigma: float = math.inf
    memory: int = 10
    grad_tol: float = 1e-5
    max_iters: int = 500
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.memory < 1:
            raise ValueError("memory must be >= 1")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if not self.sigma > 0:
            raise ValueError("sigma must lie in (0, inf]")


@dataclass
class MleTrace:
    losses: list[float] = field(default_factory=list)
    grad_norms: list[float] = field(default_factory=list)
    steps: list[str] = field(default_factory=list)
    converged: bool = False
    message: str = ""
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


class NllProblem:
    def __init__(self, model: Model, data, sigma: float = math.inf):
        seqs = _sequences(data)
        if not seqs:
            raise ValueError("empty training set")
        for i, s in enumerate(seqs):
            if not np.any(s.labels != HIDDEN):
                raise ValueError(f"sequence {i} has no observed label")
        self.sigma = sigma
        self.batch = ChainBatch.from_model(model, seqs)

    def expectations(self, pn, pe) -> np.ndarray:
        b = self.batch
        sn = np.einsum("ntc,ntl->cl", b.values, pn * b.valid[..., None])
        se = np.einsum("ntc,ntab->cab", b.values, pe * b.edge_valid[..., None, None])
        return b.table.gather(sn, se)

    def __call__(self, weights):
        b = self.batch
        weights = np.asarray(weights, dtype=float)
        node, edge = b.potentials(weights)
        log_z, pn, pe = forward_backward(node, edge)
        log_zv, qn, qe = forward_backward(b.clamped(node), edge)
        loss = float(np.sum(log_z - log_zv)) + _penalty(weights, self.sigma)
        grad = self.expectations(pn, pe) - self.expectations(qn, qe)
        grad += weights * _inv_sigma2(self.sigma)
        return loss, grad


def nll_and_grad(model: Model, data, sigma: float = math.inf):
    """Regularised marginal negative log-likelihood and its gradient.

    ``loss = -sum_i log p(v_i | x_i) + |w|^2 / 2 sigma^2``; the gradient is
    the free-model minus the clamped-model feature expectation.
    """
    return NllProblem(model, data, sigma)(model.weights)


def two_loop(grad: np.ndarray, pairs) -> np.ndarray:
    """L-BFGS search direction ``-H grad`` from stored ``(s, y)`` pairs."""
    q = grad.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * np.dot(s, q)
        q -= a * y
        alphas.append(a)
    if pairs:
        s, y, _ = pairs[-1]
        q *= np.dot(s, y) / np.dot(y, y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        q += s * (a - rho * np.dot(y, q))
    return -q


def minimize_lbfgs(fun, x0, config: MleConfig, trace: MleTrace):
    """Minimise ``fun(x) -> (f, g)`` with limited-memory BFGS and a Wolfe search.

    If the line search fails along the quasi-Newton direction the memory is
    dropped and one steepest-descent step is tried; a second consecutive
    failure terminates.
    """
    x = np.asarray(x0, dtype=float).copy()
    cache = {}

    def evaluate(z):
        key = z.tobytes()
        if key not in cache:
            cache.clear()
            cache[key] = fun(z)
        return cache[key]

    f, g = evaluate(x)
    trace.losses.append(f)
    trace.grad_norms.append(float(np.max(np.abs(g), initial=0.0)))
    pairs = deque(maxlen=config.memory)
    fallback = False
    f_prev = None
    for it in range(config.max_iters):
        if trace.grad_norms[-1] <= config.grad_tol:
            trace.converged = True
            trace.message = f"gradient inf-norm <= {config.grad_tol:g}"
            return x
        d = two_loop(g, list(pairs)) if not fallback else -g
        if np.dot(d, g) >= 0:
            d = -g
        if f_prev is None or not pairs:
            # first-step length guess, as in scipy's BFGS
            f_prev = f + np.linalg.norm(g) / 2
        res = line_search(lambda z: evaluate(z)[0], lambda z: evaluate(z)[1], x, d,
                          gfk=g, old_fval=f, old_old_fval=f_prev,
                          c1=config.wolfe_c1, c2=config.wolfe_c2, amax=1e6)
        alpha = res[0]
        if alpha is None or not np.isfinite(alpha) or alpha <= 0:
            if fallback:
                trace.message = "line search failed twice; stopping"
                return x
            fallback = True
            pairs.clear()
            continue
        x_new = x + alpha * d
        f_new, g_new = evaluate(x_new)
        if not f_new <= f:
            if fallback:
                trace.message = "no decrease along steepest descent; stopping"
                return x
            fallback = True
            pairs.clear()
            continue
        s, y = x_new - x, g_new - g
        sy = float(np.dot(s, y))
        if sy > 1e-12 * np.dot(y, y):
            pairs.append((s, y, 1.0 / sy))
        trace.steps.append("sd" if fallback else "qn")
        fallback = False
        f_prev, f, g, x = f, f_new, g_new, x_new
        trace.losses.append(f)
        trace.grad_norms.append(float(np.max(np.abs(g), initial=0.0)))
        logger.debug("iter %d: loss %.8g |g|inf %.3g", it, f, trace.grad_norms[-1])
    if trace.grad_norms[-1] <= config.grad_tol:
        trace.converged = True
        trace.message = f"gradient inf-norm <= {config.grad_tol:g}"
    else:
        trace.message = "max_iters reached"
    return x


def train_mle(data: Dataset, features, config: MleConfig = MleConfig(),
              norm_stats: NormStats | None = None) -> tuple[Model, MleTrace]:
    """Fit all feature weights from zero by L-BFGS on the marginal NLL."""
    seqs = _sequences(data)
    if not seqs:
        raise ValueError("empty training set")
    if norm_stats is None:
        norm_stats = compute_norm_stats([s.x.g for s in seqs])
    model = Model.zeros(data.label_space, features, norm_stats)
    problem = NllProblem(model, seqs, config.sigma)
    trace = MleTrace(config=asdict(config))
    weights = minimize_lbfgs(problem, np.zeros(len(model.features)), config, trace)
    return model.with_weights(weights), trace
