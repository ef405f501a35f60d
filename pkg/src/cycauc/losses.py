"""Surrogate losses for AUC maximization.

Two families live here.  The minimax surrogate rewrites the squared pairwise
loss (1 - h+ + h-)^2 as a per-example saddle function F(w, a, b, alpha; z)
with no explicit pair construction: a and b track the class-conditional mean
scores, alpha is the dual variable of the score-gap term, and p is the
positive-class prior.  The pairwise family covers general surrogates
psi(a, b) = phi(a - b) of the positive-minus-negative score gap, each with
exact derivatives (a subgradient at hinge kinks).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ClientDataset, Example, feature_matrix
from .models import ScoringModel


# ---------------------------------------------------------------------------
# Minimax surrogate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MinimaxState:
    """Primal triple (model, a, b) plus the dual scalar alpha."""

    model: ScoringModel
    a: float = 0.0
    b: float = 0.0
    alpha: float = 0.0

    def __post_init__(self) -> None:
        for name in ("a", "b", "alpha"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class MinimaxGrad:
    """Stochastic gradient of F: primal parts (g_w, g_a, g_b) and dual g_alpha."""

    g_w: np.ndarray
    g_a: float
    g_b: float
    g_alpha: float


@dataclass(frozen=True)
class ProxTerm:
    """Quadratic pull (gamma/2) ||v - anchor||^2 toward the stage anchor."""

    gamma: float
    anchor_w: np.ndarray
    anchor_a: float
    anchor_b: float

    def __post_init__(self) -> None:
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")


def _check_prior(p: float) -> None:
    if not 0.0 < p < 1.0:
        raise ValueError(f"positive prior p must be in (0, 1), got {p}")


def minimax_value(
    model: ScoringModel, a: float, b: float, alpha: float, z: Example, p: float
) -> float:
    """Per-example saddle value F(w, a, b, alpha; z).

    For a positive example: (1-p)(h-a)^2 - 2(1+alpha)(1-p)h - p(1-p)alpha^2.
    For a negative example: p(h-b)^2 + 2(1+alpha)p h - p(1-p)alpha^2.
    """
    _check_prior(p)
    h = model.score(z.features)
    if z.label == 1:
        return (1 - p) * (h - a) ** 2 - 2 * (1 + alpha) * (1 - p) * h - p * (1 - p) * alpha**2
    return p * (h - b) ** 2 + 2 * (1 + alpha) * p * h - p * (1 - p) * alpha**2


def minimax_stoch_grad(
    model: ScoringModel, a: float, b: float, alpha: float, z: Example, p: float
) -> MinimaxGrad:
    """Exact per-example partials of F, with dF/dw = (dF/dh) * grad h."""
    _check_prior(p)
    h, grad_h = model.score_grad(z.features)
    if z.label == 1:
        df_dh = 2 * (1 - p) * (h - a) - 2 * (1 + alpha) * (1 - p)
        g_a = -2 * (1 - p) * (h - a)
        g_b = 0.0
        g_alpha = -2 * (1 - p) * h - 2 * p * (1 - p) * alpha
    else:
        df_dh = 2 * p * (h - b) + 2 * (1 + alpha) * p
        g_a = 0.0
        g_b = -2 * p * (h - b)
        g_alpha = 2 * p * h - 2 * p * (1 - p) * alpha
    return MinimaxGrad(df_dh * grad_h, g_a, g_b, g_alpha)


def add_prox_grad(
    g: MinimaxGrad, model: ScoringModel, a: float, b: float, prox: ProxTerm
) -> MinimaxGrad:
    """Add gamma * (v - anchor) to the primal gradient components."""
    if prox.gamma == 0.0:
        return g
    if prox.anchor_w.shape != model.params.shape:
        raise ValueError("prox anchor does not match model parameter shape")
    return MinimaxGrad(
        g.g_w + prox.gamma * (model.params - prox.anchor_w),
        g.g_a + prox.gamma * (a - prox.anchor_a),
        g.g_b + prox.gamma * (b - prox.anchor_b),
        g.g_alpha,
    )


def optimal_dual(
    pos_scores: np.ndarray, neg_scores: np.ndarray, p: float | None = None
) -> tuple[float, float, float]:
    """Closed-form stationary point of the auxiliaries at fixed scores.

    a* and b* are the class-conditional mean scores and alpha* their gap
    (negative minus positive); the result does not depend on p.
    """
    pos_scores = np.asarray(pos_scores, dtype=np.float64)
    neg_scores = np.asarray(neg_scores, dtype=np.float64)
    if pos_scores.size == 0 or neg_scores.size == 0:
        raise ValueError("both score lists must be non-empty")
    a = float(pos_scores.mean())
    b = float(neg_scores.mean())
    return a, b, b - a


def minimax_objective(
    model: ScoringModel,
    datasets: list[ClientDataset],
    a: float,
    b: float,
    alpha: float,
    p: float,
) -> float:
    """Full-batch empirical saddle objective: mean of F over every example."""
    _check_prior(p)
    pos = [e for ds in datasets for e in ds.pos]
    neg = [e for ds in datasets for e in ds.neg]
    if not pos and not neg:
        raise ValueError("empty federation")
    a, b, alpha = np.float64(a), np.float64(b), np.float64(alpha)
    total = np.float64(0.0)
    n = len(pos) + len(neg)
    with np.errstate(over="ignore", invalid="ignore"):
        if pos:
            h = model.score_batch(feature_matrix(pos))
            total += np.sum((1 - p) * (h - a) ** 2 - 2 * (1 + alpha) * (1 - p) * h
                            - p * (1 - p) * alpha**2)
        if neg:
            h = model.score_batch(feature_matrix(neg))
            total += np.sum(p * (h - b) ** 2 + 2 * (1 + alpha) * p * h
                            - p * (1 - p) * alpha**2)
    return float(total / n)


# ---------------------------------------------------------------------------
# Pairwise surrogate family
# ---------------------------------------------------------------------------

class PairwiseLoss:
    """A surrogate psi(a, b) = phi(a - b) of the positive-minus-negative gap.

    Subclasses implement ``phi`` and its derivative ``dphi`` (vectorized in
    t).  By convention the first argument is always the positive-class score,
    so every member of the family is non-increasing in t = a - b.
    """

    def phi(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def dphi(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class SquareLoss(PairwiseLoss):
    """phi(t) = (m - t)^2."""

    m: float = 1.0

    def phi(self, t):
        return (self.m - np.asarray(t, dtype=np.float64)) ** 2

    def dphi(self, t):
        return -2.0 * (self.m - np.asarray(t, dtype=np.float64))


@dataclass(frozen=True)
class SquaredHingeLoss(PairwiseLoss):
    """phi(t) = max(0, m - t)^2."""

    m: float = 1.0

    def phi(self, t):
        return np.maximum(0.0, self.m - np.asarray(t, dtype=np.float64)) ** 2

    def dphi(self, t):
        return -2.0 * np.maximum(0.0, self.m - np.asarray(t, dtype=np.float64))


@dataclass(frozen=True)
class LogisticLoss(PairwiseLoss):
    """phi(t) = log(1 + exp(-s t))."""

    s: float = 1.0

    def __post_init__(self):
        if self.s <= 0:
            raise ValueError(f"logistic scale must be > 0, got {self.s}")

    def phi(self, t):
        return np.logaddexp(0.0, -self.s * np.asarray(t, dtype=np.float64))

    def dphi(self, t):
        # -s * sigma(-s t); sigma(-u) = exp(-logaddexp(0, u)) is stable on both tails.
        st = self.s * np.asarray(t, dtype=np.float64)
        return -self.s * np.exp(-np.logaddexp(0.0, st))


@dataclass(frozen=True)
class SigmoidLoss(PairwiseLoss):
    """phi(t) = 1 / (1 + exp(t / lam)); pointwise approaches 1 - AUC as lam -> 0."""

    lam: float = 1.0

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError(f"sigmoid scale must be > 0, got {self.lam}")

    def phi(self, t):
        u = np.asarray(t, dtype=np.float64) / self.lam
        # sigma(-u) = exp(-logaddexp(0, u)), stable on both tails.
        return np.exp(-np.logaddexp(0.0, u))

    def dphi(self, t):
        sig = self.phi(t)
        return -sig * (1.0 - sig) / self.lam


@dataclass(frozen=True)
class BarrierHingeLoss(PairwiseLoss):
    """phi(t) = max(m - tau (m + t), max(tau (t - m), m - t)).

    Piecewise linear and nonsmooth; at kink points the derivative is the
    left limit in t, which is the smallest slope among the tied pieces.
    """

    m: float = 1.0
    tau: float = 1.0

    def phi(self, t):
        t = np.asarray(t, dtype=np.float64)
        return np.maximum(self.m - self.tau * (self.m + t),
                          np.maximum(self.tau * (t - self.m), self.m - t))

    def dphi(self, t):
        t = np.asarray(t, dtype=np.float64)
        flat = t.reshape(-1)
        pieces = np.stack([self.m - self.tau * (self.m + flat),
                           self.tau * (flat - self.m),
                           self.m - flat])
        slopes = np.array([-self.tau, self.tau, -1.0])
        active = pieces >= pieces.max(axis=0)  # exact ties share the max
        # Left-limit convention: among tied pieces take the smallest slope.
        slope_grid = np.where(active, slopes[:, None], np.inf)
        return slope_grid.min(axis=0).reshape(t.shape)


@dataclass(frozen=True)
class QNormHingeLoss(PairwiseLoss):
    """phi(t) = max(0, m - t)^q with q > 1."""

    m: float = 1.0
    q: float = 2.0

    def __post_init__(self):
        if self.q <= 1:
            raise ValueError(f"q must be > 1, got {self.q}")

    def phi(self, t):
        return np.maximum(0.0, self.m - np.asarray(t, dtype=np.float64)) ** self.q

    def dphi(self, t):
        gap = np.maximum(0.0, self.m - np.asarray(t, dtype=np.float64))
        return -self.q * gap ** (self.q - 1.0)


_LOSS_FACTORIES = {
    "square": lambda m=1.0, **_: SquareLoss(m=m),
    "squared-hinge": lambda m=1.0, **_: SquaredHingeLoss(m=m),
    "logistic": lambda s=1.0, **_: LogisticLoss(s=s),
    "sigmoid": lambda lam=1.0, **_: SigmoidLoss(lam=lam),
    "barrier-hinge": lambda m=1.0, tau=1.0, **_: BarrierHingeLoss(m=m, tau=tau),
    "q-norm-hinge": lambda m=1.0, q=2.0, **_: QNormHingeLoss(m=m, q=q),
}


def make_pairwise_loss(name: str, **hyper: float) -> PairwiseLoss:
    """Build a loss from its config name and hyperparameters."""
    try:
        factory = _LOSS_FACTORIES[name]
    except KeyError:
        raise ValueError(
            f"unknown pairwise loss {name!r}; choose from {sorted(_LOSS_FACTORIES)}"
        ) from None
    return factory(**hyper)


def psi_value(loss: PairwiseLoss, a: float, b: float) -> float:
    """psi(a, b) where a is the positive-class score and b the negative."""
    return float(loss.phi(np.float64(a - b)))


def psi_grad(loss: PairwiseLoss, a: float, b: float) -> tuple[float, float]:
    """Partials (d psi/da, d psi/db); antisymmetric since psi depends on a - b."""
    g = float(loss.dphi(np.float64(a - b)))
    return g, -g


def pairwise_objective(
    model: ScoringModel, pos: list[Example], neg: list[Example], loss: PairwiseLoss
) -> float:
    """Mean of psi over all positive x negative score pairs."""
    if not pos or not neg:
        raise ValueError("both classes must be non-empty")
    hp = model.score_batch(feature_matrix(pos))
    hn = model.score_batch(feature_matrix(neg))
    return float(loss.phi(hp[:, None] - hn[None, :]).mean())
