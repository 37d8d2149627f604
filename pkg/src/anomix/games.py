"""Loss games for binary-outcome prediction with expert advice.

A game fixes the outcome space {0, 1}, the prediction space [0, 1], a loss
function and the learning rate / mixability pair (eta, c) under which the
aggregating substitution below is valid. Two games are provided:

    log loss      loss(y, g) = -ln(g) if y == 1 else -ln(1 - g),   eta = 1
    square loss   loss(y, g) = (y - g)^2,                          eta = 2

Both have mixability constant c = 1 at their default eta.

Under log loss every prediction is clipped into
[clip_epsilon, 1 - clip_epsilon] before any loss or mixture computation, so
losses stay finite and the weighted-mean substitution stays exactly mixable.
Clipping only inside the loss would not be enough: the clip function is not
concave at its lower elbow, so sub-epsilon scores could break the mixability
inequality.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .numerics import logsumexp

# max |sum(weights) - 1| accepted by the mixture operations
WEIGHT_SUM_TOL = 1e-12
# slack below which the mixability inequality counts as violated
MIXABILITY_TOL = 1e-9


class GameKind(enum.Enum):
    LOG = "log"
    SQUARE = "square"


@dataclass(frozen=True)
class GameSpec:
    """A loss game together with its learning rate and mixability constant.

    The (kind, eta, c) pairing is frozen at construction. The factory methods
    build the canonical mixable pairs; other pairings must be spelled out
    explicitly and are the caller's responsibility.
    """

    kind: GameKind
    eta: float
    c: float = 1.0
    clip_epsilon: float = 1e-6

    def __post_init__(self) -> None:
        if self.eta <= 0 or not math.isfinite(self.eta):
            raise ValueError(f"eta must be a positive real, got {self.eta}")
        if self.c <= 0 or not math.isfinite(self.c):
            raise ValueError(f"c must be a positive real, got {self.c}")
        if not 0.0 < self.clip_epsilon < 0.5:
            raise ValueError(
                f"clip_epsilon must lie in (0, 0.5), got {self.clip_epsilon}"
            )

    @classmethod
    def log_loss(cls, clip_epsilon: float = 1e-6) -> "GameSpec":
        return cls(GameKind.LOG, eta=1.0, c=1.0, clip_epsilon=clip_epsilon)

    @classmethod
    def square_loss(cls) -> "GameSpec":
        return cls(GameKind.SQUARE, eta=2.0, c=1.0)


def _check_outcomes(y) -> np.ndarray:
    y = np.asarray(y)
    if not np.isin(y, (0, 1)).all():
        raise ValueError(f"outcomes must be 0 or 1, got {y!r}")
    return y.astype(float)


def _check_predictions(gamma) -> np.ndarray:
    g = np.asarray(gamma, dtype=float)
    if not np.all(np.isfinite(g)) or np.any(g < 0.0) or np.any(g > 1.0):
        raise ValueError(f"predictions must lie in [0, 1], got {gamma!r}")
    return g


def _check_weights(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a non-empty 1-D vector")
    if not np.all(np.isfinite(w)) or np.any(w < 0.0):
        raise ValueError(f"weights must be finite and non-negative, got {weights!r}")
    total = float(w.sum())
    if abs(total - 1.0) > WEIGHT_SUM_TOL:
        raise ValueError(f"weights must sum to 1 within {WEIGHT_SUM_TOL}, got {total!r}")
    return w


def clip_scores(game: GameSpec, preds) -> np.ndarray:
    """Map raw predictions in [0, 1] to the game's effective prediction range.

    Log loss clips into [clip_epsilon, 1 - clip_epsilon]; square loss passes
    values through unchanged. All loss and mixture computations in this module
    operate on the clipped values.
    """
    p = _check_predictions(preds)
    if game.kind is GameKind.LOG:
        return np.clip(p, game.clip_epsilon, 1.0 - game.clip_epsilon)
    return p


def loss(game: GameSpec, y, gamma):
    """Per-slot loss of predicting gamma against binary outcome y.

    Scalar inputs give a float; array inputs broadcast elementwise.
    """
    yv = _check_outcomes(y)
    g = clip_scores(game, gamma)
    if game.kind is GameKind.LOG:
        out = -np.log(np.where(yv == 1.0, g, 1.0 - g))
    else:
        out = (yv - g) ** 2
    if np.ndim(y) == 0 and np.ndim(gamma) == 0:
        return float(out)
    return out


def generalized_prediction(game: GameSpec, weights, expert_preds, y) -> float:
    """Loss level g(y) that the weighted expert mixture guarantees on outcome y.

    Computes -(1/eta) * ln sum_i w_i exp(-eta * loss(y, xi_i)) via a shifted
    log-sum-exp. Zero weights contribute nothing and are allowed.
    """
    w = _check_weights(weights)
    xi = clip_scores(game, expert_preds)
    if xi.ndim != 1 or xi.size != w.size:
        raise ValueError("expert_preds must be a 1-D vector matching weights")
    lam = loss(game, np.full(xi.shape, y), xi)
    with np.errstate(divide="ignore"):
        log_w = np.log(w)
    return -logsumexp(log_w - game.eta * lam) / game.eta


def substitute(game: GameSpec, weights, expert_preds) -> float:
    """Collapse a weighted expert mixture into one playable prediction.

    Log loss uses the weighted mean of the (clipped) expert predictions.
    Square loss uses gamma = 1/2 - (g(1) - g(0)) / 2, clamped into [0, 1].
    Both substitutions keep loss(y, gamma) <= c * g(y) for each outcome y.
    """
    w = _check_weights(weights)
    xi = clip_scores(game, expert_preds)
    if xi.ndim != 1 or xi.size != w.size:
        raise ValueError("expert_preds must be a 1-D vector matching weights")
    if game.kind is GameKind.LOG:
        return float(w @ xi)
    g1 = generalized_prediction(game, w, xi, 1)
    g0 = generalized_prediction(game, w, xi, 0)
    return float(np.clip(0.5 - (g1 - g0) / 2.0, 0.0, 1.0))


@dataclass(frozen=True)
class MixabilityReport:
    """Outcome of checking loss(y, gamma) <= c * g(y) for both outcomes."""

    holds: bool
    slack: dict[int, float]  # c * g(y) - loss(y, gamma), per outcome y


def mixability_holds(game: GameSpec, weights, expert_preds, gamma) -> MixabilityReport:
    """Check the substitution inequality for a candidate prediction gamma.

    Returns the per-outcome slack c * g(y) - loss(y, gamma); the check passes
    when both slacks are >= -MIXABILITY_TOL.
    """
    slack = {}
    for y in (0, 1):
        g = generalized_prediction(game, weights, expert_preds, y)
        slack[y] = game.c * g - loss(game, y, gamma)
    holds = all(s >= -MIXABILITY_TOL for s in slack.values())
    return MixabilityReport(holds=holds, slack=slack)
