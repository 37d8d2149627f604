"""Online aggregation of expert predictions under delayed feedback.

Predictions arrive in packs: between two feedback rounds the learner must
predict every slot of the pack with the same (normalized) expert weights, and
only afterwards sees all the pack's outcomes at once. One update round then
runs in two stages:

    intermediate   w_t(i) = w~_{t-1}(i) * exp(-eta * lbar_t(i))
    share          w~_t   = share map applied to w_t

where lbar_t(i) is expert i's pack-average loss. Three share maps are
provided. The plain aggregator keeps w~_t = w_t. Fixed share redistributes a
constant fraction alpha of every expert's weight evenly across the others.
Variable share redistributes a loss-dependent fraction 1 - (1-alpha)^lbar, so
experts pay into the pool only when they err; it therefore requires a game
with per-slot losses bounded by 1 (the square-loss game).

Weights are kept as unnormalized logarithms, starting at ln(1/N), so the
running weight sum is available as logsumexp(log_weights) at every step. The
share maps mix in linear space relative to the running maximum; alpha = 0
short-circuits both maps to the identity, which keeps long runs free of
spurious underflow and makes the alpha = 0 trajectories of all three methods
bitwise identical. A weight that genuinely underflows to linear zero is held
as -inf and can re-enter through the share pool.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .games import GameKind, GameSpec, clip_scores, loss
from .numerics import logsumexp


class ProtocolError(RuntimeError):
    """An operation was invoked out of protocol order."""


class Method(enum.Enum):
    AAP = "aap"
    FIXED_SHARE = "fixed"
    VARIABLE_SHARE = "variable"


@dataclass(frozen=True)
class AlgorithmSpec:
    """Aggregation method, switching rate and the game it is played under."""

    method: Method
    alpha: float
    game: GameSpec

    def __post_init__(self) -> None:
        object.__setattr__(self, "method", Method(self.method))
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"alpha must lie in [0, 1), got {self.alpha}")
        if self.method is Method.AAP and self.alpha != 0.0:
            raise ValueError("the plain aggregator does not switch; alpha must be 0")
        if self.method is Method.VARIABLE_SHARE and self.game.kind is not GameKind.SQUARE:
            raise ValueError(
                "variable share needs per-slot losses bounded by 1; "
                "use the square-loss game"
            )


@dataclass
class Pack:
    """One feedback round: a block of slots predicted before any outcome lands.

    expert_preds has one row per slot and one column per expert. outcomes and
    learner_preds stay None until the corresponding protocol stage fills them.
    """

    expert_preds: np.ndarray
    outcomes: np.ndarray | None = None
    learner_preds: np.ndarray | None = None

    def __post_init__(self) -> None:
        preds = np.asarray(self.expert_preds, dtype=float)
        if preds.ndim != 2 or preds.shape[0] < 1 or preds.shape[1] < 1:
            raise ValueError("expert_preds must be a (slots, experts) matrix")
        if not np.all(np.isfinite(preds)) or preds.min() < 0.0 or preds.max() > 1.0:
            raise ValueError("expert predictions must lie in [0, 1]")
        self.expert_preds = preds
        if self.outcomes is not None:
            y = np.asarray(self.outcomes)
            if y.shape != (preds.shape[0],):
                raise ValueError("outcomes must hold one value per slot")
            if not np.isin(y, (0, 1)).all():
                raise ValueError("outcomes must be 0 or 1")
            self.outcomes = y.astype(np.int8)

    @property
    def size(self) -> int:
        return self.expert_preds.shape[0]

    @property
    def n_experts(self) -> int:
        return self.expert_preds.shape[1]


@dataclass(frozen=True)
class WeightState:
    """Unnormalized log share weights after some number of feedback rounds.

    Entries may be -inf (a weight that underflowed to exact linear zero) but
    never NaN or +inf, and at least one entry is always finite.
    """

    log_weights: np.ndarray
    step: int = 0

    def __post_init__(self) -> None:
        lw = np.asarray(self.log_weights, dtype=float)
        if lw.ndim != 1 or lw.size == 0:
            raise ValueError("log_weights must be a non-empty 1-D vector")
        if np.any(np.isnan(lw)) or np.any(lw == np.inf):
            raise ValueError("log weights must not contain NaN or +inf")
        if not np.any(np.isfinite(lw)):
            raise ValueError("at least one weight must be positive")
        if self.step < 0:
            raise ValueError("step must be non-negative")
        object.__setattr__(self, "log_weights", lw)

    @property
    def n_experts(self) -> int:
        return self.log_weights.size


def init(n_experts: int, spec: AlgorithmSpec) -> WeightState:
    """Start a run with uniform weights 1/N (sum exactly 1)."""
    if n_experts < 1:
        raise ValueError(f"need at least one expert, got {n_experts}")
    return WeightState(np.full(n_experts, -math.log(n_experts)), step=0)


def normalized_weights(state: WeightState) -> np.ndarray:
    """Normalized linear weights used for prediction."""
    return np.exp(state.log_weights - logsumexp(state.log_weights))


def predict_pack(state: WeightState, spec: AlgorithmSpec, expert_preds) -> np.ndarray:
    """Predict every slot of a pack with the current normalized weights.

    Returns one prediction per slot, each the game's substitution of the
    weighted expert mixture for that slot.
    """
    xi = np.asarray(expert_preds, dtype=float)
    if xi.ndim != 2 or xi.shape[1] != state.n_experts:
        raise ValueError("expert_preds must be a (slots, experts) matrix matching the state")
    game = spec.game
    xi = clip_scores(game, xi)
    w = normalized_weights(state)
    if game.kind is GameKind.LOG:
        return xi @ w
    with np.errstate(divide="ignore"):
        log_w = np.log(w)
    g1 = -logsumexp(log_w - game.eta * (1.0 - xi) ** 2, axis=1) / game.eta
    g0 = -logsumexp(log_w - game.eta * xi**2, axis=1) / game.eta
    return np.clip(0.5 - (g1 - g0) / 2.0, 0.0, 1.0)


def expert_pack_losses(game: GameSpec, expert_preds, outcomes) -> np.ndarray:
    """Pack-average loss of each expert: mean over slots of loss(y_d, xi_d(i))."""
    xi = np.asarray(expert_preds, dtype=float)
    y = np.asarray(outcomes)
    if xi.ndim != 2 or y.shape != (xi.shape[0],):
        raise ValueError("expert_preds must be (slots, experts) with one outcome per slot")
    lam = loss(game, y[:, None], xi)
    return lam.mean(axis=0)


def intermediate_update(state: WeightState, spec: AlgorithmSpec, pack: Pack) -> np.ndarray:
    """Loss update before sharing: log w_t = log w~_{t-1} - eta * lbar_t.

    The pack must carry outcomes; predicting and updating on the same pack in
    the wrong order is a protocol violation, not a data problem.
    """
    if pack.outcomes is None:
        raise ProtocolError("pack has no outcomes yet; predict first, update after feedback")
    if pack.n_experts != state.n_experts:
        raise ValueError("pack and state disagree on the number of experts")
    lbar = expert_pack_losses(spec.game, pack.expert_preds, pack.outcomes)
    return state.log_weights - spec.game.eta * lbar


def _check_alpha(alpha: float) -> None:
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")


def fixed_share_update(log_weights, alpha: float) -> np.ndarray:
    """Mix a constant fraction of every weight evenly across the other experts.

    w~(i) = (1 - alpha) w(i) + alpha / (N - 1) * sum_{j != i} w(j).
    Preserves the weight sum exactly; identity for alpha = 0 or N = 1.
    """
    _check_alpha(alpha)
    lw = np.asarray(log_weights, dtype=float)
    n = lw.size
    if alpha == 0.0 or n == 1:
        return lw.copy()
    m = float(np.max(lw))
    if not math.isfinite(m):
        raise ValueError("all weights are zero; nothing to share")
    w = np.exp(lw - m)
    total = float(w.sum())
    mixed = (1.0 - alpha) * w + (alpha / (n - 1)) * (total - w)
    return m + np.log(mixed)


def variable_share_update(log_weights, alpha: float, avg_losses) -> np.ndarray:
    """Mix a loss-dependent fraction of every weight across the other experts.

    Each expert keeps (1 - alpha)^lbar(i) of its weight and the shed fraction
    1 - (1 - alpha)^lbar(j) is split evenly among the others:

        w~(i) = (1-alpha)^lbar(i) w(i)
                + sum_{j != i} (1 - (1-alpha)^lbar(j)) / (N - 1) * w(j).

    Requires pack-average losses in [0, 1]; preserves the weight sum exactly;
    identity for alpha = 0, N = 1, or all losses zero.
    """
    _check_alpha(alpha)
    lw = np.asarray(log_weights, dtype=float)
    lbar = np.asarray(avg_losses, dtype=float)
    n = lw.size
    if lbar.shape != (n,):
        raise ValueError("avg_losses must hold one value per expert")
    if np.any(lbar < -1e-12) or np.any(lbar > 1.0 + 1e-12):
        raise ValueError(
            f"variable share needs pack-average losses in [0, 1], got {avg_losses!r}"
        )
    lbar = np.clip(lbar, 0.0, 1.0)
    if alpha == 0.0 or n == 1:
        return lw.copy()
    m = float(np.max(lw))
    if not math.isfinite(m):
        raise ValueError("all weights are zero; nothing to share")
    w = np.exp(lw - m)
    keep = (1.0 - alpha) ** lbar
    shed = (1.0 - keep) * w
    pool = float(shed.sum())
    mixed = keep * w + (pool - shed) / (n - 1)
    with np.errstate(divide="ignore"):
        return m + np.log(mixed)


class StepResult(NamedTuple):
    """Result of one feedback round.

    The first three fields are the protocol outputs; the last two expose the
    round's internals so a replay loop does not recompute them.
    """

    learner_preds: np.ndarray
    slot_losses: np.ndarray
    state: WeightState
    expert_avg_losses: np.ndarray
    log_intermediate: np.ndarray


def step(state: WeightState, spec: AlgorithmSpec, pack: Pack) -> StepResult:
    """Run one full feedback round: predict, observe, update, share."""
    if pack.outcomes is None:
        raise ProtocolError("pack has no outcomes yet; predict first, update after feedback")
    preds = predict_pack(state, spec, pack.expert_preds)
    slot_losses = loss(spec.game, pack.outcomes, preds)
    lbar = expert_pack_losses(spec.game, pack.expert_preds, pack.outcomes)
    log_int = state.log_weights - spec.game.eta * lbar
    if spec.method is Method.FIXED_SHARE:
        log_new = fixed_share_update(log_int, spec.alpha)
    elif spec.method is Method.VARIABLE_SHARE:
        log_new = variable_share_update(log_int, spec.alpha, lbar)
    else:
        log_new = log_int.copy()
    new_state = WeightState(log_new, step=state.step + 1)
    return StepResult(preds, slot_losses, new_state, lbar, log_int)
