"""Run records and evaluation metrics.

replay() drives an aggregator over a pack stream and records everything the
downstream metrics, bound checks and reports need: slot-level predictions and
losses, per-round pack-average losses of the learner and of every expert, the
normalized weight trajectory, and the log-domain weight trajectories that the
theoretical invariants are stated in. The classification metrics (ranking AUC
with half credit for ties, best F-score over all score thresholds) treat the
learner's predictions as anomaly scores.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .aggregator import AlgorithmSpec, Pack, init, step
from .numerics import logsumexp
from .oracle import SuperexpertSpec, superexpert_step_losses


@dataclass
class RunLedger:
    """Everything recorded while replaying one run.

    Step arrays have one row per feedback round t = 1..T; slot arrays have one
    entry per slot in stream order. log_share_weights additionally carries the
    initial uniform row, so row s holds the unnormalized log weights after s
    rounds and log_weight_sums[s] their logsumexp (0 at s = 0).
    """

    predictions: np.ndarray  # (L,)
    learner_slot_losses: np.ndarray  # (L,)
    pack_sizes: np.ndarray  # (T,)
    per_step_learner_avg_loss: np.ndarray  # (T,)
    per_step_expert_avg_loss: np.ndarray  # (T, N)
    weights_history: np.ndarray  # (T, N), normalized, after each round
    log_share_weights: np.ndarray  # (T + 1, N), unnormalized
    log_intermediate_weights: np.ndarray  # (T, N), unnormalized
    log_weight_sums: np.ndarray  # (T + 1,)

    @property
    def n_steps(self) -> int:
        return self.pack_sizes.size

    @property
    def n_experts(self) -> int:
        return self.per_step_expert_avg_loss.shape[1]

    @property
    def n_slots(self) -> int:
        return self.predictions.size


def replay(spec: AlgorithmSpec, packs: list[Pack]) -> RunLedger:
    """Run the aggregator over a pack stream and record the full trajectory."""
    packs = list(packs)
    if not packs:
        raise ValueError("cannot replay an empty pack stream")
    n = packs[0].n_experts
    if any(p.n_experts != n for p in packs):
        raise ValueError("all packs must carry the same experts")
    state = init(n, spec)
    preds, slot_losses, sizes = [], [], []
    learner_avg, expert_avg = [], []
    log_share = [state.log_weights]
    log_inter = []
    for pack in packs:
        res = step(state, spec, pack)
        preds.append(res.learner_preds)
        slot_losses.append(res.slot_losses)
        sizes.append(pack.size)
        learner_avg.append(float(res.slot_losses.mean()))
        expert_avg.append(res.expert_avg_losses)
        log_inter.append(res.log_intermediate)
        log_share.append(res.state.log_weights)
        state = res.state
    share = np.vstack(log_share)
    sums = logsumexp(share, axis=1)
    weights = np.exp(share[1:] - sums[1:, None])
    return RunLedger(
        predictions=np.concatenate(preds),
        learner_slot_losses=np.concatenate(slot_losses),
        pack_sizes=np.asarray(sizes, dtype=int),
        per_step_learner_avg_loss=np.asarray(learner_avg),
        per_step_expert_avg_loss=np.vstack(expert_avg),
        weights_history=weights,
        log_share_weights=share,
        log_intermediate_weights=np.vstack(log_inter),
        log_weight_sums=sums,
    )


def _check_upto(ledger: RunLedger, upto_t: int) -> int:
    if not 1 <= upto_t <= ledger.n_steps:
        raise ValueError(f"upto_t must lie in [1, {ledger.n_steps}], got {upto_t}")
    return int(upto_t)


def cumulative_average_loss(ledger: RunLedger, upto_t: int) -> tuple[float, np.ndarray]:
    """Sums of pack-average losses over rounds 1..upto_t: (learner, experts)."""
    t = _check_upto(ledger, upto_t)
    learner = float(ledger.per_step_learner_avg_loss[:t].sum())
    experts = ledger.per_step_expert_avg_loss[:t].sum(axis=0)
    return learner, experts


def cumulative_loss(ledger: RunLedger, upto_t: int) -> float:
    """Plain sum of the learner's slot losses over rounds 1..upto_t."""
    t = _check_upto(ledger, upto_t)
    slots = int(ledger.pack_sizes[:t].sum())
    return float(ledger.learner_slot_losses[:slots].sum())


def auc(scores, labels) -> float:
    """Ranking AUC: the probability a positive outranks a negative.

    Mann-Whitney form with midranks, so ties contribute half credit. Needs at
    least one positive and one negative label.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    if s.ndim != 1 or s.size == 0 or y.shape != s.shape:
        raise ValueError("scores and labels must be matching non-empty vectors")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = s.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes present")
    _, inverse, counts = np.unique(s, return_inverse=True, return_counts=True)
    before = np.cumsum(counts) - counts
    midrank = before + (counts + 1) / 2.0  # 1-based midranks per tie group
    ranks = midrank[inverse]
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def max_f_score(scores, labels) -> tuple[float, float]:
    """Best F1 over all thresholds, predicting positive where score >= threshold.

    Candidate thresholds are the distinct scores plus a sentinel above the
    maximum (the all-negative prediction). F1 counts as 0 when there are no
    true positives. Returns (best F1, smallest threshold attaining it).
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    if s.ndim != 1 or s.size == 0 or y.shape != s.shape:
        raise ValueError("scores and labels must be matching non-empty vectors")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    n_pos = int((y == 1).sum())
    if n_pos == 0:
        raise ValueError("F-score needs at least one positive label")
    thresholds = np.unique(s)  # ascending
    # suffix counts: how many slots / positives have score >= each threshold
    order = np.argsort(s, kind="stable")
    sorted_y = np.asarray(y, dtype=float)[order]
    group_sizes = np.searchsorted(s[order], thresholds, side="right")
    total_pos = np.concatenate(([0.0], np.cumsum(sorted_y)))
    n_at_least = s.size - np.concatenate(([0], group_sizes[:-1]))
    tp = n_pos - total_pos[np.concatenate(([0], group_sizes[:-1]))]
    best_f1, best_thr = 0.0, float(thresholds[-1] + 1.0)  # sentinel: predict nothing
    for thr, hits, npred in zip(thresholds, tp, n_at_least):
        if hits == 0:
            f1 = 0.0
        else:
            precision = hits / npred
            recall = hits / n_pos
            f1 = 2.0 * precision * recall / (precision + recall)
        if f1 > best_f1 or (f1 == best_f1 and thr < best_thr):
            best_f1, best_thr = float(f1), float(thr)
    return best_f1, best_thr


def regret_series(ledger: RunLedger, comparator: int | SuperexpertSpec) -> np.ndarray:
    """Per-prefix comparator-minus-learner cumulative average losses.

    Positive entries mean the learner is ahead of the comparator. The
    comparator is an expert index or a superexpert over the run's rounds.
    """
    if isinstance(comparator, SuperexpertSpec):
        comp = superexpert_step_losses(comparator, ledger.per_step_expert_avg_loss)
    else:
        i = int(comparator)
        if not 0 <= i < ledger.n_experts:
            raise ValueError(f"expert index {i} out of range")
        comp = ledger.per_step_expert_avg_loss[:, i]
    return np.cumsum(comp) - np.cumsum(ledger.per_step_learner_avg_loss)
