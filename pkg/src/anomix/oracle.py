"""Comparator construction and loss-bound calculators.

A superexpert follows one expert per segment of the step range [1, T] and may
switch experts at up to k interior boundaries. best_superexpert finds the
loss-minimal one by dynamic programming over (step, expert, switches used).
The bound calculators evaluate the guarantees of the share aggregators
against such comparators:

    fixed share      L <= C L_S + (C/eta) (ln N + k ln((N-1)/alpha)
                                           + (T-1-k) ln(1/(1-alpha)))
    variable share   L <= C (1 + ln(1/(1-alpha))/eta) L_S
                          + (C/eta) (ln N + k (eta + ln((N-1)/(alpha(1-alpha)))))

where L and L_S are sums over steps of pack-average losses. Tuned switching
rates and the resulting horizon-only corollary bounds are provided alongside.
Bounds that degenerate (alpha at 0 or 1 with switching) are reported as +inf
rather than raised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .aggregator import Method


@dataclass(frozen=True)
class SuperexpertSpec:
    """A segmentation of [1, T] with one expert per segment.

    boundaries are 1-based step indices (t_0, ..., t_{k+1}) with t_0 = 1 and
    t_{k+1} = T + 1; segment j covers steps [t_j, t_{j+1}). experts holds the
    0-based expert of each segment; adjacent segments use different experts.
    """

    boundaries: tuple[int, ...]
    experts: tuple[int, ...]

    def __post_init__(self) -> None:
        b = tuple(int(t) for t in self.boundaries)
        e = tuple(int(i) for i in self.experts)
        if len(e) < 1 or len(b) != len(e) + 1:
            raise ValueError("need one more boundary than segments")
        if b[0] != 1:
            raise ValueError("the first boundary must be step 1")
        if any(b[j] >= b[j + 1] for j in range(len(b) - 1)):
            raise ValueError("boundaries must be strictly increasing")
        if any(i < 0 for i in e):
            raise ValueError("expert indices must be non-negative")
        if any(e[j] == e[j + 1] for j in range(len(e) - 1)):
            raise ValueError("adjacent segments must use different experts")
        object.__setattr__(self, "boundaries", b)
        object.__setattr__(self, "experts", e)

    @property
    def k(self) -> int:
        """Number of switches."""
        return len(self.experts) - 1

    @property
    def t_total(self) -> int:
        """Number of steps covered."""
        return self.boundaries[-1] - 1


def _check_matrix(avg_loss_matrix) -> np.ndarray:
    m = np.asarray(avg_loss_matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError("avg_loss_matrix must be a (steps, experts) matrix")
    if not np.all(np.isfinite(m)):
        raise ValueError("avg_loss_matrix must be finite")
    return m


def superexpert_step_losses(spec: SuperexpertSpec, avg_loss_matrix) -> np.ndarray:
    """Per-step losses of the superexpert: the assigned expert's column per segment."""
    m = _check_matrix(avg_loss_matrix)
    t_total, n = m.shape
    if spec.boundaries[-1] != t_total + 1:
        raise ValueError(
            f"superexpert covers {spec.t_total} steps but the matrix has {t_total}"
        )
    if max(spec.experts) >= n:
        raise ValueError("superexpert refers to an expert the matrix does not have")
    out = np.empty(t_total)
    for j, e in enumerate(spec.experts):
        a, b = spec.boundaries[j], spec.boundaries[j + 1]
        out[a - 1 : b - 1] = m[a - 1 : b - 1, e]
    return out


def superexpert_avg_loss(spec: SuperexpertSpec, avg_loss_matrix) -> float:
    """Total loss of the superexpert (sum over steps of pack-average losses)."""
    return float(np.sum(superexpert_step_losses(spec, avg_loss_matrix)))


def best_superexpert(avg_loss_matrix, k: int) -> tuple[SuperexpertSpec, float]:
    """Loss-minimal superexpert with at most k switches.

    Exact dynamic program over (step, expert, switches used). Each state
    carries (loss, boundaries, experts) and ties resolve toward fewer
    switches, then the lexicographically smallest (boundaries, experts);
    losses accumulate step by step so exact ties compare reproducibly.
    """
    m = _check_matrix(avg_loss_matrix)
    t_total, n = m.shape
    if not 0 <= k <= t_total - 1:
        raise ValueError(f"k must lie in [0, {t_total - 1}], got {k}")
    # dp[i][s]: best (loss, boundaries, experts) over prefixes ending in
    # expert i with exactly s switches used; None if unreachable
    dp = [[None] * (k + 1) for _ in range(n)]
    for i in range(n):
        dp[i][0] = (m[0, i], (1,), (i,))
    for t in range(1, t_total):
        row = m[t]
        new = [[None] * (k + 1) for _ in range(n)]
        for i in range(n):
            li = row[i]
            for s in range(k + 1):
                best = None
                stay = dp[i][s]
                if stay is not None:
                    best = (stay[0] + li, stay[1], stay[2])
                if s > 0:
                    for j in range(n):
                        if j == i or dp[j][s - 1] is None:
                            continue
                        prev = dp[j][s - 1]
                        cand = (prev[0] + li, prev[1] + (t + 1,), prev[2] + (i,))
                        if best is None or cand < best:
                            best = cand
                new[i][s] = best
        dp = new
    best = None
    for i in range(n):
        for s in range(k + 1):
            cell = dp[i][s]
            if cell is None:
                continue
            # states with equal s share a segment count, so the in-state
            # comparisons above never needed the switch count spelled out
            cand = (cell[0], s, cell[1] + (t_total + 1,), cell[2])
            if best is None or cand < best:
                best = cand
    loss, _, boundaries, experts = best
    return SuperexpertSpec(boundaries, experts), float(loss)


@dataclass(frozen=True)
class BoundInputs:
    """Everything the bound calculators consume.

    superexpert_avg_loss is the comparator's total (sum of pack-average)
    loss; k its switch count; t_total the number of feedback rounds. The
    hatted fields are the horizon guesses the corollary bounds tune against.
    """

    c: float
    eta: float
    n_experts: int
    k: int
    t_total: int
    alpha: float
    superexpert_avg_loss: float
    k_hat: float | None = None
    t_hat: float | None = None
    l_hat: float | None = None

    def __post_init__(self) -> None:
        if self.c <= 0 or self.eta <= 0:
            raise ValueError("c and eta must be positive")
        if self.n_experts < 1:
            raise ValueError("need at least one expert")
        if self.t_total < 1:
            raise ValueError("need at least one step")
        if not 0 <= self.k <= self.t_total - 1:
            raise ValueError(f"k must lie in [0, t_total - 1], got {self.k}")
        if self.k > 0 and self.n_experts < 2:
            raise ValueError("switching needs at least two experts")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.superexpert_avg_loss < 0 or not math.isfinite(self.superexpert_avg_loss):
            raise ValueError("superexpert loss must be a finite non-negative real")


def fixed_share_bound(inputs: BoundInputs) -> float:
    """Fixed-share guarantee against a k-switch superexpert.

    Returns +inf when the guarantee degenerates (alpha at 0 or 1 with k > 0,
    or alpha = 1 with steps left over); with k = 0 and alpha = 0 it reduces to
    the plain aggregator's C L_S + (C/eta) ln N.
    """
    c, eta = inputs.c, inputs.eta
    n, k, t = inputs.n_experts, inputs.k, inputs.t_total
    alpha, l_s = inputs.alpha, inputs.superexpert_avg_loss
    if k > 0:
        if alpha == 0.0 or alpha == 1.0:
            return math.inf
        switch_term = k * math.log((n - 1) / alpha)
    else:
        switch_term = 0.0
    if alpha == 1.0:
        if t - 1 - k > 0:
            return math.inf
        stay_term = 0.0
    else:
        stay_term = (t - 1 - k) * math.log(1.0 / (1.0 - alpha))
    return c * l_s + (c / eta) * (math.log(n) + switch_term + stay_term)


def variable_share_bound(inputs: BoundInputs) -> float:
    """Variable-share guarantee against a k-switch superexpert.

    Only valid for games whose per-slot losses lie in [0, 1]. Returns +inf
    when alpha sits at an endpoint that degenerates the guarantee.
    """
    c, eta = inputs.c, inputs.eta
    n, k = inputs.n_experts, inputs.k
    alpha, l_s = inputs.alpha, inputs.superexpert_avg_loss
    if alpha == 1.0:
        return math.inf
    if k > 0:
        if alpha == 0.0:
            return math.inf
        switch_term = k * (eta + math.log((n - 1) / (alpha * (1.0 - alpha))))
    else:
        switch_term = 0.0
    factor = 1.0 + math.log(1.0 / (1.0 - alpha)) / eta
    return c * factor * l_s + (c / eta) * (math.log(n) + switch_term)


def tuned_alpha(method: Method, k_hat: float, horizon: float) -> float:
    """Switching rate that optimizes the corollary bound for a horizon guess.

    For fixed share the horizon is the anticipated number of steps t_hat and
    alpha = k_hat / (t_hat - 1), defined for k_hat < t_hat - 1. For variable
    share the horizon is the anticipated comparator loss l_hat and
    alpha = k_hat / (2 k_hat + l_hat).
    """
    if k_hat <= 0 or not math.isfinite(k_hat):
        raise ValueError("k_hat must be a positive real")
    if horizon <= 0 or not math.isfinite(horizon):
        raise ValueError("horizon must be a positive real")
    if method is Method.FIXED_SHARE:
        if k_hat >= horizon - 1:
            raise ValueError("fixed share tuning needs k_hat < t_hat - 1")
        return k_hat / (horizon - 1.0)
    if method is Method.VARIABLE_SHARE:
        return k_hat / (2.0 * k_hat + horizon)
    raise ValueError("the plain aggregator has no switching rate to tune")


def corollary_bound(method: Method, inputs: BoundInputs) -> float:
    """Horizon-only bound at the tuned switching rate.

    Fixed share needs (k_hat, t_hat) with k_hat < t_hat - 1 and covers
    comparators with t_total <= t_hat and k >= k_hat. Variable share needs
    (k_hat, l_hat) with superexpert loss <= l_hat; the k_hat >= l_hat regime
    uses the tighter k_hat/2 constant (both regimes are valid at equality).
    """
    c, eta = inputs.c, inputs.eta
    n, k, l_s = inputs.n_experts, inputs.k, inputs.superexpert_avg_loss
    k_hat = inputs.k_hat
    if k_hat is None or k_hat <= 0:
        raise ValueError("corollary bounds need a positive k_hat")
    if method is Method.FIXED_SHARE:
        t_hat = inputs.t_hat
        if t_hat is None:
            raise ValueError("the fixed-share corollary needs t_hat")
        if k_hat >= t_hat - 1:
            raise ValueError("the fixed-share corollary needs k_hat < t_hat - 1")
        if inputs.t_total > t_hat:
            raise ValueError("the fixed-share corollary covers t_total <= t_hat only")
        if k < k_hat:
            raise ValueError("the fixed-share corollary covers k >= k_hat only")
        gap = k * (math.log((t_hat - 1.0) / k_hat) + math.log(n - 1)) if k > 0 else 0.0
        return c * l_s + (c / eta) * (math.log(n) + gap + k_hat)
    if method is Method.VARIABLE_SHARE:
        l_hat = inputs.l_hat
        if l_hat is None or l_hat <= 0:
            raise ValueError("the variable-share corollary needs a positive l_hat")
        if l_s > l_hat:
            raise ValueError("the variable-share corollary covers superexpert loss <= l_hat")
        common = math.log(n - 1) + math.log(4.5) + eta if k > 0 else 0.0
        if k_hat >= l_hat:
            gap = k * common
            tail = k_hat / 2.0
        else:
            gap = k * (math.log(l_hat / k_hat) + common) if k > 0 else 0.0
            tail = k_hat
        return c * l_s + (c / eta) * (math.log(n) + gap + tail)
    raise ValueError("no corollary bound is defined for the plain aggregator")
