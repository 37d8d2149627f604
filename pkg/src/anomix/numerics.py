"""Shared numerical helpers."""

from __future__ import annotations

import numpy as np


def logsumexp(a: np.ndarray, axis: int | None = None) -> np.ndarray | float:
    """Compute log(sum(exp(a))) without overflow.

    Shifts by the running maximum before exponentiating. Entries of -inf are
    treated as exact zeros of the underlying sum; an all--inf input returns
    -inf rather than raising.
    """
    a = np.asarray(a, dtype=float)
    m = np.max(a, axis=axis, keepdims=True)
    # an all--inf slice would produce nan from (-inf) - (-inf)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    if axis is None:
        return float(out.reshape(()))
    return np.squeeze(out, axis=axis)
