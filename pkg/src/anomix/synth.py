"""Reproducible synthetic streams for exercising the aggregators end to end.

Scores are i.i.d. uniform on [0, 1] (one column per expert) and outcomes are
i.i.d. Bernoulli, drawn from a caller-provided generator so a seed pins the
whole instance. Timestamps are a fixed five-minute grid, which keeps written
corpora byte-reproducible.
"""

from __future__ import annotations

from datetime import datetime, timedelta

import numpy as np


def random_instance(
    rng: np.random.Generator, n_experts: int, length: int, anomaly_rate: float = 0.1
) -> tuple[np.ndarray, np.ndarray]:
    """Draw (scores, outcomes): uniform scores, Bernoulli outcomes."""
    if n_experts < 1 or length < 1:
        raise ValueError("need at least one expert and one slot")
    if not 0.0 <= anomaly_rate <= 1.0:
        raise ValueError(f"anomaly_rate must lie in [0, 1], got {anomaly_rate}")
    scores = rng.random((length, n_experts))
    outcomes = (rng.random(length) < anomaly_rate).astype(np.int8)
    return scores, outcomes


def synth_timestamps(length: int, start: datetime | None = None) -> list[datetime]:
    """Evenly spaced timestamps (5 min apart) starting 2020-01-01 by default."""
    if start is None:
        start = datetime(2020, 1, 1)
    tick = timedelta(minutes=5)
    return [start + i * tick for i in range(length)]
