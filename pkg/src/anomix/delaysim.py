"""Delay schedules: how a slot stream is cut into feedback packs.

A schedule realizes the pack sizes (D_1, ..., D_T) for a stream of L slots,
with sum(D_t) = L. Two kinds are supported: a fixed pack size (the last pack
truncated at the stream end) and i.i.d. uniform sizes on an inclusive integer
range. Random sizes are drawn from numpy's PCG64 generator seeded per stream,
so a (kind, seed, stream length) triple always realizes the same schedule.

CLI string forms: "fixed:D" and "random:LO:HI[:seed=S]". A random schedule
without its own seed falls back to the run-level seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .aggregator import Pack


@dataclass(frozen=True)
class Fixed:
    """Every pack holds d slots (the final one possibly fewer)."""

    d: int

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError(f"pack size must be >= 1, got {self.d}")


@dataclass(frozen=True)
class RandomUniform:
    """Pack sizes drawn uniformly from the inclusive range [lo, hi]."""

    lo: int
    hi: int
    seed: int | None = None

    def __post_init__(self) -> None:
        if not 1 <= self.lo <= self.hi:
            raise ValueError(f"need 1 <= lo <= hi, got [{self.lo}, {self.hi}]")


ScheduleKind = Fixed | RandomUniform


@dataclass(frozen=True)
class DelaySchedule:
    """Realized pack sizes for one stream, plus the canonical kind string."""

    kind: str
    realized: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.realized) == 0 or any(d < 1 for d in self.realized):
            raise ValueError("realized pack sizes must be a non-empty tuple of ints >= 1")


def parse_schedule(text: str) -> ScheduleKind:
    """Parse "fixed:D" or "random:LO:HI[:seed=S]" into a schedule kind."""
    bad = ValueError(
        f"cannot parse delay schedule {text!r}; expected 'fixed:D' or 'random:LO:HI[:seed=S]'"
    )

    def as_int(field: str) -> int:
        try:
            return int(field)
        except ValueError:
            raise bad from None

    parts = text.strip().split(":")
    if parts[0] == "fixed" and len(parts) == 2:
        return Fixed(as_int(parts[1]))
    if parts[0] == "random" and len(parts) in (3, 4):
        seed = None
        if len(parts) == 4:
            tag, _, value = parts[3].partition("=")
            if tag != "seed":
                raise bad
            seed = as_int(value)
        return RandomUniform(as_int(parts[1]), as_int(parts[2]), seed)
    raise bad


def format_schedule(kind: ScheduleKind) -> str:
    """Canonical string form of a schedule kind."""
    if isinstance(kind, Fixed):
        return f"fixed:{kind.d}"
    if kind.seed is None:
        return f"random:{kind.lo}:{kind.hi}"
    return f"random:{kind.lo}:{kind.hi}:seed={kind.seed}"


def make_schedule(
    kind: ScheduleKind, stream_len: int, default_seed: int | None = None
) -> DelaySchedule:
    """Realize pack sizes covering stream_len slots.

    Fixed kinds tile the stream and truncate the final pack. Random kinds draw
    sizes from PCG64 until the stream is covered, truncating the final draw;
    the generator is seeded with the kind's own seed, or default_seed when the
    kind carries none. The canonical kind string records the seed actually
    used, so the schedule can be reproduced from the string alone.
    """
    if stream_len < 1:
        raise ValueError(f"stream_len must be >= 1, got {stream_len}")
    if isinstance(kind, Fixed):
        full, rest = divmod(stream_len, kind.d)
        sizes = [kind.d] * full + ([rest] if rest else [])
        return DelaySchedule(format_schedule(kind), tuple(sizes))
    seed = kind.seed if kind.seed is not None else default_seed
    if seed is None:
        raise ValueError("random delay schedules need a seed for reproducibility")
    rng = np.random.Generator(np.random.PCG64(seed))
    sizes: list[int] = []
    left = stream_len
    while left > 0:
        d = int(rng.integers(kind.lo, kind.hi, endpoint=True))
        sizes.append(min(d, left))
        left -= sizes[-1]
    resolved = RandomUniform(kind.lo, kind.hi, seed)
    return DelaySchedule(format_schedule(resolved), tuple(sizes))


def pack_stream(expert_scores, outcomes, schedule: DelaySchedule) -> list[Pack]:
    """Cut a scored, labeled slot stream into packs along a schedule.

    Concatenating the packs in order reproduces the stream exactly.
    """
    scores = np.asarray(expert_scores, dtype=float)
    y = np.asarray(outcomes)
    if scores.ndim != 2:
        raise ValueError("expert_scores must be a (slots, experts) matrix")
    if y.shape != (scores.shape[0],):
        raise ValueError("outcomes must hold one value per slot")
    if sum(schedule.realized) != scores.shape[0]:
        raise ValueError(
            f"schedule covers {sum(schedule.realized)} slots "
            f"but the stream has {scores.shape[0]}"
        )
    packs = []
    at = 0
    for d in schedule.realized:
        packs.append(Pack(scores[at : at + d], outcomes=y[at : at + d]))
        at += d
    return packs
