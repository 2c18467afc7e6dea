"""Impulse schedule algebra: counting, restriction, concatenation, the
player-II priority merge, and the accumulated gain/cost process.

Schedules here are realized (deterministic) event lists.  Random schedules
only ever appear path-by-path, produced by the simulator, so this algebra
is all that is needed.  A "never" event time is any scalar strictly beyond
the horizon (conventionally ``INF_TIME``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

INF_TIME = float("inf")

PLAYER_I = "I"
PLAYER_II = "II"


@dataclass(frozen=True)
class ImpulseSchedule:
    player: str
    events: tuple[tuple[float, tuple[float, ...]], ...] = ()

    def __post_init__(self):
        if self.player not in (PLAYER_I, PLAYER_II):
            raise ValueError(f"bad player {self.player!r}")
        ev = tuple(
            (float(t), tuple(float(c) for c in np.atleast_1d(a)))
            for t, a in self.events
        )
        times = [t for t, _ in ev]
        if times != sorted(times):
            raise ValueError("event times must be non-decreasing")
        object.__setattr__(self, "events", ev)

    def __len__(self) -> int:
        return len(self.events)


@dataclass(frozen=True)
class MergedTimeline:
    """Time-ordered two-player event list with the priority rule applied.

    At a shared timestamp only player II's event is effective; the
    colliding player-I event stays in the list flagged ``discarded``.
    Within one timestamp player II is ordered before player I.
    """

    effective_events: tuple[tuple[float, str, tuple[float, ...], bool], ...] = ()


def impulse_count(s: ImpulseSchedule, t0: float, tau: float) -> int:
    """Number of impulses with time <= tau (ties counted)."""
    if t0 > tau:
        raise ValueError("need t0 <= tau")
    return sum(1 for t, _ in s.events if t <= tau)


def restrict(s: ImpulseSchedule, tau: float, sigma: float) -> ImpulseSchedule:
    """Sub-schedule of events with time in [tau, sigma], re-indexed."""
    if tau > sigma:
        raise ValueError("need tau <= sigma")
    kept = tuple(ev for ev in s.events if tau <= ev[0] <= sigma)
    return ImpulseSchedule(s.player, kept)


def concat(u1: ImpulseSchedule, u2: ImpulseSchedule, split: float) -> ImpulseSchedule:
    """u1 followed by u2 across the split time (u1 <= split < u2)."""
    if u1.player != u2.player:
        raise ValueError("cannot concatenate schedules of different players")
    if any(t > split for t, _ in u1.events):
        raise ValueError("u1 has events after the split")
    if any(t <= split for t, _ in u2.events):
        raise ValueError("u2 has events at or before the split")
    return ImpulseSchedule(u1.player, u1.events + u2.events)


def merge_with_priority(u: ImpulseSchedule, v: ImpulseSchedule) -> MergedTimeline:
    """Merge both players' schedules; player II wins timestamp collisions."""
    if u.player != PLAYER_I or v.player != PLAYER_II:
        raise ValueError("expects (player-I schedule, player-II schedule)")
    v_times = {t for t, _ in v.events}
    tagged = [(t, 1, PLAYER_II, a, False) for t, a in v.events]
    tagged += [(t, 2, PLAYER_I, a, t in v_times) for t, a in u.events]
    tagged.sort(key=lambda e: (e[0], e[1]))
    return MergedTimeline(tuple((t, p, a, d) for t, _, p, a, d in tagged))


def accumulate_theta(timeline: MergedTimeline, spec, s: float) -> float:
    """Accumulated impulse gains minus costs up to time ``s``.

    Gains from every player-II event with time <= s, costs from every
    non-discarded player-I event with time <= s.
    """
    total = 0.0
    for t, player, action, discarded in timeline.effective_events:
        if t > s:
            continue
        if player == PLAYER_II:
            total += spec.gain(t, np.asarray(action))
        elif not discarded:
            total -= spec.cost(t, np.asarray(action))
    return total
