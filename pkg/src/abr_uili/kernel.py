"""Deterministic discrete-event engine.

Events are ordered by ``(fire_at, seq)``; ``seq`` is assigned at schedule
time so events sharing a timestamp dispatch in insertion order.
"""

from __future__ import annotations

import enum
import heapq
import hashlib
from dataclasses import dataclass, field
from typing import Any, Callable


class EventKind(enum.IntEnum):
    CELL_DEPARTURE = 0
    CELL_ARRIVAL = 1
    INTERVAL_END = 2
    TIMER_EXPIRY = 3
    CYCLE_START = 4


class SchedulingError(RuntimeError):
    """Raised when an event is scheduled before the current clock."""


@dataclass(order=True)
class Event:
    fire_at: int
    seq: int
    kind: EventKind = field(compare=False)
    handler: Callable[..., Any] | None = field(default=None, compare=False)
    payload: tuple = field(default=(), compare=False)


class Simulator:
    """Single-clock event loop with integer nanosecond time."""

    def __init__(self, record_digest: bool = False):
        self.now = 0
        self._queue: list[tuple] = []
        self._seq = 0
        self.dispatched = 0
        self._digest = hashlib.sha256() if record_digest else None

    def __len__(self) -> int:
        return len(self._queue)

    def schedule(self, fire_at: int, kind: EventKind, handler: Callable[..., Any] | None = None,
                 *payload) -> Event:
        if fire_at < self.now:
            raise SchedulingError(
                f"cannot schedule {kind.name} at t={fire_at} ns: clock is already at {self.now} ns")
        seq = self._seq
        self._seq += 1
        heapq.heappush(self._queue, (fire_at, seq, kind, handler, payload))
        return Event(fire_at, seq, kind, handler, payload)

    def schedule_event(self, event: Event) -> None:
        """Queue a prebuilt :class:`Event`, keeping its ``seq`` for ordering."""
        if event.fire_at < self.now:
            raise SchedulingError(
                f"cannot schedule {event.kind.name} at t={event.fire_at} ns: "
                f"clock is already at {self.now} ns")
        self._seq = max(self._seq, event.seq + 1)
        heapq.heappush(self._queue, (event.fire_at, event.seq, event.kind, event.handler, event.payload))

    def after(self, delay: int, kind: EventKind, handler: Callable[..., Any], *payload) -> Event:
        return self.schedule(self.now + delay, kind, handler, *payload)

    def peek_time(self) -> int | None:
        return self._queue[0][0] if self._queue else None

    def run_until(self, t_end: int) -> int:
        """Dispatch every event with ``fire_at <= t_end``; return how many ran."""
        if t_end < self.now:
            raise SchedulingError(f"run_until({t_end}) is behind the clock ({self.now})")
        queue = self._queue
        pop = heapq.heappop
        digest = self._digest
        count = 0
        while queue and queue[0][0] <= t_end:
            fire_at, seq, kind, handler, payload = pop(queue)
            self.now = fire_at
            if digest is not None:
                digest.update(b"%d:%d:%d;" % (fire_at, seq, kind))
            if handler is not None:
                handler(*payload)
            count += 1
        self.now = t_end
        self.dispatched += count
        return count

    def digest(self) -> str:
        if self._digest is None:
            raise RuntimeError("simulator was created without record_digest=True")
        return self._digest.hexdigest()
