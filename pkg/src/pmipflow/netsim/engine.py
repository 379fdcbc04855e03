"""Discrete-event core: integer-microsecond clock over a binary heap.

Time only moves when an event is popped; ties break on scheduling order, so
a run is a pure function of the scenario and seed.  Nothing here may touch
the wall clock.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Callable


@dataclass(order=True)
class SimEvent:
    fire_at: int
    seq: int
    action: Callable[[], None] = field(compare=False)
    cancelled: bool = field(default=False, compare=False)


class Simulator:
    def __init__(self) -> None:
        self.now = 0
        self._heap: list[SimEvent] = []
        self._seq = 0
        self.processed = 0

    def schedule(self, delay_us: int, action: Callable[[], None]) -> SimEvent:
        if delay_us < 0:
            raise ValueError(f"cannot schedule {delay_us}us into the past")
        event = SimEvent(self.now + delay_us, self._seq, action)
        self._seq += 1
        heapq.heappush(self._heap, event)
        return event

    def schedule_at(self, fire_at: int, action: Callable[[], None]) -> SimEvent:
        return self.schedule(fire_at - self.now, action)

    def run(self, horizon_us: int | None = None) -> None:
        """Pop until the queue drains or the next event lies past the horizon.

        The clock ends at the horizon even when the queue drains early, so
        callers can read `now` as "how much simulated time has passed".
        """
        while self._heap:
            if horizon_us is not None and self._heap[0].fire_at > horizon_us:
                break
            event = heapq.heappop(self._heap)
            if event.cancelled:
                continue
            assert event.fire_at >= self.now
            self.now = event.fire_at
            self.processed += 1
            event.action()
        if horizon_us is not None and horizon_us > self.now:
            self.now = horizon_us

    def pending(self) -> int:
        return sum(1 for e in self._heap if not e.cancelled)
