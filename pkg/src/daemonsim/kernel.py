"""Deterministic discrete-event engine.

Time is an integer number of picoseconds. Events that share a timestamp are
delivered in insertion order, which gives a total order without any notion of
component priority.
"""
from __future__ import annotations

import heapq

PS_PER_NS = 1_000
PS_PER_US = 1_000_000
PS_PER_S = 10**12


class SimulationError(RuntimeError):
    """A logic error inside the simulation (scheduling in the past, protocol bugs)."""


def ns(value) -> int:
    return round(value * PS_PER_NS)


def cycle_ps(frequency_hz: float) -> int:
    return round(PS_PER_S / frequency_hz)


class Event:
    __slots__ = ("time", "seq", "handler", "args", "target", "kind", "cancelled")

    def __init__(self, time, seq, handler, args, target, kind):
        self.time = time
        self.seq = seq
        self.handler = handler
        self.args = args
        self.target = target
        self.kind = kind
        self.cancelled = False

    def cancel(self):
        self.cancelled = True

    def __repr__(self):
        return f"Event(t={self.time}, seq={self.seq}, {self.target}:{self.kind})"


class Simulator:
    """Global clock plus a binary-heap event queue.

    If ``trace`` is true every executed event is appended to ``log`` as
    ``<ticks>,<seq>,<target>,<kind>``.
    """

    def __init__(self, trace: bool = False):
        self.now = 0
        self._heap = []
        self._seq = 0
        self.trace = trace
        self.log: list[str] = []
        self.executed = 0
        # called after every executed event; used for invariant checks in tests
        self.post_event = None

    def schedule(self, time: int, handler, *args, target: str = "", kind: str = "") -> Event:
        if time < self.now:
            raise SimulationError(
                f"cannot schedule {target}:{kind} at t={time}, clock is already at {self.now}")
        ev = Event(time, self._seq, handler, args, target, kind)
        self._seq += 1
        heapq.heappush(self._heap, (time, ev.seq, ev))
        return ev

    def after(self, delay: int, handler, *args, target: str = "", kind: str = "") -> Event:
        return self.schedule(self.now + delay, handler, *args, target=target, kind=kind)

    def pending(self) -> int:
        return sum(1 for _, _, ev in self._heap if not ev.cancelled)

    def run_until(self, limit: int | None = None) -> int:
        """Process every event with ``time <= limit`` (all events if None)."""
        heap = self._heap
        pop = heapq.heappop
        while heap:
            time = heap[0][0]
            if limit is not None and time > limit:
                break
            _, _, ev = pop(heap)
            if ev.cancelled:
                continue
            self.now = time
            if self.trace:
                self.log.append(f"{time},{ev.seq},{ev.target},{ev.kind}")
            self.executed += 1
            ev.handler(*ev.args)
            if self.post_event is not None:
                self.post_event()
        if limit is not None and limit > self.now:
            self.now = limit
        return self.now

    def dump_log(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for line in self.log:
                fh.write(line + "\n")
