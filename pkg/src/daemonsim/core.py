"""Abstract out-of-order core driven by an LLC-miss trace.

The core issues one record per ``gap`` compute cycles and keeps up to
``window_limit`` misses in flight. Slots retire in issue order, like a
reorder buffer, so a slow old miss blocks issue even if younger ones are done.
"""
from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass

from .kernel import SimulationError
from .workload import Op


def write_value(core_id: int, index: int) -> bytes:
    """The 8-byte word a write record stores; unique per (core, record)."""
    return struct.pack("<Q", ((core_id + 1) << 40) | (index + 1))


class AccessRequest:
    __slots__ = ("core_id", "index", "address", "op", "issue_time", "completion_time",
                 "local_hit", "remote")

    def __init__(self, core_id, index, address, op, issue_time):
        self.core_id = core_id
        self.index = index
        self.address = address
        self.op = op
        self.issue_time = issue_time
        self.completion_time = None
        self.local_hit = False
        self.remote = False

    @property
    def page(self) -> int:
        return self.address >> 12

    @property
    def offset(self) -> int:
        return (self.address >> 6) & 63

    @property
    def is_write(self) -> bool:
        return self.op is Op.WRITE

    @property
    def latency(self) -> int:
        return self.completion_time - self.issue_time

    def __repr__(self):
        return f"<req core={self.core_id} #{self.index} {self.op.value} {self.address:#x}>"


@dataclass
class CoreMetrics:
    core_id: int
    cycles: int
    instructions: int
    pseudo_ipc: float
    mean_access_latency_ns: float
    mean_remote_latency_ns: float
    p50_remote_latency_ns: float
    p99_remote_latency_ns: float
    remote_requests: int
    finish_time_ps: int


def _percentile(sorted_values, q):
    if not sorted_values:
        return 0.0
    idx = min(len(sorted_values) - 1, max(0, round(q * (len(sorted_values) - 1))))
    return sorted_values[idx]


class Core:
    def __init__(self, sim, core_id: int, trace, cycle: int, window_limit: int = 128):
        if window_limit < 1:
            raise ValueError("window_limit must be >= 1")
        self.sim = sim
        self.core_id = core_id
        self.trace = list(trace)
        self.cycle = cycle
        self.window_limit = window_limit
        self.memory = None  # object with access(req)
        self.window: deque[AccessRequest] = deque()
        self.next_index = 0
        self.last_issue = 0
        self.pending_issue = None
        self.completed = 0
        self.finish_time = 0
        self.latency_sum = 0
        self.remote_latencies: list[int] = []

    @property
    def outstanding(self) -> int:
        return sum(1 for r in self.window if r.completion_time is None)

    @property
    def done(self) -> bool:
        return self.next_index >= len(self.trace) and not self.window

    def start(self):
        self._schedule_next()

    def _schedule_next(self):
        if self.pending_issue is not None or self.next_index >= len(self.trace):
            return
        if len(self.window) >= self.window_limit:
            return  # resumes when the oldest slot retires
        rec = self.trace[self.next_index]
        at = max(self.sim.now, self.last_issue + rec.gap * self.cycle)
        self.pending_issue = self.sim.schedule(at, self._issue, target=f"core{self.core_id}",
                                               kind="issue")

    def _issue(self):
        self.pending_issue = None
        rec = self.trace[self.next_index]
        req = AccessRequest(self.core_id, self.next_index, rec.address, rec.op, self.sim.now)
        self.next_index += 1
        self.last_issue = self.sim.now
        self.window.append(req)
        self.memory.access(req)
        self._schedule_next()

    def complete(self, req: AccessRequest):
        if req.completion_time is not None:
            raise SimulationError(f"{req!r} completed twice")
        now = self.sim.now
        if now < req.issue_time:
            raise SimulationError(f"{req!r} completed before it was issued")
        req.completion_time = now
        self.completed += 1
        lat = now - req.issue_time
        self.latency_sum += lat
        if req.remote:
            self.remote_latencies.append(lat)
        freed = False
        while self.window and self.window[0].completion_time is not None:
            self.window.popleft()
            freed = True
        if not self.window and self.next_index >= len(self.trace):
            self.finish_time = now
        if freed:
            self._schedule_next()

    def report_core_metrics(self) -> CoreMetrics:
        if not self.done:
            raise SimulationError(f"core {self.core_id} has not finished")
        n = len(self.trace)
        end = max(self.finish_time, self.last_issue)
        cycles = max(1, round(end / self.cycle))
        remote = sorted(self.remote_latencies)
        return CoreMetrics(
            core_id=self.core_id,
            cycles=cycles,
            instructions=n,
            pseudo_ipc=n / cycles,
            mean_access_latency_ns=self.latency_sum / n / 1000 if n else 0.0,
            mean_remote_latency_ns=sum(remote) / len(remote) / 1000 if remote else 0.0,
            p50_remote_latency_ns=_percentile(remote, 0.5) / 1000,
            p99_remote_latency_ns=_percentile(remote, 0.99) / 1000,
            remote_requests=len(remote),
            finish_time_ps=end,
        )
