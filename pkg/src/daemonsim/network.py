"""Links between the compute component and each memory component.

A ``Link`` is one direction of a full-duplex connection: packets serialize
back to back at the effective bandwidth and then take a fixed switch latency
to arrive. Background disturbance is modelled as a fraction of the bandwidth
taken away during a time window.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .kernel import PS_PER_NS, PS_PER_S

HEADER_BYTES = 16
INTERVAL_PS = 100_000 * PS_PER_NS
DRAM_BUS_BANDWIDTH = 17e9


class PacketKind(Enum):
    LINE_REQUEST = "LineRequest"
    LINE_DATA = "LineData"
    PAGE_REQUEST = "PageRequest"
    PAGE_DATA = "PageData"
    DIRTY_LINE_WB = "DirtyLineWB"
    DIRTY_PAGE_WB = "DirtyPageWB"

    @property
    def is_page(self) -> bool:
        return self in (PacketKind.PAGE_REQUEST, PacketKind.PAGE_DATA, PacketKind.DIRTY_PAGE_WB)

    @property
    def is_writeback(self) -> bool:
        return self in (PacketKind.DIRTY_LINE_WB, PacketKind.DIRTY_PAGE_WB)


class Packet:
    """A network message. ``payload_bytes`` excludes the fixed header."""

    __slots__ = ("kind", "page_id", "line_offset", "payload_bytes", "src", "dst", "tag",
                 "data", "fence", "wb_seq", "header_bytes")

    def __init__(self, kind, page_id, line_offset=None, payload_bytes=0, src=None, dst=None,
                 tag=0, data=None, fence=0, wb_seq=0, header_bytes=HEADER_BYTES):
        self.kind = kind
        self.page_id = page_id
        self.line_offset = line_offset
        self.payload_bytes = payload_bytes
        self.src = src
        self.dst = dst
        self.tag = tag
        self.data = data
        # writebacks to this page issued before a request; the memory side
        # serves the request only after that many writebacks have landed
        self.fence = fence
        self.wb_seq = wb_seq
        self.header_bytes = header_bytes

    @property
    def wire_bytes(self) -> int:
        return self.payload_bytes + self.header_bytes

    @property
    def is_page(self) -> bool:
        return self.kind.is_page

    def __repr__(self):
        off = "" if self.line_offset is None else f"+{self.line_offset}"
        return f"<{self.kind.value} page={self.page_id:#x}{off} tag={self.tag} {self.wire_bytes}B>"


@dataclass(frozen=True)
class Disturbance:
    start: int  # ps
    end: int    # ps, exclusive
    fraction: float

    def __post_init__(self):
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError(f"disturbance fraction must be in [0, 1], got {self.fraction}")
        if self.end <= self.start:
            raise ValueError("disturbance window must have end > start")


def serialization_ps(nbytes: int, bandwidth: float) -> int:
    if nbytes <= 0:
        return 0
    return math.ceil(nbytes * PS_PER_S / bandwidth - 1e-9)


def transfer_time(payload_bytes: int, bandwidth: float, switch_latency: int,
                  disturbance_fraction: float = 0.0) -> int:
    """Unloaded latency of one transfer in ps: switch latency plus serialization."""
    if payload_bytes < 0:
        raise ValueError("payload_bytes must be >= 0")
    effective = bandwidth * (1.0 - disturbance_fraction)
    if payload_bytes and effective <= 0:
        return math.inf
    return switch_latency + serialization_ps(payload_bytes, effective)


class Link:
    def __init__(self, link_id: str, bandwidth: float, switch_latency: int,
                 interval: int = INTERVAL_PS):
        if bandwidth <= 0:
            raise ValueError("link bandwidth must be positive")
        if switch_latency < 0:
            raise ValueError("switch latency must be >= 0")
        self.link_id = link_id
        self.bandwidth = bandwidth
        self.switch_latency = switch_latency
        self.interval = interval
        self.busy_until = 0
        self.disturbances: list[Disturbance] = []
        self.interval_bytes: dict[int, float] = {}
        self.bytes_by_kind: dict[PacketKind, int] = {k: 0 for k in PacketKind}
        self.payload_by_kind: dict[PacketKind, int] = {k: 0 for k in PacketKind}
        self.packets_by_kind: dict[PacketKind, int] = {k: 0 for k in PacketKind}
        self.busy_time = 0
        self.last_arrival = 0

    def inject_disturbance(self, schedule):
        windows = sorted(list(self.disturbances) + list(schedule), key=lambda d: (d.start, d.end))
        for a, b in zip(windows, windows[1:]):
            if b.start < a.end:
                raise ValueError(f"overlapping disturbance windows {a} and {b}")
        self.disturbances = windows

    def disturbance_at(self, t: int) -> float:
        for d in self.disturbances:
            if d.start <= t < d.end:
                return d.fraction
            if d.start > t:
                break
        return 0.0

    def effective_bandwidth(self, t: int) -> float:
        return self.bandwidth * (1.0 - self.disturbance_at(t))

    def transfer_time(self, payload_bytes: int, t: int = 0) -> int:
        return transfer_time(payload_bytes, self.bandwidth, self.switch_latency, self.disturbance_at(t))

    def serialization_time(self, nbytes: int, t: int) -> int:
        eff = self.effective_bandwidth(t)
        if eff <= 0:
            raise ValueError(f"link {self.link_id} has no bandwidth left at t={t}")
        return serialization_ps(nbytes, eff)

    def send(self, packet: Packet, now: int) -> tuple[int, int]:
        """Serialize ``packet``; returns (serialization end, arrival time)."""
        start = max(now, self.busy_until)
        nbytes = packet.wire_bytes
        end = start + self.serialization_time(nbytes, start)
        self.busy_until = end
        self.busy_time += end - start
        self._account(start, end, nbytes)
        kind = packet.kind
        self.bytes_by_kind[kind] += nbytes
        self.payload_by_kind[kind] += packet.payload_bytes
        self.packets_by_kind[kind] += 1
        arrival = end + self.switch_latency
        if arrival < self.last_arrival:
            raise AssertionError("link reordered packets")
        self.last_arrival = arrival
        return end, arrival

    def _account(self, start: int, end: int, nbytes: int):
        """Spread nbytes over the intervals covered by [start, end)."""
        if nbytes == 0:
            return
        iv = self.interval
        first, last = start // iv, max(start, end - 1) // iv
        acc = self.interval_bytes
        if first == last:
            acc[first] = acc.get(first, 0) + nbytes
            return
        span = end - start
        given = 0
        for idx in range(first, last + 1):
            lo = max(start, idx * iv)
            hi = min(end, (idx + 1) * iv)
            share = nbytes - given if idx == last else nbytes * (hi - lo) // span
            acc[idx] = acc.get(idx, 0) + share
            given += share

    @property
    def total_bytes(self) -> int:
        return sum(self.bytes_by_kind.values())

    def interval_utilization(self, until: int | None = None) -> list[tuple[int, float]]:
        """(interval index, bytes / (nominal bandwidth * interval)) for every interval up to ``until``."""
        if until is None:
            until = max(self.busy_until, 1)
        n = max(1, -(-until // self.interval))
        capacity = self.bandwidth * self.interval / PS_PER_S
        return [(i, self.interval_bytes.get(i, 0) / capacity) for i in range(n)]


class Channel:
    """A full-duplex link pair: ``up`` carries compute -> memory traffic."""

    def __init__(self, name: str, bandwidth: float, switch_latency: int, interval: int = INTERVAL_PS):
        self.name = name
        self.up = Link(f"{name}:up", bandwidth, switch_latency, interval)
        self.down = Link(f"{name}:down", bandwidth, switch_latency, interval)

    def inject_disturbance(self, schedule):
        schedule = list(schedule)
        self.up.inject_disturbance(schedule)
        self.down.inject_disturbance(schedule)

    @property
    def links(self):
        return (self.up, self.down)
