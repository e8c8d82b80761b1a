"""Page-granularity inclusive cache of remote memory on the compute component."""
from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass

from .kernel import PS_PER_S, ns

PAGE_SIZE = 4096
LINE_SIZE = 64

POLICIES = ("lru", "fifo")


class LocalMemoryError(RuntimeError):
    pass


@dataclass
class EvictedPage:
    page_id: int
    dirty: bool
    data: bytes


class _Frame:
    __slots__ = ("data", "dirty")

    def __init__(self, data, dirty):
        self.data = data
        self.dirty = dirty


def access_time(nbytes: int, processing_latency: int, bus_bandwidth: float) -> int:
    """One DRAM access: fixed processing latency plus the bus transfer, in ps."""
    return processing_latency + math.ceil(nbytes * PS_PER_S / bus_bandwidth - 1e-9)


class LocalMemory:
    """Exact LRU or FIFO over resident pages.

    Lookups cost one metadata access (a 64 B DRAM access). A hit adds one more
    processing latency for the data access; the 64 B bus transfer is charged
    once per hit. Bus contention is not modelled.
    """

    def __init__(self, capacity_pages: int, policy: str = "lru",
                 bus_bandwidth: float = 17e9, processing_latency: int = ns(15)):
        policy = policy.lower()
        if policy in ("approxlru", "approx-lru"):
            policy = "lru"
        if policy not in POLICIES:
            raise ValueError(f"replacement policy must be one of {POLICIES}, got {policy!r}")
        if capacity_pages < 0:
            raise ValueError("capacity_pages must be >= 0")
        self.capacity_pages = capacity_pages
        self.policy = policy
        self.bus_bandwidth = bus_bandwidth
        self.processing_latency = processing_latency
        self.resident: OrderedDict[int, _Frame] = OrderedDict()
        self.metadata_latency = access_time(LINE_SIZE, processing_latency, bus_bandwidth)
        self.hit_latency = self.metadata_latency + processing_latency
        self.lookups = 0
        self.hits = 0
        self.installs = 0
        self.evictions = 0
        self.dirty_evictions = 0

    def __contains__(self, page_id) -> bool:
        return page_id in self.resident

    def __len__(self) -> int:
        return len(self.resident)

    def lookup(self, page_id: int) -> tuple[bool, int]:
        self.lookups += 1
        frame = self.resident.get(page_id)
        if frame is None:
            return False, self.metadata_latency
        self.hits += 1
        if self.policy == "lru":
            self.resident.move_to_end(page_id)
        return True, self.hit_latency

    def install(self, page_id: int, data, dirty: bool = False) -> EvictedPage | None:
        if page_id in self.resident:
            raise LocalMemoryError(f"page {page_id:#x} is already resident")
        if len(data) != PAGE_SIZE:
            raise ValueError("page image must be 4096 bytes")
        if self.capacity_pages == 0:
            return EvictedPage(page_id, dirty, bytes(data))
        victim = None
        if len(self.resident) >= self.capacity_pages:
            vid, frame = self.resident.popitem(last=False)
            victim = EvictedPage(vid, frame.dirty, bytes(frame.data))
            self.evictions += 1
            self.dirty_evictions += frame.dirty
        self.resident[page_id] = _Frame(bytearray(data), dirty)
        self.installs += 1
        return victim

    def victim_candidate(self) -> int | None:
        if len(self.resident) < self.capacity_pages or not self.resident:
            return None
        return next(iter(self.resident))

    def _frame(self, page_id) -> _Frame:
        try:
            return self.resident[page_id]
        except KeyError:
            raise LocalMemoryError(f"page {page_id:#x} is not resident") from None

    def mark_dirty(self, page_id: int):
        self._frame(page_id).dirty = True

    def is_dirty(self, page_id: int) -> bool:
        return self._frame(page_id).dirty

    def read_line(self, page_id: int, offset: int) -> bytes:
        if not 0 <= offset < PAGE_SIZE // LINE_SIZE:
            raise ValueError(f"line offset must be in 0..63, got {offset}")
        start = offset * LINE_SIZE
        return bytes(self._frame(page_id).data[start:start + LINE_SIZE])

    def write_line(self, page_id: int, offset: int, data):
        if not 0 <= offset < PAGE_SIZE // LINE_SIZE:
            raise ValueError(f"line offset must be in 0..63, got {offset}")
        if len(data) != LINE_SIZE:
            raise ValueError("line data must be 64 bytes")
        frame = self._frame(page_id)
        start = offset * LINE_SIZE
        frame.data[start:start + LINE_SIZE] = data
        frame.dirty = True

    def page_image(self, page_id: int) -> bytes:
        return bytes(self._frame(page_id).data)

    @property
    def hit_ratio(self) -> float:
        return self.hits / self.lookups if self.lookups else 0.0
