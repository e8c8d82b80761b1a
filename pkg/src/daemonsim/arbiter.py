"""Queue controller: sub-block and page FIFOs in front of one shared resource.

The resource (an egress link direction or a DRAM bus) is fed by a slot
pattern. With partitioning the pattern is one page slot followed by K line
slots, where K gives lines ``ratio`` of the bytes moved by that page (a full
page earns the floor of 21.33 = 21 at r = 0.25, a compressed page fewer, never
below one). ``strict`` mode burns one line-serialization time on an empty slot,
``work-conserving`` skips it. ``fifo`` mode keeps a single arrival-ordered
queue for both granularities (no partitioning).
"""
from __future__ import annotations

import math
from collections import deque

from .kernel import SimulationError

MODES = ("strict", "work-conserving", "fifo")


def partition_lines_per_page(ratio: float, page: int = 4096, line: int = 64) -> int:
    """Line slots per page slot so that lines get ``ratio`` of the payload bytes."""
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"partition ratio must be in (0, 1), got {ratio}")
    # small epsilon so that exact products such as 0.8/0.2*64 = 256 survive float error
    return math.floor((page / line) * ratio / (1.0 - ratio) + 1e-9)


class Pool:
    """Capacity shared by one or more queues."""

    __slots__ = ("capacity", "used", "peak", "owners")

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("queue capacity must be >= 1")
        self.capacity = capacity
        self.used = 0
        self.peak = 0
        self.owners: list = []

    @property
    def free(self) -> int:
        return self.capacity - self.used

    def take(self):
        self.used += 1
        if self.used > self.capacity:
            raise SimulationError("queue capacity exceeded")
        if self.used > self.peak:
            self.peak = self.used

    def give(self):
        self.used -= 1
        # a forced push may be waiting on any controller sharing this pool
        for owner in self.owners:
            if owner.overflow:
                owner._drain_overflow()


class QueueController:
    """Arbitrates between a line queue and a page queue.

    ``transmit(item, now)`` starts service of ``item`` and returns the time
    the resource becomes free again. ``on_space`` (optional) is called after
    an item leaves a queue so producers can retry.
    """

    def __init__(self, sim, name: str, transmit, mode: str = "fifo", ratio: float = 0.25,
                 line_pool: Pool | None = None, page_pool: Pool | None = None,
                 line_capacity: int = 128, page_capacity: int = 256, idle_slot_time: int = 0,
                 on_space=None, page_bytes=None):
        if mode not in MODES:
            raise ValueError(f"slot policy must be one of {MODES}, got {mode!r}")
        self.sim = sim
        self.name = name
        self.transmit = transmit
        self.mode = mode
        self.k = partition_lines_per_page(ratio) if mode != "fifo" else 0
        if mode != "fifo" and self.k < 1:
            raise ValueError(f"partition ratio {ratio} leaves no line slot per page slot")
        # line slots earned per payload byte of a page slot
        self.line_rate = ratio / (1.0 - ratio) / 64 if mode != "fifo" else 0.0
        self.page_bytes = page_bytes  # item -> payload bytes; None means a full page
        self.round_k = self.k
        self.line_pool = line_pool or Pool(line_capacity)
        self.page_pool = page_pool or Pool(page_capacity)
        self.idle_slot_time = idle_slot_time
        self.on_space = on_space
        for pool in {id(self.line_pool): self.line_pool, id(self.page_pool): self.page_pool}.values():
            pool.owners.append(self)
        self.lines: deque = deque()
        self.pages: deque = deque()
        self.shared: deque = deque()  # (is_page, item) in fifo mode
        self.overflow: deque = deque()  # forced pushes waiting for capacity
        self.slot = 0  # 0 = page slot, 1..round_k = line slots
        self.free_at = 0
        self.parked = True
        self.wakeup = None
        self.issued_lines = 0
        self.issued_pages = 0
        self.idle_slots = 0
        self.idle_time = 0

    # -- producer side -------------------------------------------------
    def can_accept(self, is_page: bool) -> bool:
        return (self.page_pool if is_page else self.line_pool).free > 0

    def push(self, item, is_page: bool, force: bool = False) -> bool:
        """Queue ``item``. Returns False when full, unless ``force`` holds it aside."""
        if not self.can_accept(is_page) or (force and self.overflow):
            if not force:
                return False
            self.overflow.append((is_page, item))
            return True
        self._enqueue(is_page, item)
        self._kick(is_page)
        return True

    def _enqueue(self, is_page, item):
        (self.page_pool if is_page else self.line_pool).take()
        if self.mode == "fifo":
            self.shared.append((is_page, item))
        elif is_page:
            self.pages.append(item)
        else:
            self.lines.append(item)

    def _drain_overflow(self):
        while self.overflow and self.can_accept(self.overflow[0][0]):
            is_page, item = self.overflow.popleft()
            self._enqueue(is_page, item)
            self._kick(is_page)

    def _kick(self, is_page: bool):
        if self.parked:
            # an idle controller starts a fresh slot pattern at the waking item
            self.slot = 0 if is_page else 1
            self.round_k = self.k
            self.parked = False
            self.wakeup = self.sim.schedule(max(self.sim.now, self.free_at), self._issue,
                                            target=self.name, kind="issue")

    def __len__(self):
        return len(self.lines) + len(self.pages) + len(self.shared) + len(self.overflow)

    @property
    def occupancy(self) -> tuple[int, int]:
        if self.mode == "fifo":
            pages = sum(1 for p, _ in self.shared if p)
            return len(self.shared) - pages, pages
        return len(self.lines), len(self.pages)

    # -- service side ----------------------------------------------------
    def _pop(self):
        """Next (is_page, item) per the slot pattern, None for an idle slot, or 'park'."""
        if self.mode == "fifo":
            if not self.shared:
                return "park"
            return self.shared.popleft()
        if not self.lines and not self.pages:
            return "park"
        want_page = self.slot == 0
        if not (self.pages if want_page else self.lines):
            if self.mode == "strict":
                self._advance(None)
                return None
            # work-conserving: jump to the other kind of slot
            want_page = not want_page
            self.slot = 0 if want_page else 1
        item = (self.pages if want_page else self.lines).popleft()
        self._advance(item if want_page else None)
        return want_page, item

    def _advance(self, page_item):
        if self.slot == 0:
            if page_item is None:
                self.round_k = self.k
            else:
                size = 4096 if self.page_bytes is None else self.page_bytes(page_item)
                self.round_k = min(self.k, max(1, int(size * self.line_rate + 1e-9)))
        self.slot = self.slot + 1 if self.slot < self.round_k else 0

    def _issue(self):
        now = self.sim.now
        self.wakeup = None
        picked = self._pop()
        if picked == "park":
            self.parked = True
            return
        if picked is None:
            self.idle_slots += 1
            self.idle_time += self.idle_slot_time
            self.free_at = now + self.idle_slot_time
            self.sim.schedule(self.free_at, self._issue, target=self.name, kind="idle")
            return
        is_page, item = picked
        (self.page_pool if is_page else self.line_pool).give()
        if is_page:
            self.issued_pages += 1
        else:
            self.issued_lines += 1
        self.free_at = self.transmit(item, now)
        if self.free_at < now:
            raise SimulationError(f"{self.name}: transmit returned a time in the past")
        self.sim.schedule(self.free_at, self._issue, target=self.name, kind="issue")
        if self.on_space is not None:
            self.on_space()
