"""Compute-component engine: inflight buffers, selection unit, dirty-data protocol.

Requests that miss in local memory land in ``on_miss``. Depending on the
scheme they schedule a page migration, a cache-line fetch, or both. The
engine also owns the bookkeeping LLC (a FIFO of dirty lines) whose
overflow drives the dirty-eviction protocol.

Coherence between writebacks and later reads is kept with per-page
writeback sequence numbers: every writeback gets the next number for its
page, and every request carries the count issued so far as a fence the
memory side must reach before reading.
"""
from __future__ import annotations

from collections import OrderedDict, deque
from enum import Enum

from .arbiter import Pool, QueueController, partition_lines_per_page
from .compression import CompressedPage, PageCodec
from .core import AccessRequest, write_value
from .kernel import SimulationError
from .local_memory import LINE_SIZE, PAGE_SIZE, LocalMemory, access_time
from .network import HEADER_BYTES, Packet, PacketKind

__all__ = ["ComputeEngine", "EngineParams", "PageState", "partition_lines_per_page"]

LINES_PER_PAGE = PAGE_SIZE // LINE_SIZE


class PageState(Enum):
    SCHEDULED = "Scheduled"
    MOVED = "Moved"
    THROTTLED = "Throttled"
    INVALID = "Invalid"


class InflightPageEntry:
    __slots__ = ("page_id", "state", "dirty_mask", "tag")

    def __init__(self, page_id, tag):
        self.page_id = page_id
        self.state = PageState.SCHEDULED
        self.dirty_mask = 0
        self.tag = tag


class InflightSubBlockEntry:
    __slots__ = ("page_id", "offset_mask", "tags")

    def __init__(self, page_id):
        self.page_id = page_id
        self.offset_mask = 0
        self.tags: dict[int, int] = {}

    @property
    def state(self) -> PageState:
        return PageState.SCHEDULED if self.offset_mask else PageState.INVALID


class EngineParams:
    """Structure sizes of the compute engine."""

    def __init__(self, sub_block_entries=128, page_entries=256, sub_block_queue=128,
                 page_queue=256, dirty_entries=256, dirty_threshold=8, llc_dirty_lines=4096):
        self.sub_block_entries = sub_block_entries
        self.page_entries = page_entries
        self.sub_block_queue = sub_block_queue
        self.page_queue = page_queue
        self.dirty_entries = dirty_entries
        self.dirty_threshold = dirty_threshold
        self.llc_dirty_lines = llc_dirty_lines


class ComputeEngine:
    def __init__(self, sim, scheme, local_memory: LocalMemory, channels, memories, home,
                 codec: PageCodec, params: EngineParams | None = None):
        self.sim = sim
        self.scheme = scheme
        self.lm = local_memory
        self.channels = channels
        self.memories = memories
        self.home = home
        self.codec = codec
        self.p = params or EngineParams()
        self.local_access = access_time(LINE_SIZE, local_memory.processing_latency,
                                        local_memory.bus_bandwidth)
        self.cores = {}
        # partitioned controllers pace requests by the size of the data they return;
        # page replies may be compressed, so their size is a running estimate
        self.pace_requests = scheme.partitioned
        self.page_reply_estimate = float(PAGE_SIZE + HEADER_BYTES)
        line_pool = Pool(self.p.sub_block_queue)
        page_pool = Pool(self.p.page_queue)
        self.line_pool, self.page_pool = line_pool, page_pool
        self.egress = []
        for i, ch in enumerate(channels):
            idle = ch.up.serialization_time(LINE_SIZE + HEADER_BYTES, 0)
            self.egress.append(QueueController(
                sim, f"compute.egress{i}", self._make_sender(i), mode=scheme.arbiter_mode,
                ratio=scheme.partition_ratio or 0.25, line_pool=line_pool, page_pool=page_pool,
                idle_slot_time=idle, on_space=self._retry_stalled, page_bytes=self._page_slot_bytes))
        self.page_entries: dict[int, InflightPageEntry] = {}
        self.sub_entries: dict[int, InflightSubBlockEntry] = {}
        self.waiters: dict[int, dict[int, list]] = {}
        self.dirty_buffer: dict[int, dict[int, bytes]] = {}
        self.dirty_count = 0
        self.llc: OrderedDict[int, bytearray] = OrderedDict()
        self.wb_seq: dict[int, int] = {}
        self.stalled: deque[AccessRequest] = deque()
        # writes to one line apply in issue order: a write waits here while an
        # older write to the same line is still outstanding
        self.write_chains: dict[int, deque] = {}
        self._retrying = False
        self._next_tag = 1
        self.tags: dict[int, tuple] = {}
        self.cancelled: set[int] = set()
        self.counters = dict.fromkeys((
            "requests", "llc_hits", "local_hits", "misses", "issued_lines", "issued_pages",
            "dropped_lines", "line_waits", "page_waits", "stalls", "forwarded", "throttled_pages",
            "dirty_flushes", "discarded_pages", "rerequested_pages", "late_lines",
            "line_writebacks", "page_writebacks", "dirty_buffered", "local_line_writes",
            "installs", "completions"), 0)

    # -- helpers -----------------------------------------------------------
    def attach_core(self, core):
        self.cores[core.core_id] = core
        core.memory = self

    def _tag(self, kind, page, off=None) -> int:
        tag = self._next_tag
        self._next_tag += 1
        self.tags[tag] = (kind, page, off)
        return tag

    def _cancel(self, tag):
        del self.tags[tag]
        self.cancelled.add(tag)

    def _fence(self, page) -> int:
        return self.wb_seq.get(page, 0)

    def _next_wb(self, page) -> int:
        seq = self.wb_seq.get(page, 0) + 1
        self.wb_seq[page] = seq
        return seq

    def _page_slot_bytes(self, pkt) -> int:
        if pkt.kind.is_writeback:
            return pkt.payload_bytes
        return round(self.page_reply_estimate) - HEADER_BYTES

    def _egress_for(self, page) -> QueueController:
        return self.egress[self.home(page)]

    def _make_sender(self, idx):
        channel = self.channels[idx]
        memory = self.memories[idx]

        def send(pkt: Packet, now: int) -> int:
            if pkt.kind is PacketKind.PAGE_REQUEST:
                entry = self.page_entries.get(pkt.page_id)
                if entry is not None and entry.tag == pkt.tag and entry.state is PageState.SCHEDULED:
                    entry.state = PageState.MOVED
            end, arrival = channel.up.send(pkt, now)
            self.sim.schedule(arrival, memory.on_packet, pkt, target=memory.name, kind=pkt.kind.value)
            if self.pace_requests and not pkt.kind.is_writeback:
                # a request holds its slot for as long as its reply will hold the down link
                reply = self.page_reply_estimate if pkt.kind.is_page else LINE_SIZE + HEADER_BYTES
                end = max(end, now + channel.down.serialization_time(round(reply), now))
            return end
        return send

    @property
    def sub_util(self) -> float:
        return len(self.sub_entries) / self.p.sub_block_entries

    @property
    def page_util(self) -> float:
        return len(self.page_entries) / self.p.page_entries

    def _add_waiter(self, req):
        self.waiters.setdefault(req.page, {}).setdefault(req.offset, []).append(req)

    # -- LLC bookkeeping and completion -------------------------------------
    def _line_base(self, page, off, fallback) -> bytes:
        line = (page << 6) | off
        data = self.llc.get(line)
        if data is not None:
            return data
        buf = self.dirty_buffer.get(page)
        if buf is not None and off in buf:
            return buf[off]
        if page in self.lm:
            return self.lm.read_line(page, off)
        if fallback is None:
            raise SimulationError(f"no data source for line {line:#x}")
        return fallback

    def _complete(self, req: AccessRequest, fallback=None):
        if req.is_write:
            page, off = req.page, req.offset
            line_id = (page << 6) | off
            chain = self.write_chains[line_id]
            if chain.popleft() is not req:
                raise SimulationError(f"{req!r} completed out of order")
            if chain:
                self.sim.schedule(self.sim.now, self._start, chain[0], target="compute", kind="chained")
            else:
                del self.write_chains[line_id]
            data = bytearray(self._line_base(page, off, fallback))
            word = req.address & (LINE_SIZE - 8)
            data[word:word + 8] = write_value(req.core_id, req.index)
            llc = self.llc
            if line_id in llc:
                llc[line_id] = data
            else:
                llc[line_id] = data
                if len(llc) > self.p.llc_dirty_lines:
                    victim, vdata = llc.popitem(last=False)
                    self.on_dirty_eviction(victim, bytes(vdata))
        self.counters["completions"] += 1
        self.cores[req.core_id].complete(req)

    def _complete_batch(self, reqs, snapshot: bytes):
        for req in reqs:
            off = req.offset
            self._complete(req, snapshot[off * LINE_SIZE:(off + 1) * LINE_SIZE])

    # -- core side ---------------------------------------------------------
    def access(self, req: AccessRequest):
        """Entry point for every core access (an LLC miss in the trace)."""
        self.counters["requests"] += 1
        if req.is_write:
            chain = self.write_chains.get(req.address >> 6)
            if chain:
                chain.append(req)
                return
            self.write_chains[req.address >> 6] = deque((req,))
        self._start(req)

    def _start(self, req: AccessRequest):
        line_id = req.address >> 6
        if line_id in self.llc:
            self.counters["llc_hits"] += 1
            self._complete(req)
            return
        if not self.scheme.local_memory:
            req.remote = True
            self.on_miss(req)
            return
        hit, latency = self.lm.lookup(req.page)
        if hit:
            req.local_hit = True
            self.counters["local_hits"] += 1
            snapshot = self.lm.read_line(req.page, req.offset)
            self.sim.after(latency, self._complete, req, snapshot, target="compute", kind="local-hit")
        else:
            req.remote = True
            self.sim.after(latency, self.on_miss, req, target="compute", kind="miss")

    def on_miss(self, req: AccessRequest):
        self.counters["misses"] += 1
        if self.stalled or not self._dispatch(req):
            self.counters["stalls"] += 1
            self.stalled.append(req)

    def _dispatch(self, req: AccessRequest) -> bool:
        """Schedule data movement for ``req``; False if nothing can bring the data yet."""
        page, off = req.page, req.offset
        scheme = self.scheme
        if ((page << 6) | off) in self.llc:
            self._complete(req)
            return True
        buf = self.dirty_buffer.get(page)
        if buf is not None and off in buf:
            self.counters["forwarded"] += 1
            self._complete(req)
            return True
        if page in self.lm:
            snapshot = self.lm.read_line(page, off)
            self.sim.after(self.local_access, self._complete, req, snapshot,
                           target="compute", kind="local-late")
            return True
        bit = 1 << off
        pe = self.page_entries.get(page)
        se = self.sub_entries.get(page)
        if se is not None and se.offset_mask & bit:
            self.counters["line_waits"] += 1
            self._add_waiter(req)
            return True
        existed = pe is not None
        egress = self._egress_for(page)
        if (not existed and scheme.page_path and scheme.line_path and not scheme.selection_unit
                and not (len(self.page_entries) < self.p.page_entries and egress.can_accept(True)
                         and (se is not None or len(self.sub_entries) < self.p.sub_block_entries)
                         and egress.can_accept(False))):
            # without a selection unit a new page always moves at both granularities
            return False
        if (scheme.page_path and pe is None and len(self.page_entries) < self.p.page_entries
                and egress.can_accept(True)):
            tag = self._tag(PacketKind.PAGE_DATA, page)
            pe = InflightPageEntry(page, tag)
            self.page_entries[page] = pe
            egress.push(Packet(PacketKind.PAGE_REQUEST, page, src="compute", tag=tag,
                               fence=self._fence(page)), True)
            self.counters["issued_pages"] += 1
        if scheme.line_path:
            if not existed:
                want = True
            elif scheme.selection_unit:
                want = pe.state is PageState.SCHEDULED and self.sub_util < self.page_util
            else:
                want = True
            if (want and (se is not None or len(self.sub_entries) < self.p.sub_block_entries)
                    and egress.can_accept(False)):
                if se is None:
                    se = self.sub_entries[page] = InflightSubBlockEntry(page)
                tag = self._tag(PacketKind.LINE_DATA, page, off)
                se.offset_mask |= bit
                se.tags[off] = tag
                egress.push(Packet(PacketKind.LINE_REQUEST, page, off, src="compute", tag=tag,
                                   fence=self._fence(page)), False)
                self.counters["issued_lines"] += 1
                self._add_waiter(req)
                return True
            if existed:
                self.counters["dropped_lines"] += 1
        if pe is not None:
            self.counters["page_waits"] += 1
            self._add_waiter(req)
            return True
        return False

    def _retry_stalled(self):
        if self._retrying or not self.stalled:
            return
        self._retrying = True
        try:
            while self.stalled:
                if not self._dispatch(self.stalled[0]):
                    break
                self.stalled.popleft()
        finally:
            self._retrying = False

    # -- arrivals ------------------------------------------------------------
    def on_packet_arrival(self, pkt: Packet):
        tag = pkt.tag
        if tag in self.cancelled:
            self.cancelled.discard(tag)
            self.counters["late_lines"] += 1
            return
        if tag not in self.tags:
            raise SimulationError(f"packet with unknown tag: {pkt!r}")
        if pkt.kind is PacketKind.LINE_DATA:
            self._line_arrival(pkt)
        elif pkt.kind is PacketKind.PAGE_DATA:
            self.page_reply_estimate += (pkt.wire_bytes - self.page_reply_estimate) / 8
            delay = 0
            if isinstance(pkt.data, CompressedPage) and self.codec.enabled:
                delay = self.codec.latency_ps("decompress")
            self.sim.after(delay, self._page_ready, pkt, target="compute", kind="page-ready")
        else:
            raise SimulationError(f"compute engine cannot handle {pkt!r}")

    def _line_arrival(self, pkt: Packet):
        del self.tags[pkt.tag]
        page, off = pkt.page_id, pkt.line_offset
        se = self.sub_entries[page]
        se.offset_mask &= ~(1 << off)
        del se.tags[off]
        if not se.offset_mask:
            del self.sub_entries[page]
        page_waiters = self.waiters.get(page)
        reqs = page_waiters.pop(off, ()) if page_waiters else ()
        if page_waiters is not None and not page_waiters:
            del self.waiters[page]
        for req in reqs:
            self._complete(req, pkt.data)
        if self.scheme.page_free_zero_cost and page not in self.lm:
            image = self.memories[self.home(page)].page_image(page)
            self._install(page, image)
        self._retry_stalled()

    def _page_ready(self, pkt: Packet):
        page = pkt.page_id
        del self.tags[pkt.tag]
        pe = self.page_entries[page]
        if pe.tag != pkt.tag:
            raise SimulationError(f"page data tag mismatch for page {page:#x}")
        if pe.state is PageState.THROTTLED:
            self.counters["discarded_pages"] += 1
            self.counters["rerequested_pages"] += 1
            pe.state = PageState.SCHEDULED
            pe.tag = self._tag(PacketKind.PAGE_DATA, page)
            self._egress_for(page).push(Packet(PacketKind.PAGE_REQUEST, page, src="compute",
                                               tag=pe.tag, fence=self._fence(page)), True, force=True)
            self.counters["issued_pages"] += 1
            return
        data = pkt.data
        if isinstance(data, CompressedPage):
            data = self.codec.decompress(data)
        pe.state = PageState.INVALID
        del self.page_entries[page]
        self._install(page, data)
        self._retry_stalled()

    def _install(self, page, image):
        img = bytearray(image)
        buf = self.dirty_buffer.pop(page, None)
        dirty = False
        if buf:
            for off, line in buf.items():
                img[off * LINE_SIZE:(off + 1) * LINE_SIZE] = line
            self.dirty_count -= len(buf)
            dirty = True
        self.counters["installs"] += 1
        victim = self.lm.install(page, img, dirty)
        if victim is not None and victim.dirty:
            self._writeback_page(victim.page_id, victim.data)
        se = self.sub_entries.pop(page, None)
        if se is not None:
            for tag in se.tags.values():
                self._cancel(tag)
        page_waiters = self.waiters.pop(page, None)
        if page_waiters:
            reqs = [r for lst in page_waiters.values() for r in lst]
            self.sim.after(self.local_access, self._complete_batch, reqs, bytes(img),
                           target="compute", kind="page-waiters")

    # -- dirty data ------------------------------------------------------------
    def on_dirty_eviction(self, line_id: int, data: bytes):
        page, off = line_id >> 6, line_id & 63
        if page in self.lm:
            self.lm.write_line(page, off, data)
            self.counters["local_line_writes"] += 1
            return
        pe = self.page_entries.get(page)
        if pe is None or pe.state is PageState.THROTTLED:
            self._writeback_line(page, off, data)
            return
        buf = self.dirty_buffer.setdefault(page, {})
        if off in buf:
            buf[off] = data
            return
        if len(buf) >= self.p.dirty_threshold or self.dirty_count >= self.p.dirty_entries:
            self.counters["throttled_pages"] += 1
            for o, line in buf.items():
                self._writeback_line(page, o, line)
                self.counters["dirty_flushes"] += 1
            self._writeback_line(page, off, data)
            self.counters["dirty_flushes"] += 1
            self.dirty_count -= len(buf)
            del self.dirty_buffer[page]
            pe.dirty_mask = 0
            pe.state = PageState.THROTTLED
            return
        buf[off] = data
        self.dirty_count += 1
        pe.dirty_mask |= 1 << off
        self.counters["dirty_buffered"] += 1

    def _writeback_line(self, page, off, data):
        seq = self._next_wb(page)
        self.counters["line_writebacks"] += 1
        if self.scheme.page_free_zero_cost:
            self.memories[self.home(page)].apply_instant(page, seq, off, data)
            return
        pkt = Packet(PacketKind.DIRTY_LINE_WB, page, off, LINE_SIZE, src="compute",
                     data=bytes(data), wb_seq=seq)
        self._egress_for(page).push(pkt, False, force=True)

    def _writeback_page(self, page, data):
        seq = self._next_wb(page)
        self.counters["page_writebacks"] += 1
        if self.scheme.page_free_zero_cost:
            self.memories[self.home(page)].apply_instant(page, seq, None, data)
            return
        if self.codec.enabled:
            cp = self.codec.compress(data)
            pkt = Packet(PacketKind.DIRTY_PAGE_WB, page, None, cp.compressed_size, src="compute",
                         data=cp, wb_seq=seq)
            self.sim.after(self.codec.latency_ps("compress"), self._egress_for(page).push,
                           pkt, True, True, target="compute", kind="wb-compressed")
        else:
            pkt = Packet(PacketKind.DIRTY_PAGE_WB, page, None, PAGE_SIZE, src="compute",
                         data=bytes(data), wb_seq=seq)
            self._egress_for(page).push(pkt, True, force=True)

    # -- introspection -----------------------------------------------------------
    def check_invariants(self):
        p = self.p
        if len(self.sub_entries) > p.sub_block_entries:
            raise SimulationError("sub-block buffer overflow")
        if len(self.page_entries) > p.page_entries:
            raise SimulationError("page buffer overflow")
        if self.dirty_count > p.dirty_entries:
            raise SimulationError("dirty buffer overflow")
        if self.line_pool.used > self.line_pool.capacity or self.page_pool.used > self.page_pool.capacity:
            raise SimulationError("compute queue overflow")
        if len(self.llc) > p.llc_dirty_lines:
            raise SimulationError("LLC dirty set overflow")
        if len(self.lm) > self.lm.capacity_pages:
            raise SimulationError("local memory over capacity")

    def counters_dump(self) -> str:
        return "\n".join(f"{k}={v}" for k, v in self.counters.items())

    @property
    def idle(self) -> bool:
        return not (self.page_entries or self.sub_entries or self.waiters or self.stalled
                    or self.dirty_buffer or self.write_chains or any(len(q) for q in self.egress))
