"""Memory-component engine: translation, partitioned DRAM bus, page compression.

Each component owns the backing store for the pages homed on it. Requests
pay one DRAM access for translation, then wait for their writeback fence,
then queue for the DRAM bus. Replies leave through a second queue controller
on the down link.
"""
from __future__ import annotations

import hashlib
from collections import defaultdict

from .arbiter import Pool, QueueController
from .compression import PAGE_SIZE, CompressedPage, PageCodec
from .kernel import SimulationError, ns
from .local_memory import LINE_SIZE, access_time
from .network import Packet, PacketKind, serialization_ps

HOME_POLICIES = ("roundrobin", "random")


def page_home(page_id: int, n_components: int, policy: str = "roundrobin", seed: int = 0) -> int:
    if n_components < 1:
        raise ValueError("n_components must be >= 1")
    policy = policy.lower().replace("-", "").replace("_", "")
    if policy == "roundrobin":
        return page_id % n_components
    if policy == "random":
        digest = hashlib.blake2b(f"{seed}:{page_id}".encode(), digest_size=8).digest()
        return int.from_bytes(digest, "little") % n_components
    raise ValueError(f"page home policy must be one of {HOME_POLICIES}, got {policy!r}")


class MemoryComponent:
    def __init__(self, sim, cid: int, channel, content, codec: PageCodec, *,
                 mode: str = "fifo", ratio: float = 0.25, valid_page=None,
                 bus_bandwidth: float = 17e9, processing_latency: int = ns(15),
                 line_capacity: int = 512, page_capacity: int = 1024):
        self.sim = sim
        self.id = cid
        self.name = f"mem{cid}"
        self.channel = channel
        self.content = content
        self.codec = codec
        self.valid_page = valid_page
        self.bus_bandwidth = bus_bandwidth
        self.processing_latency = processing_latency
        self.translation_latency = access_time(LINE_SIZE, processing_latency, bus_bandwidth)
        self.backing: dict[int, bytearray] = {}
        self.applied = defaultdict(int)   # writebacks applied per page
        self.pending_wb: dict[int, dict[int, Packet]] = defaultdict(dict)
        self.fenced: dict[int, list[Packet]] = defaultdict(list)
        self.deliver = None  # set by the system: deliver(packet) at arrival time
        line_slot = serialization_ps(LINE_SIZE, bus_bandwidth)
        self.bus = QueueController(sim, f"{self.name}.bus", self._bus_service, mode=mode, ratio=ratio,
                                   line_pool=Pool(line_capacity), page_pool=Pool(page_capacity),
                                   idle_slot_time=line_slot)
        down_slot = channel.down.serialization_time(LINE_SIZE + 16, 0)
        self.egress = QueueController(sim, f"{self.name}.egress", self._egress_send, mode=mode,
                                      ratio=ratio, line_pool=Pool(line_capacity),
                                      page_pool=Pool(page_capacity), idle_slot_time=down_slot,
                                      page_bytes=lambda pkt: pkt.payload_bytes)
        self.bus_busy = 0
        self.bus_bytes = 0
        self.requests = 0
        self.writebacks = 0
        self.compressed_bytes_saved = 0

    # -- backing store ---------------------------------------------------
    def page(self, page_id: int) -> bytearray:
        data = self.backing.get(page_id)
        if data is None:
            if self.valid_page is not None and not self.valid_page(page_id):
                raise SimulationError(f"{self.name}: page {page_id:#x} is outside the working set")
            data = bytearray(self.content(page_id))
            self.backing[page_id] = data
        return data

    def page_image(self, page_id: int) -> bytes:
        return bytes(self.page(page_id))

    def read_line(self, page_id: int, offset: int) -> bytes:
        start = offset * LINE_SIZE
        return bytes(self.page(page_id)[start:start + LINE_SIZE])

    # -- ingress -----------------------------------------------------------
    def on_packet(self, pkt: Packet):
        """A packet arrived on the up link; charge translation first."""
        self.sim.after(self.translation_latency, self._translated, pkt, target=self.name, kind="xlate")

    def _translated(self, pkt: Packet):
        kind = pkt.kind
        if kind.is_writeback:
            self.on_writeback(pkt)
        elif kind in (PacketKind.LINE_REQUEST, PacketKind.PAGE_REQUEST):
            self.on_request(pkt)
        else:
            raise SimulationError(f"{self.name}: unexpected packet {pkt!r}")

    def on_request(self, pkt: Packet):
        self.requests += 1
        self.page(pkt.page_id)  # validate early
        if self.applied[pkt.page_id] < pkt.fence:
            self.fenced[pkt.page_id].append(pkt)
            return
        self.bus.push(pkt, pkt.kind.is_page, force=True)

    def on_writeback(self, pkt: Packet):
        """Apply writebacks of a page in the order the compute side issued them."""
        page = pkt.page_id
        self.writebacks += 1
        pending = self.pending_wb[page]
        pending[pkt.wb_seq] = pkt
        while self.applied[page] + 1 in pending:
            wb = pending.pop(self.applied[page] + 1)
            self._apply(wb)
            self.bus.push(wb, wb.kind.is_page, force=True)
        if not pending:
            del self.pending_wb[page]
        waiting = self.fenced.get(page)
        if waiting:
            ready = [p for p in waiting if p.fence <= self.applied[page]]
            rest = [p for p in waiting if p.fence > self.applied[page]]
            if rest:
                self.fenced[page] = rest
            else:
                del self.fenced[page]
            for p in ready:
                self.bus.push(p, p.kind.is_page, force=True)

    def _apply(self, wb: Packet):
        store = self.page(wb.page_id)
        if wb.kind is PacketKind.DIRTY_LINE_WB:
            start = wb.line_offset * LINE_SIZE
            store[start:start + LINE_SIZE] = wb.data
        else:
            data = wb.data
            if isinstance(data, CompressedPage):
                data = self.codec.decompress(data)
            if len(data) != PAGE_SIZE:
                raise SimulationError("page writeback with wrong size")
            store[:] = data
        self.applied[wb.page_id] += 1

    def apply_instant(self, page_id: int, wb_seq: int, offset, data):
        """Zero-cost writeback used by the idealized scheme."""
        kind = PacketKind.DIRTY_PAGE_WB if offset is None else PacketKind.DIRTY_LINE_WB
        pkt = Packet(kind, page_id, offset, data=data, wb_seq=wb_seq)
        if self.applied[page_id] + 1 != wb_seq:
            raise SimulationError("instant writeback out of order")
        self._apply(pkt)

    # -- DRAM bus ----------------------------------------------------------
    def _bus_service(self, pkt: Packet, now: int) -> int:
        kind = pkt.kind
        nbytes = PAGE_SIZE if kind.is_page else LINE_SIZE
        busy = serialization_ps(nbytes, self.bus_bandwidth)
        self.bus_busy += busy
        self.bus_bytes += nbytes
        end = now + busy
        if kind is PacketKind.LINE_REQUEST:
            reply = Packet(PacketKind.LINE_DATA, pkt.page_id, pkt.line_offset, LINE_SIZE,
                           src=self.id, dst=pkt.src, tag=pkt.tag,
                           data=self.read_line(pkt.page_id, pkt.line_offset))
            self.sim.schedule(end + self.processing_latency, self.egress.push, reply, False, True,
                              target=self.name, kind="line-ready")
        elif kind is PacketKind.PAGE_REQUEST:
            image = self.page_image(pkt.page_id)
            delay = self.processing_latency
            if self.codec.enabled:
                data = self.codec.compress(image)
                payload = data.compressed_size
                self.compressed_bytes_saved += PAGE_SIZE - payload
                delay += self.codec.latency_ps("compress")
            else:
                data, payload = image, PAGE_SIZE
            reply = Packet(PacketKind.PAGE_DATA, pkt.page_id, None, payload, src=self.id,
                           dst=pkt.src, tag=pkt.tag, data=data)
            self.sim.schedule(end + delay, self.egress.push, reply, True, True,
                              target=self.name, kind="page-ready")
        return end

    def _egress_send(self, pkt: Packet, now: int) -> int:
        end, arrival = self.channel.down.send(pkt, now)
        self.sim.schedule(arrival, self.deliver, pkt, target="compute", kind=pkt.kind.value)
        return end

    @property
    def idle(self) -> bool:
        return not (self.fenced or self.pending_wb or len(self.bus) or len(self.egress))
