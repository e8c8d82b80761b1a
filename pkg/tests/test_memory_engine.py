import pytest

from daemonsim.compression import PAGE_SIZE, CodecId, PageCodec, compress
from daemonsim.kernel import SimulationError, Simulator, cycle_ps, ns
from daemonsim.memory_engine import MemoryComponent, page_home
from daemonsim.network import Channel, Packet, PacketKind, serialization_ps
from daemonsim.workload import synthesize_page_content

BW = 17e9 / 4
SWITCH = ns(100)
CYCLE = cycle_ps(3.6e9)


def content(page):
    return synthesize_page_content(page, 0.7, 3)


def make_memory(codec="none", npages=16, mode="fifo"):
    sim = Simulator()
    channel = Channel("c0", BW, SWITCH)
    mem = MemoryComponent(sim, 0, channel, content, PageCodec(codec, CYCLE), mode=mode,
                          valid_page=lambda p: 0 <= p < npages)
    arrivals = []
    mem.deliver = lambda pkt: arrivals.append((sim.now, pkt))
    return sim, mem, arrivals


def test_translation_is_one_dram_access():
    _, mem, _ = make_memory()
    assert mem.translation_latency == ns(15) + 3765  # 64 B at 17 GB/s


def test_line_request_timing():
    sim, mem, arrivals = make_memory()
    mem.on_packet(Packet(PacketKind.LINE_REQUEST, 3, 5, 0, tag=9))
    sim.run_until()
    ready = (ns(15) + 3765) + (ns(15) + 3765)  # translation, then data access
    (t, reply), = arrivals
    assert t == ready + serialization_ps(80, BW) + SWITCH
    assert reply.kind is PacketKind.LINE_DATA and reply.tag == 9
    assert reply.data == content(3)[5 * 64:6 * 64]


def test_page_request_without_codec():
    sim, mem, arrivals = make_memory()
    mem.on_packet(Packet(PacketKind.PAGE_REQUEST, 2, None, 0))
    sim.run_until()
    bus = serialization_ps(PAGE_SIZE, 17e9)
    assert abs(bus - 240_941) <= 1  # 4096 B / 17 GB/s = 240.9 ns
    ready = mem.translation_latency + bus + ns(15)
    (t, reply), = arrivals
    assert reply.payload_bytes == PAGE_SIZE and reply.data == content(2)
    assert t == ready + serialization_ps(PAGE_SIZE + 16, BW) + SWITCH


def test_page_request_with_lz_adds_compression_latency():
    sim, mem, arrivals = make_memory("lz")
    mem.on_packet(Packet(PacketKind.PAGE_REQUEST, 2, None, 0))
    sim.run_until()
    cp = compress(content(2), CodecId.LZ)
    ready = mem.translation_latency + serialization_ps(PAGE_SIZE, 17e9) + ns(15) + 64 * CYCLE
    (t, reply), = arrivals
    assert reply.payload_bytes == cp.compressed_size < PAGE_SIZE
    assert reply.data == cp
    assert t == ready + serialization_ps(cp.compressed_size + 16, BW) + SWITCH
    assert mem.compressed_bytes_saved == PAGE_SIZE - cp.compressed_size


def test_line_writeback_changes_exactly_64_bytes():
    sim, mem, _ = make_memory()
    before = mem.page_image(4)
    mem.on_packet(Packet(PacketKind.DIRTY_LINE_WB, 4, 7, 64, data=b"\xab" * 64, wb_seq=1))
    sim.run_until()
    after = mem.page_image(4)
    changed = [i for i in range(PAGE_SIZE) if before[i] != after[i]]
    assert after[7 * 64:8 * 64] == b"\xab" * 64
    assert all(7 * 64 <= i < 8 * 64 for i in changed)


def test_compressed_page_writeback_is_decompressed():
    sim, mem, _ = make_memory("lz")
    image = bytes(range(256)) * 16
    cp = mem.codec.compress(image)
    mem.on_packet(Packet(PacketKind.DIRTY_PAGE_WB, 1, None, cp.compressed_size, data=cp, wb_seq=1))
    sim.run_until()
    assert mem.page_image(1) == image


def test_read_after_writeback_sees_written_value():
    sim, mem, arrivals = make_memory()
    mem.on_packet(Packet(PacketKind.DIRTY_LINE_WB, 6, 2, 64, data=b"\x11" * 64, wb_seq=1))
    mem.on_packet(Packet(PacketKind.LINE_REQUEST, 6, 2, 0, fence=1))
    sim.run_until()
    assert arrivals[0][1].data == b"\x11" * 64


def test_request_waits_for_its_fence():
    sim, mem, arrivals = make_memory()
    # the request overtakes the writeback it was fenced behind
    mem.on_packet(Packet(PacketKind.LINE_REQUEST, 6, 2, 0, fence=1))
    sim.run_until(ns(100))
    assert not arrivals and not mem.idle
    mem.on_packet(Packet(PacketKind.DIRTY_LINE_WB, 6, 2, 64, data=b"\x22" * 64, wb_seq=1))
    sim.run_until()
    assert arrivals[0][1].data == b"\x22" * 64
    assert mem.idle


def test_writebacks_apply_in_sequence_order():
    sim, mem, _ = make_memory()
    mem.on_packet(Packet(PacketKind.DIRTY_LINE_WB, 0, 0, 64, data=b"\x02" * 64, wb_seq=2))
    sim.run_until()
    assert mem.applied[0] == 0
    mem.on_packet(Packet(PacketKind.DIRTY_LINE_WB, 0, 0, 64, data=b"\x01" * 64, wb_seq=1))
    sim.run_until()
    assert mem.applied[0] == 2
    assert mem.read_line(0, 0) == b"\x02" * 64


def test_page_outside_working_set_raises():
    sim, mem, _ = make_memory(npages=4)
    mem.on_packet(Packet(PacketKind.LINE_REQUEST, 10, 0, 0))
    with pytest.raises(SimulationError, match="outside the working set"):
        sim.run_until()


def test_instant_writeback_must_be_in_order():
    _, mem, _ = make_memory()
    mem.apply_instant(3, 1, 0, b"\x05" * 64)
    assert mem.read_line(3, 0) == b"\x05" * 64
    with pytest.raises(SimulationError):
        mem.apply_instant(3, 3, 0, b"\x05" * 64)


def test_bus_conservation():
    sim, mem, _ = make_memory(mode="strict")
    for page in range(8):
        mem.on_packet(Packet(PacketKind.PAGE_REQUEST, page, None, 0))
        for off in range(4):
            mem.on_packet(Packet(PacketKind.LINE_REQUEST, page, off, 0))
    sim.run_until()
    assert mem.bus_bytes == 8 * PAGE_SIZE + 32 * 64
    assert mem.bus_busy >= mem.bus_bytes / 17e9 * 1e12


def test_page_home_examples():
    assert {page_home(p, 1) for p in range(50)} == {0}
    assert page_home(7, 4, "roundrobin") == 3
    first = [page_home(p, 4, "random", seed=11) for p in range(100)]
    assert first == [page_home(p, 4, "random", seed=11) for p in range(100)]
    assert set(first) == {0, 1, 2, 3}


def test_page_home_errors():
    with pytest.raises(ValueError):
        page_home(1, 0)
    with pytest.raises(ValueError):
        page_home(1, 2, "striped")
