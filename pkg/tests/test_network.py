import math

import pytest
from hypothesis import given, settings, strategies as st

from daemonsim.kernel import ns
from daemonsim.network import (
    HEADER_BYTES, Channel, Disturbance, Link, Packet, PacketKind, serialization_ps, transfer_time,
)

BW = 17e9 / 4


def test_serialization_rounds_up():
    assert serialization_ps(64, 17e9) == 3765  # 3764.7 ps
    assert serialization_ps(0, 17e9) == 0
    assert serialization_ps(17, 17e9) == 1000


def test_transfer_time():
    assert transfer_time(4096, BW, ns(100)) == ns(100) + serialization_ps(4096, BW)
    assert transfer_time(64, BW, ns(100), 0.5) == ns(100) + serialization_ps(64, BW / 2)
    assert transfer_time(64, BW, 0, 1.0) == math.inf
    with pytest.raises(ValueError):
        transfer_time(-1, BW, 0)


def test_packet_wire_bytes_include_header():
    assert HEADER_BYTES == 16
    assert Packet(PacketKind.LINE_DATA, 0, 0, 64).wire_bytes == 80
    assert Packet(PacketKind.PAGE_REQUEST, 0).wire_bytes == 16


def test_link_serializes_back_to_back():
    link = Link("l", BW, ns(100))
    end1, arr1 = link.send(Packet(PacketKind.PAGE_DATA, 0, None, 4096), 0)
    end2, arr2 = link.send(Packet(PacketKind.LINE_DATA, 0, 0, 64), 0)
    assert end1 == serialization_ps(4112, BW) and arr1 == end1 + ns(100)
    assert end2 == end1 + serialization_ps(80, BW)
    assert arr2 > arr1
    assert link.bytes_by_kind[PacketKind.PAGE_DATA] == 4112
    assert link.payload_by_kind[PacketKind.LINE_DATA] == 64
    assert link.busy_time == end2


def test_disturbance_slows_serialization():
    link = Link("l", BW, 0)
    link.inject_disturbance([Disturbance(0, ns(1000), 0.75)])
    assert link.serialization_time(80, 10) == serialization_ps(80, BW / 4)
    assert link.serialization_time(80, ns(1000)) == serialization_ps(80, BW)


def test_overlapping_disturbances_rejected():
    link = Link("l", BW, 0)
    link.inject_disturbance([Disturbance(0, 100, 0.1)])
    with pytest.raises(ValueError, match="overlapping"):
        link.inject_disturbance([Disturbance(50, 150, 0.2)])


@pytest.mark.parametrize("args", [(0, 10, 1.5), (10, 10, 0.1), (10, 5, 0.1)])
def test_invalid_disturbance(args):
    with pytest.raises(ValueError):
        Disturbance(*args)


def test_invalid_link():
    with pytest.raises(ValueError):
        Link("l", 0, 0)
    with pytest.raises(ValueError):
        Link("l", BW, -1)


def test_channel_disturbance_hits_both_directions():
    ch = Channel("c", BW, ns(100))
    ch.inject_disturbance([Disturbance(0, 100, 0.5)])
    assert [l.disturbance_at(50) for l in ch.links] == [0.5, 0.5]
    assert ch.up.link_id == "c:up"


def test_interval_utilization_of_a_saturated_link():
    link = Link("l", 1e9, 0, interval=ns(1000))
    pkt = Packet(PacketKind.PAGE_DATA, 0, None, 4096 - HEADER_BYTES)
    t = 0
    for _ in range(3):
        t, _ = link.send(pkt, t)
    util = link.interval_utilization(ns(12_000))
    assert len(util) == 12
    assert all(abs(u - 1.0) < 1e-3 for _, u in util)
    assert sum(link.interval_bytes.values()) == 3 * 4096


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 10**6), st.integers(0, 5000)), min_size=1, max_size=40))
def test_byte_accounting_and_order(sends):
    link = Link("l", BW, ns(100), interval=ns(200))
    now, total, last = 0, 0, 0
    for gap, size in sends:
        now += gap
        _, arrival = link.send(Packet(PacketKind.PAGE_DATA, 0, None, size), now)
        assert arrival >= last
        last = arrival
        total += size + HEADER_BYTES
    assert sum(link.interval_bytes.values()) == total == link.total_bytes
