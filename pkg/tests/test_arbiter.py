import pytest
from hypothesis import given, settings, strategies as st

from daemonsim.arbiter import Pool, QueueController, partition_lines_per_page
from daemonsim.kernel import SimulationError, Simulator


def make(mode="strict", ratio=0.25, **kw):
    sim = Simulator()
    order = []

    def transmit(item, now):
        order.append((now, item))
        return now + 10

    ctl = QueueController(sim, "q", transmit, mode=mode, ratio=ratio, idle_slot_time=3, **kw)
    return sim, ctl, order


def fill(ctl, pages, lines):
    for i in range(pages):
        ctl.push(f"P{i}", True)
    for i in range(lines):
        ctl.push(f"L{i}", False)


@pytest.mark.parametrize("ratio,k", [(0.25, 21), (0.5, 64), (0.8, 256), (0.1, 7)])
def test_lines_per_page(ratio, k):
    assert partition_lines_per_page(ratio) == k


@pytest.mark.parametrize("ratio", [0.0, 1.0, -0.2])
def test_ratio_out_of_range(ratio):
    with pytest.raises(ValueError):
        partition_lines_per_page(ratio)


def test_ratio_leaving_no_line_slot_rejected():
    with pytest.raises(ValueError, match="no line slot"):
        make(ratio=0.01)


def test_unknown_mode_rejected():
    with pytest.raises(ValueError):
        make(mode="priority")


def test_strict_pattern_is_one_page_then_21_lines():
    sim, ctl, order = make()
    fill(ctl, 3, 60)
    sim.run_until()
    kinds = "".join(item[0] for _, item in order)
    assert kinds.startswith("P" + "L" * 21 + "P" + "L" * 21 + "P")
    assert ctl.issued_pages == 3 and ctl.issued_lines == 60


def test_strict_burns_empty_slots():
    sim, ctl, order = make()
    fill(ctl, 2, 0)
    sim.run_until()
    # second page waits for 21 idle line slots of 3 ps each
    assert [t for t, _ in order] == [0, 10 + 21 * 3]
    assert ctl.idle_slots == 21


def test_work_conserving_sends_back_to_back():
    sim, ctl, order = make("work-conserving")
    fill(ctl, 2, 0)
    sim.run_until()
    assert [t for t, _ in order] == [0, 10]
    assert ctl.idle_slots == 0


def test_isolated_line_is_not_delayed():
    sim, ctl, order = make()
    ctl.push("L0", False)
    sim.run_until()
    assert order == [(0, "L0")]


def test_fifo_keeps_arrival_order():
    sim, ctl, order = make("fifo")
    for i in range(5):
        ctl.push(f"P{i}", True)
        ctl.push(f"L{i}", False)
    sim.run_until()
    assert [item for _, item in order] == [f"{k}{i}" for i in range(5) for k in "PL"]
    assert ctl.k == 0


def test_compressed_page_earns_fewer_line_slots():
    sim, ctl, order = make(page_bytes=lambda item: 1024)
    fill(ctl, 2, 20)
    sim.run_until()
    kinds = "".join(item[0] for _, item in order)
    # 1024 B * (0.25 / 0.75) / 64 = 5.33 -> 5 line slots
    assert kinds.startswith("P" + "L" * 5 + "P")


def test_full_queue_rejects_and_force_overflows():
    sim, ctl, order = make(line_capacity=2)
    assert ctl.push("L0", False) and ctl.push("L1", False)
    assert not ctl.push("L2", False)
    assert ctl.push("L3", False, force=True)
    assert len(ctl) == 3
    sim.run_until()
    assert [item for _, item in order] == ["L0", "L1", "L3"]


def test_shared_pool_capacity():
    pool = Pool(1)
    a = make(line_pool=pool)[1]
    b = make(line_pool=pool)[1]
    a.push("x", False)
    assert not b.can_accept(False)
    with pytest.raises(SimulationError):
        pool.take()
    with pytest.raises(ValueError):
        Pool(0)


def test_on_space_called_after_each_issue():
    calls = []
    sim, ctl, _ = make(on_space=lambda: calls.append(1))
    fill(ctl, 1, 2)
    sim.run_until()
    assert len(calls) == 3


@settings(max_examples=60, deadline=None)
@given(mode=st.sampled_from(["strict", "work-conserving", "fifo"]),
       ratio=st.sampled_from([0.25, 0.5, 0.8]),
       pushes=st.lists(st.tuples(st.booleans(), st.integers(0, 40)), max_size=80))
def test_every_item_is_sent_once_in_per_kind_order(mode, ratio, pushes):
    sim, ctl, order = make(mode, ratio)
    sent = []
    t = 0
    for i, (is_page, gap) in enumerate(pushes):
        t += gap
        sim.schedule(t, ctl.push, (is_page, i), is_page, True)
    sim.run_until()
    sent = [item for _, item in order]
    assert sorted(sent, key=lambda x: x[1]) == [(p, i) for i, (p, _) in enumerate(pushes)]
    for kind in (True, False):
        ids = [i for p, i in sent if p is kind]
        assert ids == sorted(ids)
    assert ctl.line_pool.used == 0 and ctl.page_pool.used == 0
