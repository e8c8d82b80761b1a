import pytest
from hypothesis import given, strategies as st

from daemonsim.kernel import SimulationError, Simulator, cycle_ps, ns


def test_ns_and_cycle_conversion():
    assert ns(15) == 15_000
    assert ns(0.5) == 500
    assert cycle_ps(3.6e9) == 278  # 277.78 ps rounded


def test_same_time_events_run_in_insertion_order():
    sim = Simulator()
    seen = []
    for name in "abc":
        sim.schedule(10, seen.append, name)
    sim.run_until()
    assert seen == ["a", "b", "c"]


def test_scheduling_in_the_past_raises():
    sim = Simulator()
    sim.schedule(100, lambda: None)
    sim.run_until()
    with pytest.raises(SimulationError):
        sim.schedule(50, lambda: None)


def test_cancelled_event_is_skipped():
    sim = Simulator()
    seen = []
    ev = sim.schedule(5, seen.append, 1)
    sim.schedule(6, seen.append, 2)
    ev.cancel()
    sim.run_until()
    assert seen == [2]
    assert sim.executed == 1


def test_run_until_limit_advances_clock():
    sim = Simulator()
    seen = []
    sim.schedule(10, seen.append, 1)
    sim.schedule(30, seen.append, 2)
    assert sim.run_until(20) == 20
    assert seen == [1]
    assert sim.pending() == 1
    sim.run_until()
    assert seen == [1, 2]


def test_event_log_and_dump(tmp_path):
    sim = Simulator(trace=True)
    sim.schedule(7, lambda: None, target="mem0", kind="xlate")
    sim.run_until()
    path = tmp_path / "events.log"
    sim.dump_log(path)
    assert path.read_text() == "7,0,mem0,xlate\n"


def test_post_event_hook_runs_after_each_event():
    sim = Simulator()
    calls = []
    sim.post_event = lambda: calls.append(sim.now)
    sim.schedule(1, lambda: None)
    sim.schedule(2, lambda: None)
    sim.run_until()
    assert calls == [1, 2]


@given(st.lists(st.integers(min_value=0, max_value=1000), max_size=60))
def test_events_execute_in_time_then_seq_order(times):
    sim = Simulator()
    order = []
    for i, t in enumerate(times):
        sim.schedule(t, order.append, (t, i))
    sim.run_until()
    assert order == sorted(order)
