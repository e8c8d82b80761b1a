"""Shared builders and independent oracles for the test suite."""
from __future__ import annotations

import random

from daemonsim.compute_engine import EngineParams
from daemonsim.config import ExperimentConfig, WorkloadSpec, derive_seed
from daemonsim.core import write_value
from daemonsim.network import Disturbance
from daemonsim.schemes import build_scheme
from daemonsim.system import System, SystemParams
from daemonsim.workload import Op, TraceRecord, WorkloadConfig, generate_trace, preset

PARTITIONED = ("BP", "PQ", "DaeMon")
ALL_SCHEMES = ("Local", "CacheLine", "Remote", "PageFree", "CacheLinePlusPage", "LC", "BP", "PQ",
               "DaeMon")


def replay_oracle(trace, content, pages, core_id: int = 0) -> dict:
    """Flat memory after applying every write of ``trace`` in program order."""
    mem = {p: bytearray(content(p)) for p in pages}
    for i, rec in enumerate(trace):
        if rec.op is Op.WRITE:
            addr = rec.address & ~7
            page, off = addr >> 12, addr & 4095
            mem[page][off:off + 8] = write_value(core_id, i)
    return {p: bytes(b) for p, b in mem.items()}


def small_system(scheme, trace, npages, content=None, check=True, **params):
    """A System over pages 0..npages-1 with synthetic content unless given."""
    if content is None:
        wl = WorkloadConfig(working_set_pages=npages, compressibility=0.5, seed=3)
        content = wl.page_content
    if isinstance(scheme, str):
        scheme = build_scheme(scheme)
    return System(scheme, SystemParams(**params), [trace], content, npages,
                  valid_page=lambda p: 0 <= p < npages, check=check)


def reads(*addresses, gap=0):
    return [TraceRecord(gap, Op.READ, a) for a in addresses]


def addr(page, line=0, word=0):
    return (page << 12) | (line << 6) | (word << 3)


def coherence_scenario(seed: int, schemes=PARTITIONED):
    """Random small run; returns (system, result, trace, content, npages)."""
    rng = random.Random(seed)
    npages = rng.randint(2, 64)
    wl = WorkloadConfig(
        working_set_pages=npages, locality_class=rng.choice(["poor", "medium", "high"]),
        write_fraction=rng.uniform(0.2, 0.9), hot_fraction=rng.uniform(0.05, 0.5),
        hot_probability=rng.uniform(0.3, 0.95), mean_gap=rng.choice([0, 2, 10, 40]),
        compressibility=rng.random(), record_count=rng.randint(200, 1500), seed=seed)
    trace = list(generate_trace(wl))
    name = rng.choice(schemes)
    policy = rng.choice(["strict", "work-conserving"])
    scheme = build_scheme(name, slot_policy=policy if name in PARTITIONED else None)
    windows = []
    if rng.random() < 0.7:
        t = 0
        for _ in range(rng.randint(1, 4)):
            start = t + rng.randint(0, 20_000) * 1000
            end = start + rng.randint(1, 50_000) * 1000
            windows.append(Disturbance(start, end, rng.choice([0.0, 0.3, 0.5, 0.9])))
            t = end
    engine = EngineParams(
        sub_block_entries=rng.choice([2, 8, 128]), page_entries=rng.choice([2, 4, 256]),
        sub_block_queue=rng.choice([1, 4, 128]), page_queue=rng.choice([1, 4, 256]),
        dirty_entries=rng.choice([3, 16, 256]), dirty_threshold=rng.choice([1, 3, 8]),
        llc_dirty_lines=rng.choice([1, 8, 64, 4096]))
    params = SystemParams(
        bandwidth_factor=rng.choice([0.5, 0.25, 0.125]), switch_latency_ns=rng.choice([100, 400]),
        local_memory_pages=rng.randint(1, max(1, npages // 3)),
        replacement_policy=rng.choice(["lru", "fifo"]), window_limit=rng.choice([1, 4, 32, 128]),
        n_memory_components=rng.choice([1, 1, 2, 3]),
        page_home_policy=rng.choice(["roundrobin", "random"]), disturbance=windows, engine=engine)
    system = System(scheme, params, [trace], wl.page_content, npages,
                    valid_page=lambda p: 0 <= p < npages, check=True)
    result = system.run()
    return system, result, trace, wl.page_content, npages


def preset_config(name: str, schemes, seed: int = 1, **changes) -> ExperimentConfig:
    spec = WorkloadSpec(workload=preset(name), content_seed=derive_seed(seed, "content", 0))
    cfg = ExperimentConfig(schemes=list(schemes), workloads=[spec], seed=seed)
    return cfg.with_(**changes).validate()
