"""Wire cores, the compute engine, links and memory components into one run."""
from __future__ import annotations

from dataclasses import dataclass, field

from .compression import PageCodec
from .compute_engine import ComputeEngine, EngineParams
from .core import Core
from .kernel import PS_PER_NS, SimulationError, Simulator, cycle_ps, ns
from .local_memory import LINE_SIZE, LocalMemory
from .memory_engine import MemoryComponent, page_home
from .network import DRAM_BUS_BANDWIDTH, Channel, Disturbance


@dataclass
class SystemParams:
    frequency_hz: float = 3.6e9
    switch_latency_ns: float = 100.0
    bandwidth_factor: float = 0.25
    bus_bandwidth: float = DRAM_BUS_BANDWIDTH
    processing_latency_ns: float = 15.0
    local_memory_pages: int | None = None
    local_memory_fraction: float = 0.2
    replacement_policy: str = "lru"
    window_limit: int = 128
    n_memory_components: int = 1
    page_home_policy: str = "roundrobin"
    home_seed: int = 0
    disturbance: list = field(default_factory=list)  # Disturbance windows, applied to every link
    engine: EngineParams = field(default_factory=EngineParams)
    memory_line_queue: int = 512
    memory_page_queue: int = 1024

    @property
    def link_bandwidth(self) -> float:
        return self.bus_bandwidth * self.bandwidth_factor


@dataclass
class SystemResult:
    core_metrics: list
    hit_ratio: float
    lookups: int
    links: list
    counters: dict
    bytes_by_kind: dict
    compressed_bytes_saved: int
    end_time: int
    events: int


class System:
    """One compute component, ``n`` memory components, one channel each.

    ``traces`` is one record list per core; ``content(page)`` returns the
    initial 4 KB image of any page; ``valid_page(page)`` guards the working set.
    """

    def __init__(self, scheme, params: SystemParams, traces, content, working_set: int,
                 valid_page=None, trace_events: bool = False, check: bool = False):
        self.scheme = scheme
        self.params = params
        self.sim = Simulator(trace=trace_events)
        self.cycle = cycle_ps(params.frequency_hz)
        self.content = content
        self.working_set = working_set
        n = params.n_memory_components
        if n < 1:
            raise ValueError("n_memory_components must be >= 1")
        if params.bandwidth_factor <= 0:
            raise ValueError("bandwidth_factor must be positive")
        if params.switch_latency_ns < 0:
            raise ValueError("switch_latency_ns must be >= 0")
        policy = params.page_home_policy
        seed = params.home_seed
        page_home(0, n, policy, seed)  # validates the policy name
        self.home = lambda page: page_home(page, n, policy, seed)
        self.codec = PageCodec(scheme.codec, self.cycle)
        proc = ns(params.processing_latency_ns)
        self.channels = []
        for i in range(n):
            ch = Channel(f"link{i}", params.link_bandwidth, ns(params.switch_latency_ns))
            if params.disturbance:
                ch.inject_disturbance(params.disturbance)
            self.channels.append(ch)
        if scheme.preload_all:
            capacity = working_set
        elif not scheme.local_memory:
            capacity = 0
        elif params.local_memory_pages is not None:
            capacity = params.local_memory_pages
        else:
            capacity = max(1, round(params.local_memory_fraction * working_set))
        self.lm = LocalMemory(capacity, params.replacement_policy, params.bus_bandwidth, proc)
        self.memories = [
            MemoryComponent(self.sim, i, ch, content, self.codec, mode=scheme.arbiter_mode,
                            ratio=scheme.partition_ratio or 0.25, valid_page=valid_page,
                            bus_bandwidth=params.bus_bandwidth, processing_latency=proc,
                            line_capacity=params.memory_line_queue,
                            page_capacity=params.memory_page_queue)
            for i, ch in enumerate(self.channels)]
        self.engine = ComputeEngine(self.sim, scheme, self.lm, self.channels, self.memories,
                                    self.home, self.codec, params.engine)
        for m in self.memories:
            m.deliver = self.engine.on_packet_arrival
        self.cores = []
        for cid, trace in enumerate(traces):
            core = Core(self.sim, cid, trace, self.cycle, params.window_limit)
            self.engine.attach_core(core)
            self.cores.append(core)
        if scheme.preload_all:
            pages = sorted({rec.address >> 12 for trace in traces for rec in trace})
            for page in pages:
                self.lm.install(page, self.memories[self.home(page)].page_image(page))
        if check:
            self.sim.post_event = self.engine.check_invariants

    def run(self) -> SystemResult:
        for core in self.cores:
            core.start()
        self.sim.run_until()
        for core in self.cores:
            if not core.done:
                raise SimulationError(f"core {core.core_id} stalled with {core.outstanding} "
                                      f"outstanding requests (deadlock)")
        if not self.engine.idle or not all(m.idle for m in self.memories):
            raise SimulationError("engines did not drain")
        return self._result()

    def _result(self) -> SystemResult:
        links = [link for ch in self.channels for link in ch.links]
        by_kind = {}
        for link in links:
            for kind, b in link.bytes_by_kind.items():
                by_kind[kind.value] = by_kind.get(kind.value, 0) + b
        end = self.sim.now
        return SystemResult(
            core_metrics=[c.report_core_metrics() for c in self.cores],
            hit_ratio=self.lm.hit_ratio,
            lookups=self.lm.lookups,
            links=links,
            counters=dict(self.engine.counters),
            bytes_by_kind=by_kind,
            compressed_bytes_saved=sum(m.compressed_bytes_saved for m in self.memories),
            end_time=end,
            events=self.sim.executed,
        )

    def memory_image(self, pages) -> dict[int, bytes]:
        """Final value of every page: home backing store overlaid by compute-side state."""
        image = {}
        llc_by_page: dict[int, list] = {}
        for line_id, data in self.engine.llc.items():
            llc_by_page.setdefault(line_id >> 6, []).append((line_id & 63, data))
        for page in pages:
            if page in self.lm:
                buf = bytearray(self.lm.page_image(page))
            else:
                buf = bytearray(self.memories[self.home(page)].page_image(page))
            for off, data in self.engine.dirty_buffer.get(page, {}).items():
                buf[off * LINE_SIZE:(off + 1) * LINE_SIZE] = data
            for off, data in llc_by_page.get(page, ()):
                buf[off * LINE_SIZE:(off + 1) * LINE_SIZE] = data
            image[page] = bytes(buf)
        return image

    def interval_utilization(self):
        """Rows of (interval_start_ns, link_id, utilization) for every link direction."""
        rows = []
        end = max(self.sim.now, 1)
        for ch in self.channels:
            for link in ch.links:
                for idx, util in link.interval_utilization(end):
                    rows.append((idx * link.interval // PS_PER_NS, link.link_id, util))
        return rows
