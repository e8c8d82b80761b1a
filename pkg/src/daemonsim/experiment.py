"""Run orchestration: single runs, sweeps, multi-core runs and CSV output."""
from __future__ import annotations

import csv
import io
import itertools
import logging
from dataclasses import asdict, dataclass, fields

from .compute_engine import EngineParams
from .config import ConfigError, ExperimentConfig, coerce_field, parse_list
from .network import PacketKind
from .system import System, SystemParams
from .workload import PAGE_SHIFT, TraceRecord, generate_trace, parse_trace, synthesize_page_content

log = logging.getLogger(__name__)

# pages of core i live at (i << CORE_REGION_BITS) + page, so workloads never share pages
CORE_REGION_BITS = 24
_REGION_MASK = (1 << CORE_REGION_BITS) - 1


@dataclass
class RunMetrics:
    scheme: str
    core: int
    n_cores: int
    workload: str
    switch_latency_ns: float
    bandwidth_factor: float
    partition_ratio: float | None
    codec: str
    slot_policy: str
    replacement_policy: str
    local_memory_fraction: float
    local_memory_pages: int
    n_memory_components: int
    page_home_policy: str
    seed: int
    cycles: int
    instructions: int
    pseudo_ipc: float
    mean_access_latency_ns: float
    mean_remote_latency_ns: float
    p50_remote_latency_ns: float
    p99_remote_latency_ns: float
    hit_ratio: float
    bytes_line_request: int
    bytes_line_data: int
    bytes_page_request: int
    bytes_page_data: int
    bytes_dirty_line_wb: int
    bytes_dirty_page_wb: int
    pages_throttled: int
    pages_saved_by_compression: float
    baseline_scheme: str = ""
    baseline_cycles: int = 0
    speedup: float = 0.0


CSV_COLUMNS = tuple(f.name for f in fields(RunMetrics))
UTILIZATION_COLUMNS = ("interval_start_ns", "link_id", "utilization")
SWEEP_AXES = ("scheme", "switch_latency_ns", "bandwidth_factor", "partition_ratio", "codec",
              "slot_policy", "replacement_policy", "local_memory_fraction", "n_memory_components",
              "page_home_policy", "seed")

_trace_cache: dict = {}


def load_trace(spec) -> list:
    """Records of one workload spec; generated traces are memoized per config."""
    if spec.trace:
        return list(parse_trace(spec.trace))
    key = tuple(sorted(spec.workload.to_dict().items()))
    trace = _trace_cache.get(key)
    if trace is None:
        if len(_trace_cache) > 64:
            _trace_cache.clear()
        trace = _trace_cache[key] = list(generate_trace(spec.workload))
    return trace


class Workloads:
    """Per-core traces relocated into disjoint page regions, plus page contents."""

    def __init__(self, cfg: ExperimentConfig):
        self.specs = cfg.per_core_workloads()
        self.traces = []
        self.pages = []
        multi = len(self.specs) > 1
        for core, spec in enumerate(self.specs):
            trace = load_trace(spec)
            if multi:
                base = core << (CORE_REGION_BITS + PAGE_SHIFT)
                if any(rec.address >> PAGE_SHIFT > _REGION_MASK for rec in trace):
                    raise ConfigError(f"workload[{core}]", "trace addresses exceed the per-core region")
                trace = [TraceRecord(r.gap, r.op, r.address | base) for r in trace]
            self.traces.append(trace)
            if spec.workload is not None:
                pages = range(spec.workload.working_set_pages)
            else:
                pages = sorted({rec.address >> PAGE_SHIFT for rec in trace})
                pages = [p & _REGION_MASK for p in pages]
            self.pages.append(pages)
        self._valid = [set(p) if not isinstance(p, range) else p for p in self.pages]
        self.working_set = sum(len(p) for p in self.pages)

    def _split(self, page):
        core = page >> CORE_REGION_BITS if len(self.specs) > 1 else 0
        return core, page & _REGION_MASK

    def content(self, page: int) -> bytes:
        core, local = self._split(page)
        spec = self.specs[core]
        c = spec.workload.compressibility_of(local) if spec.workload else spec.compressibility
        return synthesize_page_content(local, c, spec.content_seed)

    def valid_page(self, page: int) -> bool:
        core, local = self._split(page)
        return core < len(self.specs) and local in self._valid[core]

    def all_pages(self) -> list:
        out = []
        for core, pages in enumerate(self.pages):
            base = core << CORE_REGION_BITS if len(self.specs) > 1 else 0
            out.extend(base + p for p in pages)
        return out


def system_params(cfg: ExperimentConfig) -> SystemParams:
    return SystemParams(
        switch_latency_ns=cfg.switch_latency_ns,
        bandwidth_factor=cfg.bandwidth_factor,
        local_memory_pages=cfg.local_memory_pages,
        local_memory_fraction=cfg.local_memory_fraction,
        replacement_policy=cfg.replacement_policy,
        window_limit=cfg.window_limit,
        n_memory_components=cfg.n_memory_components,
        page_home_policy=cfg.page_home_policy,
        home_seed=cfg.seed,
        disturbance=list(cfg.disturbance),
        engine=EngineParams(llc_dirty_lines=cfg.llc_dirty_lines, dirty_threshold=cfg.dirty_threshold),
    )


def simulate(cfg: ExperimentConfig, scheme_name: str, *, trace_events: bool = False,
             check: bool = False):
    """Build and run one system; returns (system, result)."""
    scheme = cfg.scheme_config(scheme_name)
    wl = Workloads(cfg)
    system = System(scheme, system_params(cfg), wl.traces, wl.content, wl.working_set,
                    valid_page=wl.valid_page, trace_events=trace_events, check=check)
    system.workloads = wl
    return system, system.run()


def _metrics_rows(cfg, scheme, system, result) -> list:
    wl = system.workloads
    kinds = result.bytes_by_kind
    rows = []
    for cm, spec in zip(result.core_metrics, wl.specs):
        rows.append(RunMetrics(
            scheme=scheme.name, core=cm.core_id, n_cores=len(wl.specs), workload=spec.label,
            switch_latency_ns=cfg.switch_latency_ns, bandwidth_factor=cfg.bandwidth_factor,
            partition_ratio=scheme.partition_ratio, codec=scheme.codec.name.lower(),
            slot_policy=scheme.slot_policy if scheme.partitioned else "",
            replacement_policy=system.lm.policy, local_memory_fraction=cfg.local_memory_fraction,
            local_memory_pages=system.lm.capacity_pages,
            n_memory_components=cfg.n_memory_components, page_home_policy=cfg.page_home_policy,
            seed=cfg.seed, cycles=cm.cycles, instructions=cm.instructions,
            pseudo_ipc=cm.pseudo_ipc, mean_access_latency_ns=cm.mean_access_latency_ns,
            mean_remote_latency_ns=cm.mean_remote_latency_ns,
            p50_remote_latency_ns=cm.p50_remote_latency_ns,
            p99_remote_latency_ns=cm.p99_remote_latency_ns, hit_ratio=result.hit_ratio,
            bytes_line_request=kinds[PacketKind.LINE_REQUEST.value],
            bytes_line_data=kinds[PacketKind.LINE_DATA.value],
            bytes_page_request=kinds[PacketKind.PAGE_REQUEST.value],
            bytes_page_data=kinds[PacketKind.PAGE_DATA.value],
            bytes_dirty_line_wb=kinds[PacketKind.DIRTY_LINE_WB.value],
            bytes_dirty_page_wb=kinds[PacketKind.DIRTY_PAGE_WB.value],
            pages_throttled=result.counters["throttled_pages"],
            pages_saved_by_compression=result.compressed_bytes_saved / 4096,
        ))
    return rows


def _cell_key(cfg: ExperimentConfig, scheme: str):
    d = asdict(cfg)
    d.pop("schemes")
    d.pop("baseline")
    return scheme, repr(sorted(d.items(), key=lambda kv: kv[0]))


def run(cfg: ExperimentConfig, *, cache: dict | None = None, on_system=None,
        trace_events: bool = False) -> list:
    """Run every scheme of ``cfg`` (plus the baseline) and return metric rows."""
    cfg.validate()
    cache = {} if cache is None else cache
    results = {}
    for name in dict.fromkeys([*cfg.schemes, cfg.baseline]):
        key = _cell_key(cfg, name)
        if key not in cache:
            log.info("running %s", name)
            system, result = simulate(cfg, name, trace_events=trace_events)
            if on_system is not None:
                on_system(name, system, result)
            cache[key] = _metrics_rows(cfg, cfg.scheme_config(name), system, result)
        results[name] = cache[key]
    rows = []
    base_rows = results[cfg.baseline]
    for name in cfg.schemes:
        for row, base in zip(results[name], base_rows):
            row = RunMetrics(**asdict(row))
            row.baseline_scheme = cfg.baseline
            row.baseline_cycles = base.cycles
            row.speedup = base.cycles / row.cycles
            rows.append(row)
    return rows


def run_multi(cfg: ExperimentConfig, **kwargs) -> list:
    """Multi-core run: one trace per core, per-core speedups against the same core under the baseline."""
    if cfg.n_cores < 2:
        raise ConfigError("experiment.n_cores", "run_multi needs at least two cores")
    if len(cfg.workloads) not in (1, cfg.n_cores):
        raise ConfigError("workload", f"{len(cfg.workloads)} workloads for {cfg.n_cores} cores")
    return run(cfg, **kwargs)


def parse_axes(spec: str) -> dict:
    """``name=v1,v2;name2=...`` into an ordered axis dict."""
    axes = {}
    for part in spec.split(";"):
        if not part.strip():
            continue
        if "=" not in part:
            raise ConfigError(f"axes.{part.strip()}", "expected name=value[,value...]")
        name, values = part.split("=", 1)
        name = name.strip()
        if name == "schemes":
            name = "scheme"
        if name not in SWEEP_AXES:
            raise ConfigError(f"axes.{name}", f"not a sweepable field; choose from {', '.join(SWEEP_AXES)}")
        items = parse_list(values)
        if not items:
            raise ConfigError(f"axes.{name}", "empty axis")
        if name in axes:
            raise ConfigError(f"axes.{name}", "axis given twice")
        if name == "scheme":
            axes[name] = [ExperimentConfig._scheme(v, f"axes.{name}") for v in items]
        else:
            axes[name] = [coerce_field(name, v, f"axes.{name}") for v in items]
    if not axes:
        raise ConfigError("axes", "no axes given")
    return axes


def sweep(cfg: ExperimentConfig, axes) -> list:
    """One row per cell of the cartesian product (per core when n_cores > 1)."""
    if isinstance(axes, str):
        axes = parse_axes(axes)
    for name, values in axes.items():
        if not values:
            raise ConfigError(f"axes.{name}", "empty axis")
    names = list(axes)
    cache: dict = {}
    rows = []
    for combo in itertools.product(*(axes[n] for n in names)):
        changes = dict(zip(names, combo))
        if "scheme" in changes:
            changes["schemes"] = [changes.pop("scheme")]
        cell = cfg.with_(**changes).validate()
        rows.extend(run(cell, cache=cache))
    return rows


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


def write_csv(rows, out) -> None:
    """Write metric rows with the fixed header; ``out`` is a path or text file."""
    if isinstance(out, (str, bytes)) or hasattr(out, "__fspath__"):
        with open(out, "w", encoding="utf-8", newline="") as fh:
            write_csv(rows, fh)
        return
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        d = asdict(row)
        writer.writerow([_fmt(d[c]) for c in CSV_COLUMNS])


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    write_csv(rows, buf)
    return buf.getvalue()


def write_utilization_csv(rows, out) -> None:
    with open(out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(UTILIZATION_COLUMNS)
        for start, link_id, util in rows:
            writer.writerow([start, link_id, repr(util)])
