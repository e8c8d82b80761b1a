"""LLC-miss traces: synthesis, parsing, profiling, and page contents.

A trace is a stream of ``TraceRecord(gap, op, address)``. The generator
models a program as a sequence of *page visits*: each visit touches a run of
distinct lines of one page. Visits go either to a hot set (uniform choice, so
every hot page is revisited with geometric inter-arrival) or to the next page
of a sequential sweep over the rest of the working set.
"""
from __future__ import annotations

import hashlib
import random
import struct
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Iterable, Iterator, NamedTuple

PAGE_SHIFT = 12
LINE_SHIFT = 6
PAGE_SIZE = 1 << PAGE_SHIFT
LINE_SIZE = 1 << LINE_SHIFT
LINES_PER_PAGE = PAGE_SIZE // LINE_SIZE

# distinct lines touched per page visit, inclusive bounds
LOCALITY_CLASSES = {
    "poor": (1, 4),
    "medium": (8, 24),
    "high": (40, 64),
}


class Op(str, Enum):
    READ = "R"
    WRITE = "W"


class TraceRecord(NamedTuple):
    gap: int
    op: Op
    address: int

    @property
    def page(self) -> int:
        return self.address >> PAGE_SHIFT

    @property
    def line(self) -> int:
        return self.address >> LINE_SHIFT


class TraceParseError(ValueError):
    def __init__(self, path, line_no: int, message: str):
        self.path = path
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


@dataclass
class WorkloadConfig:
    working_set_pages: int
    locality_class: str | tuple = "medium"
    write_fraction: float = 0.2
    # reuse model: share of the working set that is hot, share of visits
    # that go to it, and mean compute cycles between records
    hot_fraction: float = 0.15
    hot_probability: float = 0.9
    mean_gap: float = 20.0
    # visits per one-page advance of the hot window (0 keeps the hot set fixed)
    hot_drift: int = 0
    compressibility: float | tuple = 0.5
    record_count: int = 20_000
    seed: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.working_set_pages < 1:
            raise ValueError("working_set_pages must be >= 1")
        if not 0.0 <= self.write_fraction <= 1.0:
            raise ValueError("write_fraction must be in [0, 1]")
        if not 0.0 < self.hot_fraction <= 1.0:
            raise ValueError("hot_fraction must be in (0, 1]")
        if not 0.0 <= self.hot_probability <= 1.0:
            raise ValueError("hot_probability must be in [0, 1]")
        if self.hot_drift < 0:
            raise ValueError("hot_drift must be >= 0")
        if self.mean_gap < 0:
            raise ValueError("mean_gap must be >= 0")
        if self.record_count < 0:
            raise ValueError("record_count must be >= 0")
        for c in self.compressibility_regions:
            if not 0.0 <= c <= 1.0:
                raise ValueError("compressibility must be in [0, 1]")
        lo, hi = self.lines_per_visit
        if not 1 <= lo <= hi <= LINES_PER_PAGE:
            raise ValueError(f"lines per visit must satisfy 1 <= lo <= hi <= 64, got {lo}..{hi}")

    @property
    def lines_per_visit(self) -> tuple[int, int]:
        if isinstance(self.locality_class, str):
            try:
                return LOCALITY_CLASSES[self.locality_class.lower()]
            except KeyError:
                raise ValueError(f"unknown locality class {self.locality_class!r}") from None
        lo, hi = self.locality_class
        return int(lo), int(hi)

    @property
    def compressibility_regions(self) -> tuple:
        c = self.compressibility
        return tuple(c) if isinstance(c, (tuple, list)) else (c,)

    def compressibility_of(self, page_id: int) -> float:
        regions = self.compressibility_regions
        idx = min(len(regions) - 1, page_id * len(regions) // self.working_set_pages)
        return regions[idx]

    def page_content(self, page_id: int) -> bytes:
        return synthesize_page_content(page_id, self.compressibility_of(page_id), self.seed)

    def with_(self, **changes) -> "WorkloadConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


# Calibrated desk-scale stand-ins for the three locality groups, plus a
# compressible bandwidth-bound mix. Local memory defaults to 20% of the
# working set, so hot sets below 20% stay resident under LRU.
PRESETS = {
    "poor": dict(working_set_pages=512, locality_class="poor", write_fraction=0.25,
                 hot_fraction=0.1, hot_probability=0.75, mean_gap=40,
                 compressibility=0.3, record_count=20_000),
    "medium": dict(working_set_pages=384, locality_class="medium", write_fraction=0.25,
                   hot_fraction=0.12, hot_probability=0.9, mean_gap=30,
                   compressibility=0.5, record_count=30_000),
    "high": dict(working_set_pages=640, locality_class="high", write_fraction=0.1,
                 hot_fraction=0.18, hot_probability=0.995, mean_gap=25,
                 compressibility=0.4, record_count=150_000),
    "compressible": dict(working_set_pages=384, locality_class="poor", write_fraction=0.2,
                         hot_fraction=0.12, hot_probability=0.97, hot_drift=20, mean_gap=20,
                         compressibility=0.9, record_count=30_000),
}


def preset(name: str, **overrides) -> WorkloadConfig:
    try:
        params = dict(PRESETS[name.lower()])
    except KeyError:
        raise ValueError(f"unknown workload preset {name!r}; choose from {', '.join(PRESETS)}") from None
    params.update(overrides)
    return WorkloadConfig(**params)


def generate_trace(config: WorkloadConfig) -> Iterator[TraceRecord]:
    """Yield ``config.record_count`` records; a pure function of the config."""
    config.validate()
    rng = random.Random(config.seed)
    n = config.working_set_pages
    lo, hi = config.lines_per_visit
    pages = list(range(n))
    rng.shuffle(pages)
    n_hot = max(1, round(config.hot_fraction * n))
    hot, cold = pages[:n_hot], sorted(pages[n_hot:]) or pages[:n_hot]
    sweep = 0
    last_page = -1
    rate = 1.0 / config.mean_gap if config.mean_gap > 0 else 0.0
    emitted = 0
    visits = 0
    while emitted < config.record_count:
        if config.hot_drift:
            # the hot window slides sequentially through the shuffled page order
            shift = visits // config.hot_drift
            hot = [pages[(shift + i) % n] for i in range(n_hot)]
        visits += 1
        if rng.random() < config.hot_probability:
            idx = rng.randrange(n_hot)
            if hot[idx] == last_page and n_hot > 1:
                idx = (idx + 1 + rng.randrange(n_hot - 1)) % n_hot
            page = hot[idx]
        else:
            page = cold[sweep % len(cold)]
            sweep += 1
        if page == last_page and n > 1:
            # back-to-back visits to one page would merge into a single visit
            page = (page + 1) % n
        last_page = page
        k = rng.randint(lo, hi)
        offsets = sorted(rng.sample(range(LINES_PER_PAGE), k))
        for off in offsets:
            if emitted >= config.record_count:
                return
            gap = int(rng.expovariate(rate)) if rate else 0
            op = Op.WRITE if rng.random() < config.write_fraction else Op.READ
            word = rng.randrange(LINE_SIZE // 8)
            yield TraceRecord(gap, op, (page << PAGE_SHIFT) | (off << LINE_SHIFT) | (word << 3))
            emitted += 1


def parse_trace(path) -> Iterator[TraceRecord]:
    """Read ``<gap>,<R|W>,<0x-address>`` lines; ``#`` starts a comment line."""
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, 1):
            text = raw.strip()
            if not text or text.startswith("#"):
                continue
            yield parse_record(text, path, line_no)


def parse_record(text: str, path="<string>", line_no: int = 1) -> TraceRecord:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise TraceParseError(path, line_no, f"expected 3 comma-separated fields, got {len(parts)}")
    gap_s, op_s, addr_s = parts
    if not gap_s.isdigit():
        raise TraceParseError(path, line_no, f"gap must be a non-negative decimal integer, got {gap_s!r}")
    try:
        op = Op(op_s.upper())
    except ValueError:
        raise TraceParseError(path, line_no, f"op must be R or W, got {op_s!r}") from None
    if not addr_s.lower().startswith("0x"):
        raise TraceParseError(path, line_no, f"address must be 0x-prefixed hex, got {addr_s!r}")
    try:
        address = int(addr_s, 16)
    except ValueError:
        raise TraceParseError(path, line_no, f"bad hex address {addr_s!r}") from None
    if address >= 1 << 64:
        raise TraceParseError(path, line_no, "address exceeds 64 bits")
    return TraceRecord(int(gap_s), op, address)


def format_record(rec: TraceRecord) -> str:
    return f"{rec.gap},{rec.op.value},{rec.address:#x}"


def write_trace(records: Iterable[TraceRecord], path, header: str | None = None) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for rec in records:
            fh.write(format_record(rec) + "\n")
            count += 1
    return count


def synthesize_page_content(page_id: int, compressibility: float, seed: int) -> bytes:
    """Deterministic 4 KB page image whose compressibility grows with the knob.

    Each 64-byte line draws two uniforms u, v. Lines with ``u >= c`` are
    SHAKE-256 output; otherwise the line is all zero when ``v < c`` and a
    repeated small 64-bit value when not. The same draws are used for every
    ``c``, so raising ``c`` only ever turns noise into structure.
    """
    if not 0.0 <= compressibility <= 1.0:
        raise ValueError("compressibility must be in [0, 1]")
    if compressibility >= 1.0:
        return bytes(PAGE_SIZE)
    mask = (1 << 64) - 1
    stream = hashlib.shake_256(struct.pack("<QQ", seed & mask, page_id & mask)).digest(
        PAGE_SIZE + 2 * LINES_PER_PAGE * 2 + 4 * 8)
    if compressibility <= 0.0:
        return stream[:PAGE_SIZE]
    draws = struct.unpack_from(f"<{2 * LINES_PER_PAGE}H", stream, PAGE_SIZE)
    values = struct.unpack_from("<4Q", stream, PAGE_SIZE + 4 * LINES_PER_PAGE)
    threshold = compressibility * 65536
    out = bytearray(stream[:PAGE_SIZE])
    for i in range(LINES_PER_PAGE):
        if draws[i] < threshold:
            start = i * LINE_SIZE
            if draws[LINES_PER_PAGE + i] < threshold:
                out[start:start + LINE_SIZE] = bytes(LINE_SIZE)
            else:
                value = values[draws[LINES_PER_PAGE + i] & 3] & 0xFFFFFF
                out[start:start + LINE_SIZE] = struct.pack("<Q", value) * 8
    return bytes(out)


@dataclass
class LocalityProfile:
    records: int
    visits: int
    pages: int
    mean_lines_per_visit: float
    write_fraction: float
    reuse_histogram: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def locality_profile(trace: Iterable[TraceRecord]) -> LocalityProfile:
    """One-pass statistics.

    A visit is a maximal run of consecutive records to one page. The reuse
    distance of a revisit is the number of distinct other pages visited since
    the previous visit to the same page.
    """
    records = writes = visits = total_lines = 0
    cur_page = None
    cur_lines: set = set()
    stack: list[int] = []  # LRU stack of visited pages, most recent last
    hist: Counter = Counter()

    def close_visit():
        nonlocal visits, total_lines
        visits += 1
        total_lines += len(cur_lines)

    for rec in trace:
        records += 1
        if rec.op is Op.WRITE:
            writes += 1
        page = rec.address >> PAGE_SHIFT
        if page != cur_page:
            if cur_page is not None:
                close_visit()
            cur_page = page
            cur_lines = set()
            try:
                pos = stack.index(page)
            except ValueError:
                pos = -1
            if pos >= 0:
                hist[len(stack) - 1 - pos] += 1
                del stack[pos]
            stack.append(page)
        cur_lines.add((rec.address >> LINE_SHIFT) & (LINES_PER_PAGE - 1))
    if records == 0:
        raise ValueError("cannot profile an empty trace")
    close_visit()
    return LocalityProfile(
        records=records,
        visits=visits,
        pages=len(stack),
        mean_lines_per_visit=total_lines / visits,
        write_fraction=writes / records,
        reuse_histogram=dict(sorted(hist.items())),
    )
