"""The nine data-movement schemes as engine flag bundles."""
from __future__ import annotations

from dataclasses import dataclass, replace

from .arbiter import partition_lines_per_page
from .compression import CodecId

SCHEME_NAMES = ("Local", "CacheLine", "Remote", "PageFree", "CacheLinePlusPage",
                "LC", "BP", "PQ", "DaeMon")
SLOT_POLICIES = ("strict", "work-conserving")


@dataclass(frozen=True)
class SchemeConfig:
    name: str
    line_path: bool
    page_path: bool
    partitioned: bool = False
    partition_ratio: float | None = None
    selection_unit: bool = False
    codec: CodecId = CodecId.NONE
    local_memory: bool = True
    page_free_zero_cost: bool = False
    preload_all: bool = False
    slot_policy: str = "strict"

    @property
    def arbiter_mode(self) -> str:
        return self.slot_policy if self.partitioned else "fifo"

    @property
    def lines_per_page_slot(self) -> int | None:
        return partition_lines_per_page(self.partition_ratio) if self.partitioned else None

    def describe(self) -> str:
        paths = "+".join(p for p, on in (("line", self.line_path), ("page", self.page_path)) if on)
        bits = [self.name, paths or "local-only"]
        if self.partitioned:
            bits.append(f"ratio={self.partition_ratio} ({self.slot_policy})")
        if self.selection_unit:
            bits.append("selection")
        if self.codec is not CodecId.NONE:
            bits.append(f"codec={self.codec.name.lower()}")
        return " ".join(bits)


_BASE = {
    "local": SchemeConfig("Local", line_path=False, page_path=False, preload_all=True),
    "cacheline": SchemeConfig("CacheLine", line_path=True, page_path=False, local_memory=False),
    "remote": SchemeConfig("Remote", line_path=False, page_path=True),
    "pagefree": SchemeConfig("PageFree", line_path=True, page_path=False, page_free_zero_cost=True),
    "cachelinepluspage": SchemeConfig("CacheLinePlusPage", line_path=True, page_path=True),
    "lc": SchemeConfig("LC", line_path=False, page_path=True, codec=CodecId.LZ),
    "bp": SchemeConfig("BP", line_path=True, page_path=True, partitioned=True, partition_ratio=0.25),
    "pq": SchemeConfig("PQ", line_path=True, page_path=True, partitioned=True, partition_ratio=0.25,
                       selection_unit=True),
    "daemon": SchemeConfig("DaeMon", line_path=True, page_path=True, partitioned=True,
                           partition_ratio=0.25, selection_unit=True, codec=CodecId.LZ),
}
_ALIASES = {"cl": "cacheline", "cl+p": "cachelinepluspage", "clp": "cachelinepluspage",
            "cachelinepluspage": "cachelinepluspage"}


def canonical_name(name: str) -> str:
    key = str(name).strip().lower().replace("-", "").replace("_", "").replace(" ", "")
    key = _ALIASES.get(key, key)
    if key not in _BASE:
        raise ValueError(f"unknown scheme {name!r}; choose from {', '.join(SCHEME_NAMES)}")
    return _BASE[key].name


def build_scheme(name: str, **overrides) -> SchemeConfig:
    """Build a validated scheme; ``None`` overrides are ignored.

    Accepted overrides: ``partition_ratio``, ``slot_policy`` (partitioned
    schemes only) and ``codec`` (compressed schemes only, where it picks
    the algorithm).
    """
    base = _BASE[canonical_name(name).lower()]
    overrides = {k: v for k, v in overrides.items() if v is not None}
    unknown = set(overrides) - {"partition_ratio", "slot_policy", "codec"}
    if unknown:
        raise ValueError(f"unsupported scheme override(s): {', '.join(sorted(unknown))}")
    changes = {}
    if "partition_ratio" in overrides:
        if not base.partitioned:
            raise ValueError(f"{base.name} has no bandwidth partitioning; partition_ratio not allowed")
        ratio = float(overrides["partition_ratio"])
        partition_lines_per_page(ratio)  # validates range
        changes["partition_ratio"] = ratio
    if "slot_policy" in overrides:
        policy = str(overrides["slot_policy"]).lower().replace("_", "-")
        if policy not in SLOT_POLICIES:
            raise ValueError(f"slot_policy must be one of {SLOT_POLICIES}, got {policy!r}")
        if not base.partitioned and policy != "strict":
            raise ValueError(f"{base.name} has no bandwidth partitioning; slot_policy not allowed")
        changes["slot_policy"] = policy
    if "codec" in overrides:
        codec = CodecId.parse(overrides["codec"])
        if base.codec is CodecId.NONE:
            if codec is not CodecId.NONE:
                hint = {"Remote": " (use LC)", "PQ": " (use DaeMon)"}.get(base.name, "")
                raise ValueError(f"{base.name} does not compress pages{hint}")
        elif codec is CodecId.NONE:
            raise ValueError(f"{base.name} requires a codec")
        changes["codec"] = codec
    cfg = replace(base, **changes)
    if cfg.partitioned and cfg.partition_ratio is not None:
        # the strict pattern needs at least one line slot
        if partition_lines_per_page(cfg.partition_ratio) < 1:
            raise ValueError(f"partition ratio {cfg.partition_ratio} leaves no line slot")
    return cfg
