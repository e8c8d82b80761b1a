"""Experiment configuration: INI-style sections or JSON, validated with field paths.

Example::

    [experiment]
    scheme = Remote, DaeMon
    switch_latency_ns = 100
    bandwidth_factor = 1/4
    seed = 7

    [workload]
    preset = high
    record_count = 20000

``[workload.N]`` sections give core N its own workload; a lone ``[workload]``
is shared by every core. ``trace = path`` replaces the generator with a
trace file. Disturbance windows are ``start_ns:end_ns:fraction`` items.
"""
from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path

from .compression import CodecId
from .network import Disturbance
from .schemes import build_scheme, canonical_name
from .workload import PRESETS, WorkloadConfig, preset

HOME_POLICIES = ("roundrobin", "random")


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def derive_seed(seed: int, *names) -> int:
    """Named sub-seed so every stage can be reproduced on its own."""
    text = ":".join(str(x) for x in (seed, *names))
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


def parse_number(value, path: str) -> float:
    if isinstance(value, bool):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    try:
        return float(Fraction(str(value).strip()))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(path, f"expected a number or fraction, got {value!r}") from None


def parse_int(value, path: str) -> int:
    number = parse_number(value, path)
    if number != int(number):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    return int(number)


def parse_list(value) -> list:
    if isinstance(value, (list, tuple)):
        return list(value)
    return [item.strip() for item in str(value).split(",") if item.strip()]


@dataclass
class WorkloadSpec:
    """Either a generator config or a trace file (with content parameters)."""
    workload: WorkloadConfig | None = None
    trace: str | None = None
    compressibility: float = 0.5
    content_seed: int | None = None

    @property
    def label(self) -> str:
        if self.trace:
            return Path(self.trace).name
        w = self.workload
        return f"{w.locality_class}/{w.working_set_pages}p"


@dataclass
class ExperimentConfig:
    schemes: list = field(default_factory=lambda: ["Remote"])
    baseline: str = "Remote"
    switch_latency_ns: float = 100.0
    bandwidth_factor: float = 0.25
    partition_ratio: float | None = None
    codec: str | None = None
    slot_policy: str = "strict"
    replacement_policy: str = "lru"
    local_memory_fraction: float = 0.2
    local_memory_pages: int | None = None
    n_cores: int = 1
    window_limit: int = 128
    n_memory_components: int = 1
    page_home_policy: str = "roundrobin"
    workloads: list = field(default_factory=list)
    disturbance: list = field(default_factory=list)
    seed: int = 1
    llc_dirty_lines: int = 4096
    dirty_threshold: int = 8

    def validate(self) -> "ExperimentConfig":
        if not self.schemes:
            raise ConfigError("experiment.scheme", "at least one scheme is required")
        self.schemes = [self._scheme(s, "experiment.scheme") for s in self.schemes]
        self.baseline = self._scheme(self.baseline, "experiment.baseline")
        if self.switch_latency_ns <= 0:
            raise ConfigError("experiment.switch_latency_ns", "must be positive")
        if self.bandwidth_factor <= 0:
            raise ConfigError("experiment.bandwidth_factor", "must be positive")
        if self.partition_ratio is not None and not 0 < self.partition_ratio < 1:
            raise ConfigError("experiment.partition_ratio", "must be in (0, 1)")
        if self.codec is not None:
            try:
                CodecId.parse(self.codec)
            except ValueError as exc:
                raise ConfigError("experiment.codec", str(exc)) from None
        policy = str(self.slot_policy).lower().replace("_", "-")
        if policy not in ("strict", "work-conserving"):
            raise ConfigError("experiment.slot_policy", "must be strict or work-conserving")
        self.slot_policy = policy
        if str(self.replacement_policy).lower() not in ("lru", "fifo", "approxlru", "approx-lru"):
            raise ConfigError("experiment.replacement_policy", "must be lru or fifo")
        if not 0 < self.local_memory_fraction <= 1:
            raise ConfigError("experiment.local_memory_fraction", "must be in (0, 1]")
        if self.local_memory_pages is not None and self.local_memory_pages < 1:
            raise ConfigError("experiment.local_memory_pages", "must be >= 1")
        if self.n_cores < 1:
            raise ConfigError("experiment.n_cores", "must be >= 1")
        if self.window_limit < 1:
            raise ConfigError("experiment.window_limit", "must be >= 1")
        if self.n_memory_components < 1:
            raise ConfigError("experiment.n_memory_components", "must be >= 1")
        home = str(self.page_home_policy).lower().replace("-", "").replace("_", "")
        if home not in HOME_POLICIES:
            raise ConfigError("experiment.page_home_policy", "must be roundrobin or random")
        self.page_home_policy = home
        if not self.workloads:
            raise ConfigError("workload", "no workload or trace configured")
        if len(self.workloads) not in (1, self.n_cores):
            raise ConfigError("workload", f"{len(self.workloads)} workloads for {self.n_cores} cores")
        windows = sorted(self.disturbance, key=lambda d: d.start)
        for a, b in zip(windows, windows[1:]):
            if b.start < a.end:
                raise ConfigError("disturbance.windows", "windows overlap")
        if self.llc_dirty_lines < 1:
            raise ConfigError("experiment.llc_dirty_lines", "must be >= 1")
        if self.dirty_threshold < 1:
            raise ConfigError("experiment.dirty_threshold", "must be >= 1")
        return self

    @staticmethod
    def _scheme(name, path):
        try:
            return canonical_name(name)
        except ValueError as exc:
            raise ConfigError(path, str(exc)) from None

    def scheme_config(self, name: str):
        """The scheme with this experiment's overrides, where they apply."""
        base = build_scheme(name)
        kwargs = {}
        if base.partitioned:
            kwargs["partition_ratio"] = self.partition_ratio
            kwargs["slot_policy"] = self.slot_policy
        if base.codec is not CodecId.NONE and self.codec is not None:
            kwargs["codec"] = self.codec
        return build_scheme(name, **kwargs)

    def per_core_workloads(self) -> list:
        if len(self.workloads) == 1:
            return self.workloads * self.n_cores
        return list(self.workloads)

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


_FIELD_TYPES = {
    "switch_latency_ns": parse_number, "bandwidth_factor": parse_number,
    "partition_ratio": parse_number, "local_memory_fraction": parse_number,
    "local_memory_pages": parse_int, "n_cores": parse_int, "window_limit": parse_int,
    "n_memory_components": parse_int, "seed": parse_int, "llc_dirty_lines": parse_int,
    "dirty_threshold": parse_int,
}
_STRING_FIELDS = ("baseline", "codec", "slot_policy", "replacement_policy", "page_home_policy")
_WORKLOAD_FIELDS = {f.name for f in fields(WorkloadConfig)}


def coerce_field(name: str, value, path: str):
    if name in ("scheme", "schemes"):
        return parse_list(value)
    if name in _FIELD_TYPES:
        if value is None or (isinstance(value, str) and value.strip().lower() in ("", "none")):
            return None
        return _FIELD_TYPES[name](value, path)
    if name in _STRING_FIELDS:
        return None if value is None else str(value).strip()
    raise ConfigError(path, "unknown setting")


def _parse_workload(section: dict, path: str, seed: int, index: int) -> WorkloadSpec:
    section = dict(section)
    content_c = section.pop("content_compressibility", None)
    content_seed = section.pop("content_seed", None)
    content_seed = parse_int(content_seed, f"{path}.content_seed") if content_seed is not None else \
        derive_seed(seed, "content", index)
    if "trace" in section:
        trace = str(section.pop("trace"))
        c = section.pop("compressibility", content_c if content_c is not None else 0.5)
        if section:
            raise ConfigError(f"{path}.{next(iter(section))}", "not allowed together with trace")
        c = parse_number(c, f"{path}.compressibility")
        if not 0 <= c <= 1:
            raise ConfigError(f"{path}.compressibility", "must be in [0, 1]")
        return WorkloadSpec(trace=trace, compressibility=c, content_seed=content_seed)
    name = section.pop("preset", None)
    params = {}
    for key, value in section.items():
        if key not in _WORKLOAD_FIELDS:
            raise ConfigError(f"{path}.{key}", "unknown workload setting")
        if key == "locality_class":
            if isinstance(value, (list, tuple)):
                params[key] = tuple(parse_int(v, f"{path}.{key}") for v in value)
            elif "-" in str(value) or ".." in str(value):
                lo, hi = str(value).replace("..", "-").split("-")
                params[key] = (parse_int(lo, f"{path}.{key}"), parse_int(hi, f"{path}.{key}"))
            else:
                params[key] = str(value).strip()
        elif key == "compressibility":
            items = value if isinstance(value, (list, tuple)) else parse_list(value)
            nums = [parse_number(v, f"{path}.{key}") for v in items]
            params[key] = nums[0] if len(nums) == 1 else tuple(nums)
        elif key in ("working_set_pages", "record_count", "seed", "hot_drift"):
            params[key] = parse_int(value, f"{path}.{key}")
        else:
            params[key] = parse_number(value, f"{path}.{key}")
    params.setdefault("seed", derive_seed(seed, "workload", index))
    try:
        if name is not None:
            if str(name).lower() not in PRESETS:
                raise ConfigError(f"{path}.preset", f"unknown preset {name!r}")
            wl = preset(str(name), **params)
        else:
            if "working_set_pages" not in params:
                raise ConfigError(f"{path}.working_set_pages", "required without a preset")
            wl = WorkloadConfig(**params)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(path, str(exc)) from None
    return WorkloadSpec(workload=wl, content_seed=content_seed)


def _parse_disturbance(value, path) -> list:
    windows = []
    items = value if isinstance(value, list) else parse_list(value)
    for i, item in enumerate(items):
        where = f"{path}[{i}]"
        if isinstance(item, dict):
            parts = [item.get("start_ns"), item.get("end_ns"), item.get("fraction")]
        else:
            parts = str(item).split(":")
        if len(parts) != 3 or None in parts:
            raise ConfigError(where, "expected start_ns:end_ns:fraction")
        start, end, frac = (parse_number(p, where) for p in parts)
        try:
            windows.append(Disturbance(round(start * 1000), round(end * 1000), frac))
        except ValueError as exc:
            raise ConfigError(where, str(exc)) from None
    return windows


def config_from_dict(data: dict) -> ExperimentConfig:
    """Build from ``{"experiment": {...}, "workload": {...} | [...], "disturbance": ...}``."""
    if not isinstance(data, dict):
        raise ConfigError("<root>", "expected a mapping")
    unknown = set(data) - {"experiment", "workload", "workloads", "disturbance"}
    unknown = {k for k in unknown if not k.startswith("workload.")}
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown section")
    exp = dict(data.get("experiment", {}))
    kwargs = {}
    for key, value in exp.items():
        value = coerce_field(key, value, f"experiment.{key}")
        if key in ("scheme", "schemes"):
            kwargs["schemes"] = value
        elif value is not None:
            kwargs[key] = value
    seed = kwargs.get("seed", 1)
    sections = []
    wl = data.get("workloads", data.get("workload"))
    if isinstance(wl, list):
        sections = [(f"workloads[{i}]", s) for i, s in enumerate(wl)]
    elif isinstance(wl, dict):
        sections = [("workload", wl)]
    numbered = sorted((k for k in data if k.startswith("workload.")),
                      key=lambda k: int(k.split(".", 1)[1]) if k.split(".", 1)[1].isdigit() else -1)
    for key in numbered:
        if not key.split(".", 1)[1].isdigit():
            raise ConfigError(key, "workload sections are numbered workload.0, workload.1, ...")
        sections.append((key, data[key]))
    kwargs["workloads"] = [_parse_workload(s, path, seed, i) for i, (path, s) in enumerate(sections)]
    dist = data.get("disturbance")
    if dist:
        value = dist.get("windows", []) if isinstance(dist, dict) else dist
        kwargs["disturbance"] = _parse_disturbance(value, "disturbance.windows")
    return ExperimentConfig(**kwargs).validate()


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc.strerror}") from None
    if path.suffix.lower() == ".json" or text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}", exc.msg) from None
        return config_from_dict(data)
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(str(path), str(exc).splitlines()[0]) from None
    return config_from_dict({name: dict(parser[name]) for name in parser.sections()})
