"""Link-compression codecs for 4 KB pages.

Wire image of a compressed page::

    [1B codec_id][4B little-endian compressed_size][data]

``compressed_size`` is the length of the whole image, framing included. A
codec whose encoding would exceed the raw page is sent with codec id 0 (raw),
except LZ, which falls back per 1 KB block.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache

from . import fpcbdi, fve, lz

PAGE_SIZE = 4096
LINE_SIZE = 64
FRAME_BYTES = 5
# LZ keeps a one-byte block-mode mask even when every block is raw
MAX_OVERHEAD = FRAME_BYTES + 1


class CodecId(IntEnum):
    NONE = 0
    LZ = 1
    FPCBDI = 2
    FVE = 3

    @classmethod
    def parse(cls, name) -> "CodecId":
        if isinstance(name, CodecId):
            return name
        key = str(name).strip().upper().replace("-", "").replace("_", "")
        aliases = {"RAW": "NONE", "": "NONE", "OFF": "NONE", "BDIFPC": "FPCBDI", "FPC": "FPCBDI"}
        key = aliases.get(key, key)
        try:
            return cls[key]
        except KeyError:
            raise ValueError(f"unknown codec {name!r}; expected one of "
                             f"{', '.join(c.name.lower() for c in cls)}") from None


# (de)compression cost in CPU cycles: per page for LZ, per 64 B line otherwise
_CYCLES_PER_PAGE = {CodecId.NONE: 0, CodecId.LZ: 64}
_CYCLES_PER_LINE = {CodecId.FPCBDI: 4, CodecId.FVE: 6}


@dataclass(frozen=True)
class CodecSpec:
    id: CodecId

    def latency_cycles(self, direction: str = "compress") -> int:
        return latency_cycles(self.id, direction)


def latency_cycles(codec, direction: str = "compress") -> int:
    """Cycles to (de)compress one page; identical in both directions."""
    if direction not in ("compress", "decompress"):
        raise ValueError(f"direction must be 'compress' or 'decompress', got {direction!r}")
    codec = CodecId.parse(codec)
    if codec in _CYCLES_PER_PAGE:
        return _CYCLES_PER_PAGE[codec]
    return _CYCLES_PER_LINE[codec] * (PAGE_SIZE // LINE_SIZE)


@dataclass(frozen=True)
class CompressedPage:
    codec_id: CodecId
    data: bytes
    original_size: int = PAGE_SIZE

    @property
    def compressed_size(self) -> int:
        return FRAME_BYTES + len(self.data)

    @property
    def ratio(self) -> float:
        return self.original_size / self.compressed_size

    def to_bytes(self) -> bytes:
        return struct.pack("<BI", int(self.codec_id), self.compressed_size) + self.data

    @classmethod
    def from_bytes(cls, wire: bytes) -> "CompressedPage":
        if len(wire) < FRAME_BYTES:
            raise ValueError("truncated compressed page header")
        codec, size = struct.unpack_from("<BI", wire)
        if size != len(wire):
            raise ValueError(f"size field says {size} bytes, image has {len(wire)}")
        return cls(CodecId(codec), bytes(wire[FRAME_BYTES:]))


def _check(page) -> bytes:
    page = bytes(page)
    if len(page) != PAGE_SIZE:
        raise ValueError(f"page must be exactly {PAGE_SIZE} bytes, got {len(page)}")
    return page


def lz_compress(page) -> CompressedPage:
    return CompressedPage(CodecId.LZ, lz.encode(_check(page)))


def fpcbdi_compress(page) -> CompressedPage:
    page = _check(page)
    data = fpcbdi.encode(page)
    if len(data) > PAGE_SIZE:
        return CompressedPage(CodecId.NONE, page)
    return CompressedPage(CodecId.FPCBDI, data)


def fve_compress(page) -> CompressedPage:
    page = _check(page)
    if fve.encoded_size(page) > PAGE_SIZE:
        return CompressedPage(CodecId.NONE, page)
    return CompressedPage(CodecId.FVE, fve.encode(page))


_COMPRESSORS = {
    CodecId.NONE: lambda page: CompressedPage(CodecId.NONE, _check(page)),
    CodecId.LZ: lz_compress,
    CodecId.FPCBDI: fpcbdi_compress,
    CodecId.FVE: fve_compress,
}
_DECODERS = {
    CodecId.NONE: bytes,
    CodecId.LZ: lz.decode,
    CodecId.FPCBDI: fpcbdi.decode,
    CodecId.FVE: fve.decode,
}


def compress(page, codec) -> CompressedPage:
    return _COMPRESSORS[CodecId.parse(codec)](page)


def decompress(cp: CompressedPage) -> bytes:
    return _DECODERS[cp.codec_id](cp.data)


class PageCodec:
    """A codec bound to a clock frequency, with a content-keyed cache.

    Simulated pages are mostly synthesized and rarely rewritten, so the same
    4 KB image is compressed many times; the cache makes that cheap.
    """

    def __init__(self, codec, cycle_ps: int, cache_size: int = 8192):
        self.id = CodecId.parse(codec)
        self.cycle_ps = cycle_ps
        self._compress = lru_cache(maxsize=cache_size)(self._compress_uncached)

    def _compress_uncached(self, page: bytes) -> CompressedPage:
        return compress(page, self.id)

    @property
    def enabled(self) -> bool:
        return self.id is not CodecId.NONE

    def compress(self, page: bytes) -> CompressedPage:
        return self._compress(bytes(page))

    def decompress(self, cp: CompressedPage) -> bytes:
        return decompress(cp)

    def latency_ps(self, direction: str = "compress") -> int:
        return latency_cycles(self.id, direction) * self.cycle_ps


def warm_up():
    """Trigger JIT compilation of every codec kernel."""
    page = bytes(range(256)) * 16
    for codec in (CodecId.LZ, CodecId.FPCBDI, CodecId.FVE):
        decompress(compress(page, codec))
        decompress(compress(bytes(PAGE_SIZE), codec))
