import random

import pytest
from hypothesis import given, settings, strategies as st

from daemonsim.compression import (
    FRAME_BYTES, MAX_OVERHEAD, PAGE_SIZE, CodecId, CodecSpec, CompressedPage, PageCodec, compress,
    decompress, fpcbdi_compress, fve_compress, latency_cycles, lz_compress,
)
from daemonsim.workload import synthesize_page_content

CODECS = [CodecId.LZ, CodecId.FPCBDI, CodecId.FVE]
ZERO = bytes(PAGE_SIZE)


def test_lz_zero_page_golden():
    cp = lz_compress(ZERO)
    assert cp.codec_id is CodecId.LZ
    assert cp.compressed_size == 46  # frozen regression value
    assert cp.compressed_size <= 256


def test_fpcbdi_zero_page_arithmetic():
    # each zero line: tag byte + 16 FPC zero words of 3 bits = 1 + 6 bytes
    assert fpcbdi_compress(ZERO).compressed_size == FRAME_BYTES + 64 * 7


def test_fpcbdi_repeated_eight_byte_value_uses_base8_delta1():
    page = bytes(range(1, 9)) * 512
    cp = fpcbdi_compress(page)
    # per line: tag + 8 B base + 8 one-byte deltas
    assert cp.compressed_size == FRAME_BYTES + 64 * (1 + 8 + 8)
    assert cp.data[0] == 2  # first BDI tag: base 8, delta 1


def test_fve_repeated_value_arithmetic():
    page = bytes(range(1, 9)) * 512
    cp = fve_compress(page)
    assert cp.codec_id is CodecId.FVE
    assert cp.compressed_size == FRAME_BYTES + 256 + 512 * 6 // 8


def test_fve_distinct_values_fall_back_to_raw():
    page = b"".join(((0x1234567890 + i * 0x0101010101010101) % 2**64).to_bytes(8, "little") for i in range(512))
    cp = fve_compress(page)
    assert cp.codec_id is CodecId.NONE
    assert cp.compressed_size == PAGE_SIZE + FRAME_BYTES


def test_random_page_is_stored_raw():
    page = random.Random(1).randbytes(PAGE_SIZE)
    lz = lz_compress(page)
    assert PAGE_SIZE <= lz.compressed_size <= PAGE_SIZE + 8
    for codec in (CodecId.FPCBDI, CodecId.FVE):
        assert compress(page, codec).codec_id is CodecId.NONE
    for codec in CODECS:
        assert decompress(compress(page, codec)) == page


@pytest.mark.parametrize("codec", CODECS)
@pytest.mark.parametrize("size", [0, 4095, 4097])
def test_wrong_page_size_rejected(codec, size):
    with pytest.raises(ValueError):
        compress(bytes(size), codec)


def test_wire_format_is_byte_exact():
    cp = CompressedPage(CodecId.LZ, b"abc")
    wire = cp.to_bytes()
    assert wire == bytes([1, 8, 0, 0, 0]) + b"abc"
    assert CompressedPage.from_bytes(wire) == cp


def test_wire_format_rejects_bad_images():
    with pytest.raises(ValueError):
        CompressedPage.from_bytes(b"\x01\x00")
    with pytest.raises(ValueError):
        CompressedPage.from_bytes(bytes([1, 9, 0, 0, 0]) + b"abc")


@pytest.mark.parametrize("codec,cycles", [(CodecId.NONE, 0), (CodecId.LZ, 64), (CodecId.FPCBDI, 256),
                                          (CodecId.FVE, 384)])
def test_latency_cycles(codec, cycles):
    assert latency_cycles(codec) == cycles
    assert latency_cycles(codec, "decompress") == cycles
    assert CodecSpec(codec).latency_cycles() == cycles


def test_latency_direction_validated():
    with pytest.raises(ValueError):
        latency_cycles(CodecId.LZ, "sideways")


@pytest.mark.parametrize("name,expected", [("lz", CodecId.LZ), ("BDI-FPC", CodecId.FPCBDI),
                                           ("fpc_bdi", CodecId.FPCBDI), ("raw", CodecId.NONE),
                                           ("none", CodecId.NONE), ("FVE", CodecId.FVE)])
def test_codec_name_parsing(name, expected):
    assert CodecId.parse(name) is expected


def test_unknown_codec_name():
    with pytest.raises(ValueError, match="unknown codec"):
        CodecId.parse("zstd")


def test_page_codec_latency_and_cache():
    codec = PageCodec("lz", cycle_ps=278)
    assert codec.enabled
    assert codec.latency_ps() == 64 * 278
    first = codec.compress(ZERO)
    assert codec.compress(bytearray(PAGE_SIZE)) is first
    assert codec.decompress(first) == ZERO
    assert not PageCodec("none", 278).enabled


def test_lz_beats_other_codecs_on_compressible_corpus():
    means = {}
    for codec in CODECS:
        ratios = [compress(synthesize_page_content(p, c, 3), codec).ratio
                  for p in range(60) for c in (0.5, 0.7, 0.9)]
        means[codec] = sum(ratios) / len(ratios)
    assert means[CodecId.LZ] >= means[CodecId.FPCBDI]
    assert means[CodecId.LZ] >= means[CodecId.FVE]


def structured_pages():
    words = st.binary(min_size=1, max_size=8).map(lambda w: (w * PAGE_SIZE)[:PAGE_SIZE])
    sparse = st.lists(st.tuples(st.integers(0, PAGE_SIZE - 1), st.integers(0, 255)), max_size=80).map(
        lambda edits: bytes(_apply(edits)))
    synth = st.tuples(st.integers(0, 10**6), st.floats(0, 1), st.integers(0, 2**32)).map(
        lambda t: synthesize_page_content(*t))
    noise = st.binary(min_size=PAGE_SIZE, max_size=PAGE_SIZE)
    return st.one_of(words, sparse, synth, noise)


def _apply(edits):
    page = bytearray(PAGE_SIZE)
    for pos, value in edits:
        page[pos] = value
    return page


@settings(max_examples=200, deadline=None)
@given(page=structured_pages(), codec=st.sampled_from(CODECS))
def test_round_trip_and_size_bound(page, codec):
    cp = compress(page, codec)
    assert cp.compressed_size <= PAGE_SIZE + MAX_OVERHEAD
    assert decompress(cp) == page
    assert CompressedPage.from_bytes(cp.to_bytes()) == cp
