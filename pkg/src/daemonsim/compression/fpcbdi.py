"""Per-line hybrid of base-delta-immediate and frequent-pattern compression.

Each 64-byte line is written as a one-byte tag followed by the smallest of:

* tag 0: the raw line (64 bytes)
* tag 1: FPC, sixteen 32-bit words, each a 3-bit prefix plus its payload,
  MSB-first bit packing padded to a whole byte
* tags 2..7: BDI with the first value as base, (base bytes, delta bytes) in
  (8,1) (8,2) (8,4) (4,1) (4,2) (2,1); base little-endian, then signed deltas

FPC prefixes: 0 zero word, 1 4-bit sign-extended, 2 8-bit sign-extended,
3 repeated bytes, 4 16-bit sign-extended, 5 low halfword zero (upper half
stored), 6 two sign-extended bytes, 7 uncompressed.
"""
import numpy as np
from numba import njit

LINE = 64
_BDI = ((8, 1), (8, 2), (8, 4), (4, 1), (4, 2), (2, 1))
BDI_BASES = np.array([b for b, _ in _BDI], np.int64)
BDI_DELTAS = np.array([d for _, d in _BDI], np.int64)
_FPC_BITS = np.array([0, 4, 8, 8, 16, 16, 16, 32], np.int64)


@njit(cache=True)
def _read_le(buf, pos, nbytes):
    v = np.int64(0)
    for k in range(nbytes):
        v |= np.int64(buf[pos + k]) << (8 * k)
    return v


@njit(cache=True)
def _write_le(out, pos, value, nbytes):
    for k in range(nbytes):
        out[pos + k] = (value >> (8 * k)) & 0xFF


@njit(cache=True)
def _wrap(value, nbytes):
    """Interpret the low nbytes of value as a signed integer."""
    if nbytes == 8:
        return value
    bits = 8 * nbytes
    value &= (np.int64(1) << bits) - 1
    if value >= (np.int64(1) << (bits - 1)):
        value -= np.int64(1) << bits
    return value


@njit(cache=True)
def _bdi_fits(page, start, base_bytes, delta_bytes):
    n = LINE // base_bytes
    base = _read_le(page, start, base_bytes)
    lo = -(np.int64(1) << (8 * delta_bytes - 1))
    hi = (np.int64(1) << (8 * delta_bytes - 1)) - 1
    for i in range(n):
        d = _wrap(_read_le(page, start + i * base_bytes, base_bytes) - base, base_bytes)
        if d < lo or d > hi:
            return False
    return True


@njit(cache=True)
def _fpc_prefix(w):
    # w is the unsigned 32-bit word
    if w == 0:
        return 0
    s = _wrap(w, 4)
    if -8 <= s < 8:
        return 1
    if -128 <= s < 128:
        return 2
    b0 = w & 0xFF
    if ((w >> 8) & 0xFF) == b0 and ((w >> 16) & 0xFF) == b0 and (w >> 24) == b0:
        return 3
    if -32768 <= s < 32768:
        return 4
    if (w & 0xFFFF) == 0:
        return 5
    lo = _wrap(w & 0xFFFF, 2)
    hi = _wrap(w >> 16, 2)
    if -128 <= lo < 128 and -128 <= hi < 128:
        return 6
    return 7


@njit(cache=True)
def _fpc_payload(w, prefix):
    if prefix == 0:
        return np.int64(0)
    if prefix == 1:
        return w & 0xF
    if prefix == 2 or prefix == 3:
        return w & 0xFF
    if prefix == 4:
        return w & 0xFFFF
    if prefix == 5:
        return w >> 16
    if prefix == 6:
        return (w & 0xFF) | (((w >> 16) & 0xFF) << 8)
    return w


@njit(cache=True)
def _fpc_unpayload(p, prefix):
    if prefix == 0:
        return np.int64(0)
    if prefix == 1:
        return _wrap(p, 1) if p < 8 else (p - 16) & 0xFFFFFFFF
    if prefix == 2:
        return _wrap(p, 1) & 0xFFFFFFFF
    if prefix == 3:
        return p | (p << 8) | (p << 16) | (p << 24)
    if prefix == 4:
        return _wrap(p, 2) & 0xFFFFFFFF
    if prefix == 5:
        return p << 16
    if prefix == 6:
        lo = _wrap(p & 0xFF, 1) & 0xFFFF
        hi = _wrap(p >> 8, 1) & 0xFFFF
        return lo | (hi << 16)
    return p


@njit(cache=True)
def _put_bits(out, bitpos, value, nbits):
    for k in range(nbits - 1, -1, -1):
        if (value >> k) & 1:
            out[bitpos >> 3] |= np.uint8(0x80 >> (bitpos & 7))
        bitpos += 1
    return bitpos


@njit(cache=True)
def _get_bits(data, bitpos, nbits):
    v = np.int64(0)
    for _ in range(nbits):
        v = (v << 1) | ((data[bitpos >> 3] >> (7 - (bitpos & 7))) & 1)
        bitpos += 1
    return v, bitpos


@njit(cache=True)
def _fpc_size(page, start):
    bits = 0
    for i in range(16):
        p = _fpc_prefix(_read_le(page, start + 4 * i, 4))
        bits += 3 + _FPC_BITS[p]
    return (bits + 7) // 8


@njit(cache=True)
def _encode_page(page):
    out = np.zeros(64 * (LINE + 1), np.uint8)
    op = 0
    for line in range(64):
        start = line * LINE
        best_tag = 0
        best_size = LINE
        for t in range(6):
            b = BDI_BASES[t]
            d = BDI_DELTAS[t]
            size = b + (LINE // b) * d
            if size < best_size and _bdi_fits(page, start, b, d):
                best_tag = 2 + t
                best_size = size
        fsize = _fpc_size(page, start)
        if fsize < best_size:
            best_tag = 1
            best_size = fsize
        out[op] = best_tag
        op += 1
        if best_tag == 0:
            out[op:op + LINE] = page[start:start + LINE]
        elif best_tag == 1:
            bitpos = op * 8
            for i in range(16):
                w = _read_le(page, start + 4 * i, 4)
                p = _fpc_prefix(w)
                bitpos = _put_bits(out, bitpos, p, 3)
                bitpos = _put_bits(out, bitpos, _fpc_payload(w, p), _FPC_BITS[p])
        else:
            b = BDI_BASES[best_tag - 2]
            d = BDI_DELTAS[best_tag - 2]
            base = _read_le(page, start, b)
            _write_le(out, op, base, b)
            for i in range(LINE // b):
                delta = _wrap(_read_le(page, start + i * b, b) - base, b)
                _write_le(out, op + b + i * d, delta, d)
        op += best_size
    return out[:op]


@njit(cache=True)
def _decode_page(data):
    page = np.zeros(64 * LINE, np.uint8)
    ip = 0
    for line in range(64):
        start = line * LINE
        tag = data[ip]
        ip += 1
        if tag == 0:
            page[start:start + LINE] = data[ip:ip + LINE]
            ip += LINE
        elif tag == 1:
            bitpos = ip * 8
            for i in range(16):
                p, bitpos = _get_bits(data, bitpos, 3)
                v, bitpos = _get_bits(data, bitpos, _FPC_BITS[p])
                _write_le(page, start + 4 * i, _fpc_unpayload(v, p), 4)
            ip = (bitpos + 7) // 8
        else:
            b = BDI_BASES[tag - 2]
            d = BDI_DELTAS[tag - 2]
            base = _read_le(data, ip, b)
            for i in range(LINE // b):
                delta = _wrap(_read_le(data, ip + b + i * d, d), d)
                _write_le(page, start + i * b, base + delta, b)
            ip += b + (LINE // b) * d
    return page


def encode(page: bytes) -> bytes:
    return _encode_page(np.frombuffer(page, np.uint8)).tobytes()


def decode(data: bytes) -> bytes:
    return _decode_page(np.frombuffer(data, np.uint8)).tobytes()
