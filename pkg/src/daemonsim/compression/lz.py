"""Block LZ77 page codec.

Token format (frozen; golden sizes in the tests depend on it):

* The 4096-byte page is split into four independent 1024-byte blocks.
* The payload starts with one mode byte; bit ``b`` set means block ``b`` is
  stored raw (1024 bytes). Otherwise the block is an LZ stream.
* An LZ stream is a sequence of groups: one control byte followed by up to
  eight tokens. Control bit ``i`` (LSB first) selects the i-th token type:
  0 = literal (1 byte), 1 = match (2 bytes: ``offset - 1``, ``length - 3``).
* Offsets are 1..256 and never reach before the block start. Lengths are
  3..258 and may overlap the bytes being produced.
* Matching is greedy longest-match; on equal length the nearest offset wins.
* A block whose stream would exceed 1024 bytes is stored raw.
"""
import numpy as np
from numba import njit

BLOCK = 1024
WINDOW = 256
MIN_MATCH = 3
MAX_MATCH = 258
_HASH_BITS = 12
_HASH_MASK = (1 << _HASH_BITS) - 1


@njit(cache=True)
def _hash3(buf, i):
    return ((np.int32(buf[i]) << 7) ^ (np.int32(buf[i + 1]) << 3) ^ np.int32(buf[i + 2])) & _HASH_MASK


@njit(cache=True)
def _encode_block(page, start, out, op):
    """Encode page[start:start+BLOCK] into out at op. Returns new op or -1 if it does not fit."""
    head = np.full(1 << _HASH_BITS, -1, np.int32)
    prev = np.full(BLOCK, -1, np.int32)
    limit = op + BLOCK
    i = 0
    ctrl_pos = -1
    nbits = 8
    while i < BLOCK:
        if nbits == 8:
            if op >= limit:
                return -1
            ctrl_pos = op
            out[op] = 0
            op += 1
            nbits = 0
        best_len = 0
        best_off = 0
        if i + MIN_MATCH <= BLOCK:
            maxlen = BLOCK - i
            if maxlen > MAX_MATCH:
                maxlen = MAX_MATCH
            cand = head[_hash3(page, start + i)]
            while cand >= 0 and i - cand <= WINDOW:
                n = 0
                while n < maxlen and page[start + cand + n] == page[start + i + n]:
                    n += 1
                if n > best_len:
                    best_len = n
                    best_off = i - cand
                    if n == maxlen:
                        break
                cand = prev[cand]
        if best_len >= MIN_MATCH:
            if op + 2 > limit:
                return -1
            out[ctrl_pos] |= np.uint8(1 << nbits)
            out[op] = best_off - 1
            out[op + 1] = best_len - MIN_MATCH
            op += 2
            step = best_len
        else:
            if op + 1 > limit:
                return -1
            out[op] = page[start + i]
            op += 1
            step = 1
        for j in range(i, i + step):
            if j + MIN_MATCH <= BLOCK:
                h = _hash3(page, start + j)
                prev[j] = head[h]
                head[h] = j
        i += step
        nbits += 1
    return op


@njit(cache=True)
def _encode_page(page):
    out = np.zeros(1 + 4 * BLOCK, np.uint8)
    mode = 0
    op = 1
    for b in range(4):
        start = b * BLOCK
        end = _encode_block(page, start, out, op)
        if end < 0:
            mode |= 1 << b
            out[op:op + BLOCK] = page[start:start + BLOCK]
            op += BLOCK
        else:
            op = end
    out[0] = mode
    return out[:op]


@njit(cache=True)
def _decode_page(data):
    page = np.zeros(4 * BLOCK, np.uint8)
    mode = data[0]
    ip = 1
    for b in range(4):
        base = b * BLOCK
        if (mode >> b) & 1:
            page[base:base + BLOCK] = data[ip:ip + BLOCK]
            ip += BLOCK
            continue
        o = 0
        while o < BLOCK:
            ctrl = data[ip]
            ip += 1
            for k in range(8):
                if o >= BLOCK:
                    break
                if (ctrl >> k) & 1:
                    off = np.int64(data[ip]) + 1
                    length = np.int64(data[ip + 1]) + MIN_MATCH
                    ip += 2
                    for n in range(length):
                        page[base + o + n] = page[base + o + n - off]
                    o += length
                else:
                    page[base + o] = data[ip]
                    ip += 1
                    o += 1
    return page


def encode(page: bytes) -> bytes:
    return _encode_page(np.frombuffer(page, np.uint8)).tobytes()


def decode(data: bytes) -> bytes:
    return _decode_page(np.frombuffer(data, np.uint8)).tobytes()
