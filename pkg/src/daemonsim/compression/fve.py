"""Frequent-value encoding over 64-bit words.

The 32 most frequent words of the page (ties: first occurrence) form a
256-byte dictionary that is sent ahead of the bitstream, zero-padded when the
page has fewer distinct words. Each of the 512 words is then one flag bit
followed by a 5-bit dictionary index (hit) or the 64-bit word (miss), packed
MSB-first.
"""
import numpy as np
from numba import njit

DICT_ENTRIES = 32
DICT_BYTES = DICT_ENTRIES * 8
WORDS = 512


def train_dictionary(words: np.ndarray) -> np.ndarray:
    values, first, counts = np.unique(words, return_index=True, return_counts=True)
    order = np.lexsort((first, -counts))[:DICT_ENTRIES]
    table = np.zeros(DICT_ENTRIES, np.uint64)
    table[:len(order)] = values[order]
    return table


@njit(cache=True)
def _pack(page_bytes, index, nbytes):
    out = np.zeros(nbytes, np.uint8)
    bitpos = 0
    for w in range(WORDS):
        idx = index[w]
        if idx >= 0:
            out[bitpos >> 3] |= np.uint8(0x80 >> (bitpos & 7))
            bitpos += 1
            for k in range(4, -1, -1):
                if (idx >> k) & 1:
                    out[bitpos >> 3] |= np.uint8(0x80 >> (bitpos & 7))
                bitpos += 1
        else:
            bitpos += 1
            for b in range(8):
                byte = page_bytes[w * 8 + b]
                for k in range(7, -1, -1):
                    if (byte >> k) & 1:
                        out[bitpos >> 3] |= np.uint8(0x80 >> (bitpos & 7))
                    bitpos += 1
    return out


@njit(cache=True)
def _unpack(table_bytes, bits):
    page = np.zeros(WORDS * 8, np.uint8)
    bitpos = 0
    for w in range(WORDS):
        flag = (bits[bitpos >> 3] >> (7 - (bitpos & 7))) & 1
        bitpos += 1
        if flag:
            idx = 0
            for _ in range(5):
                idx = (idx << 1) | ((bits[bitpos >> 3] >> (7 - (bitpos & 7))) & 1)
                bitpos += 1
            page[w * 8:w * 8 + 8] = table_bytes[idx * 8:idx * 8 + 8]
        else:
            for b in range(8):
                byte = 0
                for _ in range(8):
                    byte = (byte << 1) | ((bits[bitpos >> 3] >> (7 - (bitpos & 7))) & 1)
                    bitpos += 1
                page[w * 8 + b] = byte
    return page


def encoded_size(page: bytes) -> int:
    words = np.frombuffer(page, "<u8")
    hits = int(np.isin(words, train_dictionary(words)).sum())
    bits = hits * 6 + (WORDS - hits) * 65
    return DICT_BYTES + (bits + 7) // 8


def encode(page: bytes) -> bytes:
    raw = np.frombuffer(page, np.uint8)
    words = raw.view("<u8")
    table = train_dictionary(words)
    # index of first matching dictionary slot, -1 on miss
    eq = words[:, None] == table[None, :]
    hit = eq.any(axis=1)
    index = np.where(hit, eq.argmax(axis=1), -1).astype(np.int64)
    nhits = int(hit.sum())
    bits = nhits * 6 + (WORDS - nhits) * 65
    packed = _pack(raw, index, (bits + 7) // 8)
    return table.astype("<u8").tobytes() + packed.tobytes()


def decode(data: bytes) -> bytes:
    table = np.frombuffer(data[:DICT_BYTES], np.uint8)
    bits = np.frombuffer(data[DICT_BYTES:], np.uint8)
    return _unpack(table, bits).tobytes()
