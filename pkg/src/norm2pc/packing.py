"""Dense bit packing for wire payloads.

Bits are little-endian within a byte; k-bit integers are laid out LSB first
and concatenated without padding, so a batch of m values costs ceil(m*k/8)
bytes.
"""

from __future__ import annotations

import numpy as np

from .errors import ProtocolError


def packed_len(count: int, width: int = 1) -> int:
    return (count * width + 7) // 8


def pack_bits(bits) -> bytes:
    """Pack a 0/1 array, 8 per byte."""
    return np.packbits(np.asarray(bits, dtype=np.uint8) & 1, bitorder="little").tobytes()


def unpack_bits(data: bytes, count: int) -> np.ndarray:
    if len(data) != packed_len(count):
        raise ProtocolError(f"expected {packed_len(count)} bytes for {count} bits, got {len(data)}")
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8), count=count, bitorder="little")


def pack_uint(values, width: int) -> bytes:
    """Pack unsigned integers of ``width`` bits (1..64) each."""
    v = np.ascontiguousarray(np.asarray(values).astype("<u8"))
    if width % 8 == 0:
        return v.view(np.uint8).reshape(-1, 8)[:, : width // 8].tobytes()
    bits = np.unpackbits(v.view(np.uint8).reshape(-1, 8), axis=1, bitorder="little")
    return np.packbits(bits[:, :width].ravel(), bitorder="little").tobytes()


def unpack_uint(data: bytes, count: int, width: int) -> np.ndarray:
    if len(data) != packed_len(count, width):
        raise ProtocolError(
            f"expected {packed_len(count, width)} bytes for {count}x{width} bits, got {len(data)}"
        )
    raw = np.frombuffer(data, dtype=np.uint8)
    out = np.zeros((count, 8), dtype=np.uint8)
    if width % 8 == 0:
        out[:, : width // 8] = raw.reshape(count, width // 8)
    else:
        bits = np.unpackbits(raw, count=count * width, bitorder="little").reshape(count, width)
        full = np.zeros((count, 64), dtype=np.uint8)
        full[:, :width] = bits
        out = np.packbits(full, axis=1, bitorder="little")
    return out.view("<u8").reshape(count).astype(np.uint64)


def pack_grouped(values: np.ndarray, widths: np.ndarray) -> bytes:
    """Pack values with per-element widths, grouped by ascending width."""
    parts = []
    for w in np.unique(widths):
        parts.append(pack_uint(values[widths == w], int(w)))
    return b"".join(parts)


def grouped_len(widths: np.ndarray) -> int:
    ws, counts = np.unique(widths, return_counts=True)
    return sum(packed_len(int(c), int(w)) for w, c in zip(ws, counts))


def unpack_grouped(data: bytes, widths: np.ndarray) -> np.ndarray:
    out = np.zeros(widths.shape[0], dtype=np.uint64)
    pos = 0
    for w in np.unique(widths):
        sel = widths == w
        n = int(sel.sum())
        size = packed_len(n, int(w))
        out[sel] = unpack_uint(data[pos : pos + size], n, int(w))
        pos += size
    if pos != len(data):
        raise ProtocolError(f"trailing bytes in grouped payload ({len(data) - pos})")
    return out


class Reader:
    """Sequential cursor over a received payload."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ProtocolError(
                f"payload too short: wanted {n} bytes at offset {self.pos}, have {len(self.data)}"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def done(self):
        if self.pos != len(self.data):
            raise ProtocolError(f"{len(self.data) - self.pos} unexpected trailing bytes")
