"""Arithmetic over Z_{2^l} and additive / XOR secret sharing.

Share values are stored as 1-d numpy arrays of the unsigned dtype matching the
ring width, so ring arithmetic wraps for free.  Scalars are length-1 arrays;
numpy scalar arithmetic warns on overflow, arrays do not.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UsageError

SUPPORTED_BITS = (8, 16, 32, 64)
DEFAULT_BITS = 32

_DTYPES = {8: np.uint8, 16: np.uint16, 32: np.uint32, 64: np.uint64}


def check_bits(bits: int) -> int:
    if bits not in _DTYPES:
        raise UsageError(f"ring width must be one of {SUPPORTED_BITS}, got {bits}")
    return bits


def dtype_for(bits: int):
    return _DTYPES[check_bits(bits)]


def mask(bits: int) -> int:
    return (1 << bits) - 1


def as_ring(values, bits: int) -> np.ndarray:
    """Reduce python ints (possibly negative or huge) into a 1-d ring array."""
    dt = dtype_for(bits)
    if isinstance(values, np.ndarray) and values.dtype.kind in "ui":
        # C casts between integer dtypes truncate, which is reduction mod 2^bits
        return np.atleast_1d(values).astype(dt, copy=True)
    if isinstance(values, np.integer):
        values = int(values)
    arr = np.atleast_1d(np.asarray(values, dtype=object))
    m = mask(bits)
    return np.array([int(v) & m for v in arr.ravel()], dtype=dt).reshape(arr.shape)


def to_signed(x, bits: int | None = None):
    """Two's-complement view: v if v < 2^(l-1) else v - 2^l.

    Accepts a RingValue, an int (``bits`` required) or a ring array.
    """
    if isinstance(x, RingValue):
        return x.signed
    if bits is None:
        raise UsageError("bits is required unless a RingValue is given")
    if isinstance(x, np.ndarray):
        return x.astype(dtype_for(bits)).view(np.dtype(f"int{bits}")).astype(np.int64)
    v = int(x) & mask(bits)
    return v - (1 << bits) if v >> (bits - 1) else v


def random_ring(rng: np.random.Generator, size: int, bits: int) -> np.ndarray:
    dt = dtype_for(bits)
    return rng.integers(0, np.iinfo(dt).max, size=size, dtype=dt, endpoint=True)


@dataclass(frozen=True)
class RingValue:
    """A single element of Z_{2^bits}; the value is reduced on construction."""

    bits: int
    value: int

    def __post_init__(self):
        check_bits(self.bits)
        object.__setattr__(self, "value", int(self.value) & mask(self.bits))

    @property
    def signed(self) -> int:
        return to_signed(self.value, self.bits)

    def __int__(self):
        return self.value


@dataclass
class ArithShare:
    """One party's additive share of a length-n vector over Z_{2^bits}.

    This doubles as the ShareVec type: a scalar share is simply ``n == 1``.
    """

    party: int
    bits: int
    value: np.ndarray

    def __post_init__(self):
        if self.party not in (0, 1):
            raise UsageError(f"party must be 0 or 1, got {self.party}")
        self.value = as_ring(self.value, self.bits)
        if self.value.ndim != 1:
            self.value = self.value.ravel()

    def __len__(self):
        return self.value.shape[0]

    def _like(self, value) -> ArithShare:
        return ArithShare(self.party, self.bits, value)

    def _check(self, other: ArithShare):
        if other.bits != self.bits:
            raise UsageError(f"bit-width mismatch: {self.bits} vs {other.bits}")
        if other.party != self.party:
            raise UsageError("cannot combine shares held by different parties")

    def __add__(self, other):
        if isinstance(other, ArithShare):
            self._check(other)
            return self._like(self.value + other.value)
        return self.add_public(other)

    def __sub__(self, other):
        if isinstance(other, ArithShare):
            self._check(other)
            return self._like(self.value - other.value)
        return self.add_public(-np.asarray(other, dtype=object))

    def __neg__(self):
        return self._like(np.zeros_like(self.value) - self.value)

    def __mul__(self, c):
        """Multiply by a public constant (scalar or per-element)."""
        return self._like(self.value * as_ring(c, self.bits))

    __rmul__ = __mul__

    def add_public(self, c) -> ArithShare:
        """Add a public constant; only party 0 folds it into its share."""
        if self.party == 1:
            return self._like(self.value.copy())
        return self._like(self.value + as_ring(c, self.bits))

    def __getitem__(self, idx):
        return self._like(np.atleast_1d(self.value[idx]))

    def sum(self) -> ArithShare:
        return self._like(np.array([self.value.sum(dtype=self.value.dtype)]))

    @classmethod
    def concat(cls, shares: list[ArithShare]) -> ArithShare:
        first = shares[0]
        for s in shares[1:]:
            first._check(s)
        return cls(first.party, first.bits, np.concatenate([s.value for s in shares]))

    @classmethod
    def zeros(cls, party: int, bits: int, n: int) -> ArithShare:
        return cls(party, bits, np.zeros(n, dtype=dtype_for(bits)))


ShareVec = ArithShare


@dataclass
class BitShare:
    """One party's XOR share of a vector of bits."""

    party: int
    bit: np.ndarray

    def __post_init__(self):
        self.bit = np.atleast_1d(np.asarray(self.bit, dtype=np.uint8)) & 1

    def __len__(self):
        return self.bit.shape[0]

    def __xor__(self, other):
        if isinstance(other, BitShare):
            return BitShare(self.party, self.bit ^ other.bit)
        return self.xor_public(other)

    def xor_public(self, c) -> BitShare:
        """XOR a public bit; party 1 applies it (the fixed complementing party)."""
        if self.party == 0:
            return BitShare(0, self.bit.copy())
        return BitShare(1, self.bit ^ (np.asarray(c, dtype=np.uint8) & 1))

    def flip(self) -> BitShare:
        return self.xor_public(1)

    def __getitem__(self, idx):
        return BitShare(self.party, np.atleast_1d(self.bit[idx]))

    def lift(self, bits: int) -> np.ndarray:
        """Arithmetic embedding of the share bit: LSB set, higher bits zero."""
        return self.bit.astype(dtype_for(bits))

    @classmethod
    def concat(cls, shares: list[BitShare]) -> BitShare:
        return cls(shares[0].party, np.concatenate([s.bit for s in shares]))


def share(x, bits: int = DEFAULT_BITS, rng: np.random.Generator | None = None, r=None):
    """Split ``x`` (int, RingValue or array) into two additive shares.

    Share 0 is ``r`` (uniform from ``rng`` unless given); share 1 is ``x - r``.
    """
    if isinstance(x, RingValue):
        bits, x = x.bits, x.value
    xv = as_ring(x, bits)
    if r is None:
        if rng is None:
            raise UsageError("share() needs either rng or explicit r")
        r0 = random_ring(rng, xv.shape[0], bits)
    else:
        r0 = as_ring(np.broadcast_to(np.asarray(r, dtype=object), xv.shape), bits)
    return ArithShare(0, bits, r0), ArithShare(1, bits, xv - r0)


def reconstruct(s0: ArithShare, s1: ArithShare) -> np.ndarray:
    if s0.bits != s1.bits:
        raise UsageError(f"bit-width mismatch: {s0.bits} vs {s1.bits}")
    if s0.party == s1.party:
        raise UsageError("reconstruct needs one share from each party")
    if len(s0) != len(s1):
        raise UsageError("share length mismatch")
    return s0.value + s1.value


def reconstruct_value(s0: ArithShare, s1: ArithShare) -> RingValue:
    """Reconstruct a scalar share pair into a RingValue."""
    out = reconstruct(s0, s1)
    if out.shape[0] != 1:
        raise UsageError("reconstruct_value expects scalar shares")
    return RingValue(s0.bits, int(out[0]))


def share_bits(b, rng: np.random.Generator):
    b = np.atleast_1d(np.asarray(b, dtype=np.uint8)) & 1
    r = rng.integers(0, 2, size=b.shape[0], dtype=np.uint8)
    return BitShare(0, r), BitShare(1, b ^ r)


def reconstruct_bits(b0: BitShare, b1: BitShare) -> np.ndarray:
    if b0.party == b1.party:
        raise UsageError("reconstruct needs one share from each party")
    return b0.bit ^ b1.bit
