"""Millionaires' comparison: XOR shares of [x < y] for x held by P0, y by P1.

Inputs are split into m-bit chunks, most significant first (the top chunk
takes the remainder, so it may be narrower).  Each chunk is compared with one
1-of-2^w OT from P0 to P1 whose 2-bit message carries shares of both the
less-than and the equality bit; the least significant chunk only needs
less-than.  A binary tree then merges adjacent chunks:

    lt = lt_hi ^ (eq_hi & lt_lo)        eq = eq_hi & eq_lo

one AND layer per tree level, with AND gates evaluated from bit triples that
are generated in the same OT batch as the leaves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ProtocolError, UsageError
from .ot import OtBatch, OtKind
from .packing import pack_bits, packed_len, unpack_bits
from .ring import BitShare


@dataclass(frozen=True)
class ChunkPlan:
    bits: int
    m: int

    def __post_init__(self):
        if self.bits < 1:
            raise UsageError("comparison width must be >= 1")
        if self.m < 1:
            raise UsageError("radix m must be >= 1")

    @property
    def q(self) -> int:
        return -(-self.bits // self.m)

    @property
    def widths(self) -> list[int]:
        """Chunk widths, most significant first."""
        q = self.q
        return [self.bits - self.m * (q - 1)] + [self.m] * (q - 1)

    def split(self, x: np.ndarray) -> np.ndarray:
        """(n, q) array of chunk values for the integers in ``x``."""
        x = np.asarray(x, dtype=np.uint64)
        out = np.empty((x.shape[0], self.q), dtype=np.int64)
        shift = self.bits
        for j, w in enumerate(self.widths):
            shift -= w
            out[:, j] = ((x >> np.uint64(shift)) & np.uint64((1 << w) - 1)).astype(np.int64)
        return out


def tree_levels(q: int) -> list[list[tuple[int, int]]]:
    """Pairings per level as (hi, lo) node indices of that level; odd tail passes."""
    levels = []
    while q > 1:
        levels.append([(2 * i, 2 * i + 1) for i in range(q // 2)])
        q = q // 2 + q % 2
    return levels


def and_count(q: int) -> int:
    """AND gates per comparison: one for lt per merge, one for eq unless the
    merge touches the least significant chunk."""
    total = 0
    rightmost = [False] * (q - 1) + [True]
    for pairs in tree_levels(q):
        nxt = []
        for hi, lo in pairs:
            total += 1 if rightmost[lo] else 2
            nxt.append(rightmost[lo])
        if len(rightmost) % 2:
            nxt.append(rightmost[-1])
        rightmost = nxt
    return total


# --- bit triples -------------------------------------------------------------


@dataclass
class BitTriples:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    pos: int = 0

    @property
    def remaining(self) -> int:
        return self.a.shape[0] - self.pos

    def extend(self, more: BitTriples):
        self.a, self.b, self.c = (
            np.concatenate([old[self.pos :], new[more.pos :]])
            for old, new in ((self.a, more.a), (self.b, more.b), (self.c, more.c))
        )
        self.pos = 0

    def take(self, k: int):
        if k > self.remaining:
            raise UsageError(f"bit-triple pool exhausted ({self.remaining} left, {k} needed)")
        s = slice(self.pos, self.pos + k)
        self.pos += k
        return self.a[s], self.b[s], self.c[s]


def triple_batch(session, count: int):
    """OT batch producing ``count`` bit triples, two per 1-of-16 OT, plus a finisher.

    P1's choice index packs its (a, b, a', b'); P0's table entry i is
    (c0 ^ (a0^i0)(b0^i1)) | (c0' ^ (a0'^i2)(b0'^i3)) << 1.
    """
    k = -(-count // 2)
    rng = session.rng
    if session.party == 0:
        a, b, c = (rng.integers(0, 2, size=(k, 2), dtype=np.uint8) for _ in range(3))
        i = np.arange(16)
        bit = [(i >> t) & 1 for t in range(4)]
        msg = np.zeros((k, 16), dtype=np.uint64)
        for t in range(2):
            prod = (a[:, t, None] ^ bit[2 * t][None, :]) & (b[:, t, None] ^ bit[2 * t + 1][None, :])
            msg |= ((c[:, t, None] ^ prod).astype(np.uint64)) << np.uint64(t)
        batch = OtBatch(OtKind.OT1OFN, 0, k, 2, n=16, messages=msg)

        def finish(_):
            return BitTriples(*(v.ravel()[:count].copy() for v in (a, b, c)))

    else:
        sel = rng.integers(0, 16, size=k, dtype=np.int64)
        batch = OtBatch(OtKind.OT1OFN, 0, k, 2, n=16, choices=sel)

        def finish(res):
            a = np.stack([sel & 1, (sel >> 2) & 1], axis=1).astype(np.uint8)
            b = np.stack([(sel >> 1) & 1, (sel >> 3) & 1], axis=1).astype(np.uint8)
            r = np.asarray(res, dtype=np.uint64)
            c = np.stack([r & 1, (r >> 1) & 1], axis=1).astype(np.uint8)
            return BitTriples(*(v.ravel()[:count].copy() for v in (a, b, c)))

    return batch, finish


def generate_bit_triples(session, count: int) -> BitTriples:
    batch, finish = triple_batch(session, count)
    with session.scope("triples"):
        (res,) = session.ot([batch])
    return finish(res)


def and_gate(session, x: BitShare, y: BitShare, triples: BitTriples | None = None) -> BitShare:
    """Bitwise AND of two shared vectors; one simultaneous round.

    A missing or short triple pool is topped up first (one extra OT batch),
    so callers that pre-size the pool never pay for it.
    """
    n = len(x)
    if len(y) != n:
        raise UsageError("AND operands differ in length")
    if triples is None:
        triples = generate_bit_triples(session, n)
    elif triples.remaining < n:
        triples.extend(generate_bit_triples(session, n - triples.remaining))
    a, b, c = triples.take(n)
    d, e = x.bit ^ a, y.bit ^ b
    peer = session.exchange(pack_bits(d) + pack_bits(e), bits=2 * n)
    k = packed_len(n)
    if len(peer) != 2 * k:
        raise ProtocolError("AND opening has the wrong size")
    dd = d ^ unpack_bits(peer[:k], n)
    ee = e ^ unpack_bits(peer[k:], n)
    z = c ^ (dd & b) ^ (ee & a)
    if session.party == 0:
        z ^= dd & ee
    return BitShare(session.party, z)


# --- comparison -----------------------------------------------------------


def _leaf_batches(session, plan: ChunkPlan, chunks: np.ndarray | None, choice: np.ndarray | None, n: int):
    """One OT batch per leaf group: top, middle (2-bit) and least-significant (1-bit)."""
    q, widths = plan.q, plan.widths
    rng = session.rng
    groups = []  # (chunk indices, N, bits)
    if q == 1:
        groups.append(([0], 1 << widths[0], 1))
    else:
        groups.append(([0], 1 << widths[0], 2))
        if q > 2:
            groups.append((list(range(1, q - 1)), 1 << plan.m, 2))
        groups.append(([q - 1], 1 << plan.m, 1))
    batches, own = [], []
    for idx, nn, bits in groups:
        cnt = n * len(idx)
        if session.party == 0:
            xs = chunks[:, idx].T.reshape(-1)  # chunk-major
            msg, lt0, eq0 = _leaf_table(xs, nn, bits == 2, rng)
            batches.append(OtBatch(OtKind.OT1OFN, 0, cnt, bits, n=nn, messages=msg))
            own.append((lt0, eq0))
        else:
            ys = choice[:, idx].T.reshape(-1)
            batches.append(OtBatch(OtKind.OT1OFN, 0, cnt, bits, n=nn, choices=ys))
            own.append(None)
    return groups, batches, own


def _leaf_table(xs: np.ndarray, nn: int, with_eq: bool, rng):
    """P0's 1-of-nn table: bit 0 = lt0 ^ [x < i], bit 1 = eq0 ^ [x == i]."""
    cnt = xs.shape[0]
    lt0 = rng.integers(0, 2, size=cnt, dtype=np.uint8)
    eq0 = rng.integers(0, 2, size=cnt, dtype=np.uint8) if with_eq else np.zeros(cnt, np.uint8)
    i = np.arange(nn)[None, :]
    msg = ((xs[:, None] < i).astype(np.uint8) ^ lt0[:, None]).astype(np.uint64)
    if with_eq:
        eq = (xs[:, None] == i).astype(np.uint8) ^ eq0[:, None]
        msg |= eq.astype(np.uint64) << np.uint64(1)
    return msg, lt0, eq0


def leaf_compare(session, chunk, width: int, with_eq: bool = True) -> tuple[BitShare, BitShare]:
    """Shares of [x_j < y_j] and [x_j == y_j] for ``width``-bit chunks.

    One 1-of-2^width OT from P0 (holding x_j) to P1 (holding y_j) carries both
    bits; with ``with_eq=False`` the message is 1 bit and eq is all-zero shares.
    """
    c = np.atleast_1d(np.asarray(chunk, dtype=np.int64))
    if c.min(initial=0) < 0 or c.max(initial=0) >= 1 << width:
        raise UsageError(f"chunk value outside [0, 2^{width})")
    nn, nbits = 1 << width, 2 if with_eq else 1
    p = session.party
    if p == 0:
        msg, lt0, eq0 = _leaf_table(c, nn, with_eq, session.rng)
        session.ot([OtBatch(OtKind.OT1OFN, 0, c.shape[0], nbits, n=nn, messages=msg)])
        return BitShare(0, lt0), BitShare(0, eq0)
    (r,) = session.ot([OtBatch(OtKind.OT1OFN, 0, c.shape[0], nbits, n=nn, choices=c)])
    r = np.asarray(r, dtype=np.uint64)
    return BitShare(1, r & np.uint64(1)), BitShare(1, (r >> np.uint64(1)) & np.uint64(1))


def combine_tree(session, lt: list[BitShare], eq: list[BitShare], triples: BitTriples | None = None) -> BitShare:
    """Merge per-chunk (lt, eq) shares, most significant first, into the root lt.

    The least significant chunk's eq is never used and may be None.
    """
    if len(lt) != len(eq) or not lt:
        raise UsageError("need matching, non-empty lt/eq lists")
    return _combine(session, [s.bit for s in lt], [None if e is None else e.bit for e in eq], triples)


def millionaire(session, value, bits: int, m: int | None = None) -> BitShare:
    """XOR shares of [x < y] where P0 inputs x and P1 inputs y, both ``bits`` wide."""
    m = session.m_radix if m is None else m
    plan = ChunkPlan(bits, m)
    v = np.atleast_1d(np.asarray(value)).astype(np.uint64)
    if bits < 64 and np.any(v >> np.uint64(bits)):
        raise UsageError(f"comparison input exceeds {bits} bits")
    n = v.shape[0]
    q = plan.q
    chunks = plan.split(v)
    with session.scope("mill", n):
        groups, batches, own = _leaf_batches(
            session, plan, chunks if session.party == 0 else None, chunks if session.party == 1 else None, n
        )
        n_and = and_count(q) * n
        if n_and:
            tb, tfinish = triple_batch(session, n_and)
            batches.append(tb)
        res = session.ot(batches)
        triples = tfinish(res[-1]) if n_and else None

        lt = np.zeros((q, n), dtype=np.uint8)
        eq = np.zeros((q, n), dtype=np.uint8)
        for g, ((idx, _, nbits), r) in enumerate(zip(groups, res)):
            if session.party == 0:
                l0, e0 = own[g]
                lt[idx] = l0.reshape(len(idx), n)
                eq[idx] = e0.reshape(len(idx), n)
            else:
                r = np.asarray(r, dtype=np.uint64).reshape(len(idx), n)
                lt[idx] = (r & np.uint64(1)).astype(np.uint8)
                eq[idx] = ((r >> np.uint64(1)) & np.uint64(1)).astype(np.uint8)
        return _combine(session, list(lt), list(eq), triples)


def _combine(session, lt: list, eq: list, triples) -> BitShare:
    rightmost = [False] * (len(lt) - 1) + [True]
    p = session.party
    while len(lt) > 1:
        pairs = [(2 * i, 2 * i + 1) for i in range(len(lt) // 2)]
        xs, ys = [], []
        for hi, lo in pairs:
            xs.append(eq[hi])
            ys.append(lt[lo])
            if not rightmost[lo]:
                xs.append(eq[hi])
                ys.append(eq[lo])
        z = and_gate(session, BitShare(p, np.concatenate(xs)), BitShare(p, np.concatenate(ys)), triples).bit
        n = lt[0].shape[0]
        nlt, neq, nright = [], [], []
        pos = 0
        for hi, lo in pairs:
            nlt.append(lt[hi] ^ z[pos : pos + n])
            pos += n
            if rightmost[lo]:
                neq.append(None)
            else:
                neq.append(z[pos : pos + n])
                pos += n
            nright.append(rightmost[lo])
        if len(lt) % 2:
            nlt.append(lt[-1])
            neq.append(eq[-1])
            nright.append(rightmost[-1])
        lt, eq, rightmost = nlt, neq, nright
    return BitShare(p, lt[0])


mill_lt = millionaire
