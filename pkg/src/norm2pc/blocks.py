"""Secure building blocks on shared ring vectors.

MSB and the multiplexers work elementwise on length-n shares and batch all n
elements into the same OT calls.  ``max``/``min`` reduce a vector with a
balanced tournament, one MSB + multiplexer layer per level.
"""

from __future__ import annotations

import builtins

import numpy as np

from .errors import UsageError
from .millionaire import millionaire
from .ot import OtBatch, OtKind
from .packing import pack_uint, unpack_uint
from .ring import ArithShare, BitShare, dtype_for, random_ring

MULT_METHODS = ("binary", "nary", "beaver")


def _check_pair(session, *shares):
    bits = shares[0].bits
    n = len(shares[0])
    for s in shares:
        if s.party != session.party:
            raise UsageError(f"share of party {s.party} used by party {session.party}")
        if s.bits != bits:
            raise UsageError(f"bit-width mismatch: {s.bits} vs {bits}")
        if len(s) != n:
            raise UsageError(f"length mismatch: {len(s)} vs {n}")
    return bits, n


def msb(session, x: ArithShare) -> BitShare:
    """Shares of the top bit of x.

    With x_b = m_b 2^(l-1) + x'_b, msb(x) = m_0 ^ m_1 ^ carry, where the
    carry [x'_0 + x'_1 >= 2^(l-1)] is one comparison between
    2^(l-1) - 1 - x'_0 (P0) and x'_1 (P1).
    """
    bits, n = _check_pair(session, x)
    top = dtype_for(bits)(bits - 1)
    low = x.value & dtype_for(bits)((1 << (bits - 1)) - 1)
    m_b = (x.value >> top).astype(np.uint8)
    with session.scope("msb", n):
        own = (np.uint64((1 << (bits - 1)) - 1) - low.astype(np.uint64)) if session.party == 0 else low
        carry = millionaire(session, own.astype(np.uint64), bits - 1)
    return BitShare(session.party, m_b ^ carry.bit)


def _cross_cot(session, s: BitShare, x: ArithShare):
    """Both COTs of a multiplexer: party b sends delta_b = x_b (1 - 2 s_b),
    the peer chooses with s_{1-b}.  Returns (own sender output r, received y)."""
    bits, n = x.bits, len(x)
    me = session.party
    delta = x.value * (1 - 2 * s.bit.astype(x.value.dtype))
    batches = []
    for snd in (0, 1):
        if snd == me:
            batches.append(OtBatch(OtKind.COT, snd, n, bits, deltas=delta))
        else:
            batches.append(OtBatch(OtKind.COT, snd, n, bits, choices=s.bit))
    res = session.ot(batches)
    dt = x.value.dtype
    return res[me].astype(dt), res[1 - me].astype(dt)


def base_mux(session, s: BitShare, x: ArithShare) -> ArithShare:
    """Shares of s * x for a shared bit s."""
    _check_pair(session, x)
    if len(s) != len(x):
        raise UsageError("selector and value lengths differ")
    with session.scope("base_mux", len(x)):
        r, y = _cross_cot(session, s, x)
    w = x.value * s.bit.astype(x.value.dtype) - r
    return ArithShare(session.party, x.bits, w + y)


def abs_mux(session, s: BitShare, x: ArithShare) -> ArithShare:
    """Shares of (1 - 2s) * x, i.e. x when s = 0 and -x when s = 1."""
    _check_pair(session, x)
    if len(s) != len(x):
        raise UsageError("selector and value lengths differ")
    with session.scope("abs_mux", len(x)):
        r, y = _cross_cot(session, s, x)
    one = x.value.dtype.type(1)
    two = x.value.dtype.type(2)
    w = x.value * (one - two * s.bit.astype(x.value.dtype)) + two * r
    return ArithShare(session.party, x.bits, w - two * y)


def gen_mux(session, s: BitShare, a: ArithShare, a_alt: ArithShare) -> ArithShare:
    """Shares of a if s = 1 else a_alt."""
    _check_pair(session, a, a_alt)
    with session.scope("gen_mux", len(a)):
        return a_alt + base_mux(session, s, a - a_alt)


def abs(session, x: ArithShare) -> ArithShare:  # noqa: A001 - protocol name
    """Shares of |x| under the two's-complement reading of the ring."""
    with session.scope("abs", len(x)):
        return abs_mux(session, msb(session, x), x)


def _tournament(session, x: ArithShare, pick_larger: bool, tag: str, dim: int | None) -> ArithShare:
    _check_pair(session, x)
    n = len(x)
    dim = n if dim is None else dim
    if dim < 1 or n == 0 or n % dim:
        raise UsageError(f"{tag}: length {n} is not a positive multiple of group size {dim}")
    groups = n // dim
    cur = x.value.reshape(groups, dim).copy()
    with session.scope(tag, groups):
        while cur.shape[1] > 1:
            k = cur.shape[1] // 2
            left, right = cur[:, 0 : 2 * k : 2], cur[:, 1 : 2 * k : 2]
            d = ArithShare(session.party, x.bits, (left - right).reshape(-1))
            s = msb(session, d)
            if pick_larger:
                s = s.flip()
            best = (base_mux(session, s, d).value.reshape(groups, k)) + right
            cur = np.concatenate([best, cur[:, 2 * k :]], axis=1)
    return ArithShare(session.party, x.bits, cur.reshape(-1))


def max(session, x: ArithShare, dim: int | None = None) -> ArithShare:  # noqa: A001 - protocol name
    """Shares of the signed maximum of x, or of each consecutive group of ``dim``.

    Pairwise differences must stay below 2^(l-1) in magnitude.  A balanced
    tournament takes ceil(log2 dim) levels of MSB + multiplexer; an odd entry
    out at a level advances unchanged.
    """
    return _tournament(session, x, True, "max", dim)


def min(session, x: ArithShare, dim: int | None = None) -> ArithShare:  # noqa: A001 - protocol name
    """Shares of the signed minimum; same preconditions and depth as :func:`max`."""
    return _tournament(session, x, False, "min", dim)


def max_sequential(session, x: ArithShare) -> ArithShare:
    """Linear-scan maximum: n - 1 dependent comparisons (baseline for depth tests)."""
    _check_pair(session, x)
    with session.scope("max_sequential", 1):
        best = x[0]
        for i in builtins.range(1, len(x)):
            d = best - x[i]
            s = msb(session, d).flip()
            best = base_mux(session, s, d) + x[i]
    return best


# --- multiplication -------------------------------------------------------


def _bit_cross_batches(session, x: ArithShare, y: ArithShare):
    """COT batches for x_0 y_1 and x_1 y_0: for bit j of the chooser's share,
    a COT of width l - j with delta equal to the sender's share."""
    bits, n = x.bits, len(x)
    me = session.party
    j = np.arange(bits)
    widths = np.tile(bits - j, n)  # element-major: (element, bit j)
    batches = []
    for snd in (0, 1):
        if snd == me:
            deltas = np.repeat(x.value.astype(np.uint64), bits)
            batches.append(OtBatch(OtKind.COT, snd, n * bits, widths, deltas=deltas))
        else:
            yb = ((y.value.astype(np.uint64)[:, None] >> j.astype(np.uint64)[None, :]) & np.uint64(1)).ravel()
            batches.append(OtBatch(OtKind.COT, snd, n * bits, widths, choices=yb.astype(np.uint8)))
    return batches


def _fold_bits(vals, bits: int, n: int, dt):
    v = np.asarray(vals, dtype=np.uint64).reshape(n, bits).astype(dt)
    w = (dt(1) << np.arange(bits, dtype=dt))[None, :]
    return (v * w).sum(axis=1, dtype=dt)


def _nary_cross_batches(session, x: ArithShare, y: ArithShare, radix: int = 4):
    bits, n = x.bits, len(x)
    if bits % radix:
        raise UsageError(f"n-ary multiplication needs l divisible by {radix}")
    me = session.party
    digits = bits // radix
    nn = 1 << radix
    batches, own = [], None
    k = np.arange(digits)
    for snd in (0, 1):
        if snd == me:
            r = session.rng.integers(0, 2**64, size=(n, digits), dtype=np.uint64, endpoint=False)
            i = np.arange(nn, dtype=np.uint64)
            msgs = r[:, :, None] + i[None, None, :] * x.value.astype(np.uint64)[:, None, None]
            width = bits  # truncation is applied below through the per-digit shift
            batches.append(OtBatch(OtKind.OT1OFN, snd, n * digits, width, n=nn, messages=msgs.reshape(-1, nn)))
            own = r
        else:
            d = (y.value.astype(np.uint64)[:, None] >> (radix * k).astype(np.uint64)[None, :]) & np.uint64(nn - 1)
            batches.append(OtBatch(OtKind.OT1OFN, snd, n * digits, bits, n=nn, choices=d.ravel().astype(np.int64)))
    return batches, own


def _local_product(x: ArithShare, y: ArithShare):
    return x.value * y.value


def mult(session, x: ArithShare, y: ArithShare, method: str = "binary") -> ArithShare:
    """Elementwise product of two shared vectors."""
    bits, n = _check_pair(session, x, y)
    if method not in MULT_METHODS:
        raise UsageError(f"unknown multiplication method {method!r}; choose from {MULT_METHODS}")
    dt = x.value.dtype.type
    me = session.party
    with session.scope("mult", n):
        if method == "beaver":
            return _mult_beaver(session, x, y)
        if method == "binary":
            res = session.ot(_bit_cross_batches(session, x, y))
            sent = _fold_bits(res[me], bits, n, dt)
            got = _fold_bits(res[1 - me], bits, n, dt)
        else:
            batches, r = _nary_cross_batches(session, x, y)
            res = session.ot(batches)
            digits = bits // 4
            shift = (np.arange(digits, dtype=np.uint64) * np.uint64(4))[None, :]
            sent = (r << shift).astype(dt).sum(axis=1, dtype=dt)
            got_d = np.asarray(res[1 - me], dtype=np.uint64).reshape(n, digits)
            got = (got_d << shift).astype(dt).sum(axis=1, dtype=dt)
        z = _local_product(x, y) - sent + got
    return ArithShare(me, bits, z)


def beaver_triples(session, n: int, bits: int):
    """n arithmetic triples (a, b, c = ab), c produced by the bit-COT product."""
    rng = session.rng
    a = ArithShare(session.party, bits, random_ring(rng, n, bits))
    b = ArithShare(session.party, bits, random_ring(rng, n, bits))
    with session.scope("beaver_offline", n):
        c = mult(session, a, b, method="binary")
    return a, b, c


def _mult_beaver(session, x: ArithShare, y: ArithShare) -> ArithShare:
    bits, n = x.bits, len(x)
    a, b, c = beaver_triples(session, n, bits)
    e_own, f_own = x.value - a.value, y.value - b.value
    peer = session.exchange(pack_uint(np.concatenate([e_own, f_own]), bits))
    pv = unpack_uint(peer, 2 * n, bits).astype(x.value.dtype)
    e = e_own + pv[:n]
    f = f_own + pv[n:]
    z = f * x.value + e * y.value + c.value
    if session.party == 1:
        z = z - e * f
    return ArithShare(session.party, bits, z)


def mult_vec(session, x: ArithShare, y: ArithShare, method: str = "binary") -> ArithShare:
    return mult(session, x, y, method)


def square_vec(session, x: ArithShare, method: str = "binary") -> ArithShare:
    """Elementwise x^2 through the general product (same cost as mult)."""
    return mult(session, x, x, method)
