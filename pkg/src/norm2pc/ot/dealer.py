"""Trusted-dealer OT backend (test grade).

Both parties derive the dealer's random OTs from a shared seed and
derandomise them with one correction message each way.  Privacy rests on the
seed being hidden from both, which a shared seed does not give you: use this
backend for tests, benches and cost emulation only.

Metering: the corrections go on the wire and are counted as bytes, while
schedule bits are charged at what OT extension would send for the batch.
"""

from __future__ import annotations

import numpy as np

from ..packing import (
    grouped_len,
    pack_bits,
    pack_uint,
    packed_len,
    pack_grouped,
    unpack_bits,
    unpack_grouped,
    unpack_uint,
)
from .core import LAMBDA, OtBackend, OtKind, width_mask

_U64 = np.uint64


class DealerBackend(OtBackend):
    mode = "dealer"
    test_grade = True
    emulated = True

    def __init__(self, seed: int | None = 0, lam: int = LAMBDA, corrupt_cot: int | None = None):
        super().__init__(lam=lam, corrupt_cot=corrupt_cot)
        self.common = np.random.default_rng([0 if seed is None else seed, 0xDEA1])

    # both parties draw the same correlated randomness for every batch
    def prepare(self, session, batch):
        m, n = batch.count, batch.n
        c = self.common.integers(0, n, size=m, dtype=np.int64)
        r = self.common.integers(0, 2**64, size=(m, n), dtype=np.uint64, endpoint=False)
        r &= width_mask(batch.widths)[:, None]
        return c, r

    def receiver_len(self, batch):
        return packed_len(batch.count, batch.choice_bits)

    def receiver_msg(self, session, batch, prep):
        c, _ = prep
        e = (np.asarray(batch.choices, dtype=np.int64) - c) % batch.n
        return pack_uint(e, batch.choice_bits), None

    def sender_len(self, batch):
        if batch.kind is OtKind.ROT:
            return 0
        if batch.kind is OtKind.COT:
            return grouped_len(batch.widths)
        return packed_len(batch.count * batch.n, batch.width)

    def sender_msg(self, session, batch, prep, peer):
        _, r = prep
        m, n = batch.count, batch.n
        e = unpack_uint(peer, m, batch.choice_bits).astype(np.int64)
        rows = np.arange(m)
        if batch.kind is OtKind.ROT:
            # permute so that pair[b] equals the receiver's R_c with c = b ^ e
            pairs = np.stack([r[rows, e], r[rows, e ^ 1]], axis=1)
            return b"", pairs
        if batch.kind is OtKind.COT:
            mk = width_mask(batch.widths)
            s = r[rows, e]
            delta = np.asarray(batch.deltas).astype(np.uint64) & mk
            m1 = (s + delta) if batch.correlation == "add" else (delta - s)
            d = (m1 - r[rows, e ^ 1]) & mk
            return pack_grouped(d, batch.widths), s
        # plain OT and 1-of-N: y_i = M_i ^ R_{(i - e) mod N}
        idx = (np.arange(n)[None, :] - e[:, None]) % n
        msgs = np.asarray(batch.messages).astype(np.uint64) & width_mask(batch.widths)[:, None]
        y = msgs ^ r[rows[:, None], idx]
        return pack_uint(y.ravel(), batch.width), None

    def receiver_finish(self, session, batch, prep, state, reply):
        c, r = prep
        m = batch.count
        rc = r[np.arange(m), c]
        b = np.asarray(batch.choices, dtype=np.int64)
        if batch.kind is OtKind.ROT:
            return rc
        if batch.kind is OtKind.COT:
            d = unpack_grouped(reply, batch.widths)
            return (rc + b.astype(np.uint64) * d) & width_mask(batch.widths)
        y = unpack_uint(reply, m * batch.n, batch.width).reshape(m, batch.n)
        return y[np.arange(m), b] ^ rc
