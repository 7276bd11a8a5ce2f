"""OT extension backend: IKNP for 2-choice OTs, KK-style for 1-of-N.

The extension receiver expands its base-OT seed pairs into column matrices
T0, T1 and sends u_i = T0_i ^ T1_i ^ C(choice)_i per column, where C is the
repetition code (2-choice, lambda columns) or the 256-bit Walsh-Hadamard code
(1-of-N, 2*lambda columns).  The extension sender recovers q_j = t_j ^ (C(c_j)
& s) and hashes q_j ^ (C(i) & s) into the pad for message i.  Semi-honest
security only: there is no consistency check on u.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

from ..errors import UsageError
from ..packing import (
    grouped_len,
    pack_grouped,
    pack_uint,
    packed_len,
    unpack_grouped,
    unpack_uint,
)
from .baseot import FAMILIES, BaseOtSetup, family_width
from .core import LAMBDA, OtBackend, OtKind, width_mask

# Walsh-Hadamard code: word c has bit i = parity(c & i), 256 bits long
_WH = np.array(
    [[bin(c & i).count("1") & 1 for i in range(256)] for c in range(256)], dtype=np.uint8
)


def walsh_hadamard(c: int) -> np.ndarray:
    return _WH[c].copy()


def prg_bits(seed: bytes, counter: int, nbits: int) -> np.ndarray:
    raw = hashlib.shake_128(seed + counter.to_bytes(8, "little")).digest((nbits + 7) // 8)
    return np.unpackbits(np.frombuffer(raw, dtype=np.uint8), count=nbits, bitorder="little")


def hash_rows(rows: np.ndarray, index: np.ndarray, tweak: bytes) -> np.ndarray:
    """Correlation-robust hash of each packed row, tweaked by its OT index."""
    r = rows.shape[0]
    idx = np.ascontiguousarray(index.astype("<u8")).view(np.uint8).reshape(r, 8)
    data = np.concatenate([rows, idx], axis=1).tobytes()
    w = rows.shape[1] + 8
    digest = b"".join(
        hashlib.blake2b(data[i * w : (i + 1) * w], digest_size=8, person=tweak).digest()
        for i in range(r)
    )
    return np.frombuffer(digest, dtype="<u8").astype(np.uint64)


class IknpBackend(OtBackend):
    mode = "iknp"

    def __init__(
        self,
        setup: BaseOtSetup | None = None,
        provider=None,
        lam: int = LAMBDA,
        corrupt_cot: int | None = None,
    ):
        super().__init__(lam=lam, corrupt_cot=corrupt_cot)
        if lam % 8:
            raise UsageError("lambda must be a multiple of 8")
        self.base = setup
        self.provider = provider
        self.counters = {(f, s): 0 for f in FAMILIES for s in (0, 1)}

    def setup(self, session):
        if self.base is None:
            if self.provider is None:
                raise UsageError("IKNP backend needs base-OT material: a setup file or a provider")
            self.base = self.provider.run(session)
        if self.base.party != session.party:
            raise UsageError(f"base-OT setup belongs to party {self.base.party}")
        if self.base.lam != self.lam:
            raise UsageError(f"base-OT setup has lambda={self.base.lam}, backend wants {self.lam}")

    @staticmethod
    def _family(batch):
        return "kk" if batch.kind is OtKind.OT1OFN else "iknp"

    def prepare(self, session, batch):
        key = (self._family(batch), batch.sender)
        ctr = self.counters[key]
        self.counters[key] += 1
        tweak = b"n2pc" + struct.pack("<BBQ", FAMILIES.index(key[0]), key[1], ctr)
        return key, ctr, tweak

    def receiver_len(self, batch):
        return family_width(self._family(batch), self.lam) * packed_len(batch.count)

    def sender_len(self, batch):
        if batch.kind is OtKind.ROT:
            return 0
        if batch.kind is OtKind.COT:
            return grouped_len(batch.widths)
        return packed_len(batch.count * batch.n, batch.width)

    def _code_columns(self, batch, choices) -> np.ndarray:
        """(lambda', m) matrix whose column j is the code word of choice j."""
        c = np.asarray(choices, dtype=np.int64)
        if batch.kind is OtKind.OT1OFN:
            return _WH[c].T
        return np.broadcast_to(c.astype(np.uint8), (self.lam, c.shape[0]))

    def receiver_msg(self, session, batch, prep):
        key, ctr, tweak = prep
        pairs = self.base.get(*key).seeds
        k, m = pairs.shape[0], batch.count
        t0 = np.stack([prg_bits(pairs[i, 0].tobytes(), ctr, m) for i in range(k)])
        t1 = np.stack([prg_bits(pairs[i, 1].tobytes(), ctr, m) for i in range(k)])
        u = t0 ^ t1 ^ self._code_columns(batch, batch.choices)
        t_rows = np.packbits(t0.T, axis=1, bitorder="little")
        pad = hash_rows(t_rows, np.arange(m), tweak) & width_mask(batch.widths)
        return np.packbits(u, axis=1, bitorder="little").tobytes(), pad

    def sender_msg(self, session, batch, prep, peer):
        key, ctr, tweak = prep
        st = self.base.get(*key)
        k, m = st.count, batch.count
        u = np.unpackbits(
            np.frombuffer(peer, dtype=np.uint8).reshape(k, packed_len(m)),
            axis=1,
            count=m,
            bitorder="little",
        )
        q = np.stack([prg_bits(st.seeds[i].tobytes(), ctr, m) for i in range(k)])
        q ^= u * st.choices[:, None]
        q_rows = np.packbits(q.T, axis=1, bitorder="little")
        s_code = _WH[: batch.n] if batch.kind is OtKind.OT1OFN else np.array(
            [np.zeros(k, np.uint8), np.ones(k, np.uint8)]
        )
        masked = np.packbits(s_code[:, :k] & st.choices[None, :], axis=1, bitorder="little")
        idx = np.arange(m)
        mk = width_mask(batch.widths)
        pads = np.stack(
            [hash_rows(q_rows ^ masked[i][None, :], idx, tweak) & mk for i in range(batch.n)],
            axis=1,
        )
        if batch.kind is OtKind.ROT:
            return b"", pads
        if batch.kind is OtKind.COT:
            s = pads[:, 0]
            delta = np.asarray(batch.deltas).astype(np.uint64) & mk
            m1 = (s + delta) if batch.correlation == "add" else (delta - s)
            return pack_grouped((m1 - pads[:, 1]) & mk, batch.widths), s
        msgs = np.asarray(batch.messages).astype(np.uint64) & mk[:, None]
        return pack_uint((msgs ^ pads).ravel(), batch.width), None

    def receiver_finish(self, session, batch, prep, state, reply):
        pad = state
        m = batch.count
        if batch.kind is OtKind.ROT:
            return pad
        b = np.asarray(batch.choices, dtype=np.int64)
        if batch.kind is OtKind.COT:
            d = unpack_grouped(reply, batch.widths)
            return (pad + b.astype(np.uint64) * d) & width_mask(batch.widths)
        y = unpack_uint(reply, m * batch.n, batch.width).reshape(m, batch.n)
        return y[np.arange(m), b] ^ pad
