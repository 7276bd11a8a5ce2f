"""OT batch descriptions and the two-flow execution skeleton shared by backends.

Every call to :func:`execute` runs a list of OT batches, in either direction,
in at most two message flows per party:

* flow A: each party sends its receiver-side messages (choice corrections or
  extension matrices) for all batches where it receives;
* flow B: each party answers the peer's flow A with sender-side messages.

Both parties pass structurally identical batch lists; each fills in only the
inputs of its own role.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..errors import ProtocolError, UsageError
from ..packing import Reader

LAMBDA = 128


class OtKind(str, Enum):
    OT = "ot"
    COT = "cot"
    ROT = "rot"
    OT1OFN = "ot1ofn"


def width_mask(widths: np.ndarray) -> np.ndarray:
    w = np.asarray(widths, dtype=np.uint64)
    full = w >= 64
    out = (np.uint64(1) << np.where(full, np.uint64(0), w)) - np.uint64(1)
    out[full] = np.uint64(0xFFFFFFFFFFFFFFFF)
    return out


@dataclass
class OtBatch:
    """m OT instances of one kind, with ``sender`` naming the sending party.

    ``bits`` is the payload width k; COT batches may give a per-instance
    width array.  COT correlation is ``add`` (second message s + delta) or
    ``sub`` (delta - s).  Local inputs: ``messages`` (sender, shape (m, N)),
    ``deltas`` (COT sender), ``choices`` (receiver).
    """

    kind: OtKind
    sender: int
    count: int
    bits: int | np.ndarray
    n: int = 2
    correlation: str = "add"
    messages: np.ndarray | None = None
    deltas: np.ndarray | None = None
    choices: np.ndarray | None = None

    def __post_init__(self):
        self.kind = OtKind(self.kind)
        if self.count < 1:
            raise UsageError("OT batch count must be >= 1")
        if self.sender not in (0, 1):
            raise UsageError("sender must be party 0 or 1")
        if self.kind is not OtKind.OT1OFN and self.n != 2:
            raise UsageError(f"{self.kind.value} is 1-of-2")
        if self.n < 2 or self.n & (self.n - 1):
            raise UsageError(f"N must be a power of two >= 2, got {self.n}")
        if self.n > 256:
            raise UsageError("N > 256 is not supported by the 256-bit code")
        if self.correlation not in ("add", "sub"):
            raise UsageError(f"unknown correlation {self.correlation!r}")
        w = np.broadcast_to(np.asarray(self.bits, dtype=np.int64), (self.count,))
        if self.kind is not OtKind.COT and np.unique(w).size != 1:
            raise UsageError("only COT batches accept per-instance widths")
        if w.min() < 1 or w.max() > 64:
            raise UsageError("payload width must be in 1..64")
        self.widths = np.ascontiguousarray(w)
        self.width = int(w[0])

    @property
    def receiver(self) -> int:
        return 1 - self.sender

    @property
    def choice_bits(self) -> int:
        return (self.n - 1).bit_length()

    def descriptor(self) -> bytes:
        return b"|".join(
            [
                self.kind.value.encode(),
                bytes([self.sender, self.choice_bits]),
                self.count.to_bytes(8, "little"),
                hashlib.sha256(self.widths.astype("<i8").tobytes()).digest()[:8],
                self.correlation.encode(),
            ]
        )

    def check_inputs(self, party: int):
        m = self.count
        if party == self.receiver:
            if self.choices is None or np.shape(self.choices) != (m,):
                raise UsageError(f"receiver needs {m} choices")
            c = np.asarray(self.choices)
            if c.min() < 0 or c.max() >= self.n:
                raise UsageError(f"choice out of range [0, {self.n})")
        elif self.kind is OtKind.COT:
            if self.deltas is None or np.shape(self.deltas) != (m,):
                raise UsageError(f"COT sender needs {m} deltas")
        elif self.kind in (OtKind.OT, OtKind.OT1OFN):
            if self.messages is None or np.shape(self.messages) != (m, self.n):
                raise UsageError(f"sender needs messages of shape {(m, self.n)}")


def schedule_bits(batch: OtBatch, role: str, lam: int = LAMBDA) -> int:
    """Bits the extension schedule sends for ``batch`` from ``role``'s side.

    Receiver: one lambda-bit matrix row per OT (2*lambda for 1-of-N, whose
    code words are 2*lambda bits).  Sender: k bits per COT, 2k per OT, N*k per
    1-of-N OT, nothing for ROT.
    """
    m = batch.count
    if role == "receiver":
        return m * (2 * lam if batch.kind is OtKind.OT1OFN else lam)
    if batch.kind is OtKind.COT:
        return int(batch.widths.sum())
    if batch.kind is OtKind.OT:
        return 2 * m * batch.width
    if batch.kind is OtKind.OT1OFN:
        return m * batch.n * batch.width
    return 0


def _digest(batches) -> bytes:
    h = hashlib.sha256()
    for b in batches:
        h.update(b.descriptor())
    return h.digest()[:4]


class OtBackend:
    """Template for OT backends; subclasses implement the per-batch hooks."""

    mode = "abstract"
    test_grade = False
    emulated = False  # schedule bits are accounted, not read off the wire

    def __init__(self, lam: int = LAMBDA, corrupt_cot: int | None = None):
        self.lam = lam
        # fault injection: flip the low bit of every byte of the k-th COT reply
        self.corrupt_cot = corrupt_cot
        self._cot_seen = 0

    # hooks ------------------------------------------------------------
    def prepare(self, session, batch: OtBatch) -> object:
        """Per-batch state consumed identically by both parties."""
        return None

    def receiver_len(self, batch: OtBatch) -> int:
        raise NotImplementedError

    def receiver_msg(self, session, batch, prep) -> tuple[bytes, object]:
        raise NotImplementedError

    def sender_len(self, batch: OtBatch) -> int:
        raise NotImplementedError

    def sender_msg(self, session, batch, prep, peer: bytes) -> tuple[bytes, object]:
        raise NotImplementedError

    def receiver_finish(self, session, batch, prep, state, reply: bytes):
        raise NotImplementedError

    def setup(self, session) -> None:
        """One-time setup (base OTs); excluded from protocol figures."""

    # driver -----------------------------------------------------------
    def execute(self, session, batches: list[OtBatch]) -> list:
        me = session.party
        self.setup(session)
        for b in batches:
            b.check_inputs(me)
        preps = [self.prepare(session, b) for b in batches]
        dig = _digest(batches)

        def flow_a_from(p):
            return [i for i, b in enumerate(batches) if b.receiver == p and self.receiver_len(b)]

        def flow_b_from(p):
            return [i for i, b in enumerate(batches) if b.sender == p and self.sender_len(b)]

        results: list = [None] * len(batches)
        states: dict = {}

        # flow A
        mine_a = flow_a_from(me)
        if mine_a:
            parts = []
            for i in mine_a:
                payload, states[i] = self.receiver_msg(session, batches[i], preps[i])
                parts.append(payload)
            self._emit(session, dig + b"".join(parts), [batches[i] for i in mine_a], "receiver")
        for i, b in enumerate(batches):
            if b.receiver == me and i not in states:
                _, states[i] = self.receiver_msg(session, b, preps[i])

        # flow B
        peer_a = flow_a_from(1 - me)
        incoming: dict = {}
        if peer_a:
            rd = Reader(session.recv())
            if rd.take(4) != dig:
                raise ProtocolError("peer OT batch parameters disagree with ours")
            for i in peer_a:
                incoming[i] = rd.take(self.receiver_len(batches[i]))
            rd.done()
        mine_b = flow_b_from(me)
        parts = []
        for i, b in enumerate(batches):
            if b.sender != me:
                continue
            payload, results[i] = self.sender_msg(session, b, preps[i], incoming.get(i, b""))
            if b.kind is OtKind.COT:
                payload = self._maybe_corrupt(payload)
            if i in mine_b:
                parts.append(payload)
        if mine_b:
            self._emit(session, b"".join(parts), [batches[i] for i in mine_b], "sender")

        # receivers finish
        peer_b = flow_b_from(1 - me)
        replies: dict = {}
        if peer_b:
            rd = Reader(session.recv())
            for i in peer_b:
                replies[i] = rd.take(self.sender_len(batches[i]))
            rd.done()
        for i, b in enumerate(batches):
            if b.receiver == me:
                results[i] = self.receiver_finish(
                    session, b, preps[i], states[i], replies.get(i, b"")
                )
        return results

    def _emit(self, session, payload: bytes, batches, role):
        bits = sum(schedule_bits(b, role, self.lam) for b in batches)
        if self.emulated:
            session.send(payload, bits=0)
            session.account(bits)
        else:
            session.send(payload, bits=bits)
        session.flush()

    def _maybe_corrupt(self, payload: bytes) -> bytes:
        k = self._cot_seen
        self._cot_seen += 1
        if self.corrupt_cot is None or k != self.corrupt_cot or not payload:
            return payload
        return bytes(b ^ 1 for b in payload)
