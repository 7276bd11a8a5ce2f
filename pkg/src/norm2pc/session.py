"""Per-party protocol context: transport, OT backend, randomness, metering scopes."""

from __future__ import annotations

import threading
from contextlib import contextmanager

import numpy as np

from .errors import TransportError, UsageError
from .ring import DEFAULT_BITS, check_bits
from .transport import LocalChannel, Transport

DEFAULT_RADIX = 4


class Session:
    """Everything one party needs to run a protocol.

    ``seed`` makes the party-local randomness reproducible (tests, verify);
    leave it ``None`` for OS entropy.  ``m_radix`` is the Millionaires' chunk
    width.
    """

    def __init__(
        self,
        party: int,
        transport: Transport,
        backend,
        seed: int | None = None,
        m_radix: int = DEFAULT_RADIX,
        lam: int = 128,
        bits: int = DEFAULT_BITS,
    ):
        if party not in (0, 1):
            raise UsageError(f"party must be 0 or 1, got {party}")
        if not 1 <= m_radix <= 8:
            raise UsageError(f"radix m must be in 1..8, got {m_radix}")
        self.party = party
        self.transport = transport
        self.backend = backend
        self.m_radix = m_radix
        self.lam = lam
        self.bits = check_bits(bits)
        self.seed = seed
        self.rng = np.random.default_rng(None if seed is None else [seed, party, 0x5E55])
        self._tags: list[str] = []

    @property
    def metrics(self):
        return self.transport.metrics

    @property
    def tags(self) -> tuple:
        return tuple(self._tags)

    @contextmanager
    def scope(self, tag: str, count: int = 1):
        """Attribute traffic inside the block to ``tag`` (scopes nest)."""
        self.metrics.count_call(tag, count)
        self._tags.append(tag)
        try:
            yield self
        finally:
            self._tags.pop()

    @contextmanager
    def detached(self, tag: str):
        """Like :meth:`scope`, but outside every enclosing scope (setup traffic)."""
        saved, self._tags = self._tags, [tag]
        self.metrics.count_call(tag)
        try:
            yield self
        finally:
            self._tags = saved

    def send(self, payload: bytes, bits: int | None = None):
        self.transport.send(payload, tags=self._tags, bits=bits)

    def flush(self):
        self.transport.flush_round()

    def recv(self) -> bytes:
        return self.transport.recv()

    def account(self, bits: int):
        self.metrics.account(self._tags, bits)

    def exchange(self, payload: bytes, bits: int | None = None) -> bytes:
        """Simultaneous send/receive: one round."""
        self.send(payload, bits=bits)
        self.flush()
        return self.recv()

    def ot(self, batches):
        return self.backend.execute(self, batches)

    def close(self):
        self.transport.close()


def local_sessions(backend="dealer", seed: int | None = 0, timeout: float = 120.0, **kw):
    """Two connected in-process sessions sharing nothing but a queue pair."""
    from .ot import make_backend

    c0, c1 = LocalChannel.pair()
    out = []
    for p, ch in ((0, c0), (1, c1)):
        be = make_backend(backend, seed=seed, party=p) if isinstance(backend, str) else backend[p]
        out.append(Session(p, Transport(ch, p, timeout), be, seed=seed, **kw))
    return out


def run_pair(program, sessions, inputs=(None, None)):
    """Run ``program(session, input)`` for both parties on two threads.

    Returns both results.  If either side raises, its channel is closed so the
    peer fails fast, and the most informative exception is re-raised.
    """
    results: list = [None, None]
    errors: list = [None, None]

    def body(p):
        try:
            results[p] = program(sessions[p], inputs[p])
            sessions[p].flush()
        except BaseException as exc:  # noqa: BLE001 - propagated below
            errors[p] = exc
            sessions[p].close()

    threads = [threading.Thread(target=body, args=(p,), daemon=True) for p in (0, 1)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if any(errors):
        # a peer-closed TransportError is usually a symptom of the other error
        primary = [e for e in errors if e is not None and not isinstance(e, TransportError)]
        raise (primary or [e for e in errors if e is not None])[0]
    return results


def run_local(program, inputs=(None, None), backend="dealer", seed: int | None = 0, **kw):
    """Convenience: fresh local sessions + :func:`run_pair`; returns (r0, r1, sessions)."""
    sessions = local_sessions(backend, seed=seed, **kw)
    try:
        r0, r1 = run_pair(program, sessions, inputs)
    finally:
        for s in sessions:
            s.close()
    return r0, r1, sessions
