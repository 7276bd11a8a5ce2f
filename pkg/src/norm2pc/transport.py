"""Framed, round-metered duplex channel between the two parties.

Wire format: every frame is a 4-byte little-endian payload length followed by
the payload.  Sends are buffered; ``flush_round`` delivers the buffer, and a
flush that delivers at least one frame counts as one round.  ``recv`` flushes
first, so a party never waits on the peer while holding undelivered data.
"""

from __future__ import annotations

import hashlib
import queue
import socket
import struct
import threading
import time
from collections import defaultdict
from dataclasses import dataclass, field

from .errors import TransportError

HEADER = struct.Struct("<I")
HEADER_BYTES = HEADER.size
DEFAULT_TIMEOUT = 120.0


def encode_frame(payload: bytes) -> bytes:
    return HEADER.pack(len(payload)) + payload


@dataclass
class TagStats:
    bytes_sent: int = 0
    schedule_bits: int = 0
    rounds: int = 0
    frames: int = 0

    def as_dict(self):
        return {
            "bytes_sent": self.bytes_sent,
            "schedule_bits": self.schedule_bits,
            "rounds": self.rounds,
            "frames": self.frames,
        }


@dataclass
class Metrics:
    """Monotone counters for one party.

    ``bytes_sent`` counts wire bytes including frame headers.  ``schedule_bits``
    counts protocol bits of the OT-extension message schedule: in dealer mode
    the OT layer adds what the extension would have sent while its own
    derandomisation traffic is excluded.
    """

    party: int
    total: TagStats = field(default_factory=TagStats)
    per_tag: dict = field(default_factory=lambda: defaultdict(TagStats))
    invocations: dict = field(default_factory=lambda: defaultdict(int))
    _digest: object = field(default_factory=hashlib.sha256, repr=False)

    def record_send(self, tags, nbytes: int, bits: int, frame: bytes):
        self._digest.update(frame)
        for st in self._stats(tags):
            st.bytes_sent += nbytes
            st.schedule_bits += bits
            st.frames += 1

    def record_round(self, tags):
        for st in self._stats(tags):
            st.rounds += 1

    def account(self, tags, bits: int):
        for st in self._stats(tags):
            st.schedule_bits += bits

    def count_call(self, tag: str, n: int = 1):
        self.invocations[tag] += n

    def _stats(self, tags):
        yield self.total
        for t in tags:
            yield self.per_tag[t]

    def tag(self, name: str) -> TagStats:
        return self.per_tag.get(name, TagStats())

    @property
    def transcript_sha256(self) -> str:
        return self._digest.copy().hexdigest()

    def snapshot(self) -> dict:
        return {
            "party": self.party,
            "total": self.total.as_dict(),
            "per_tag": {k: v.as_dict() for k, v in sorted(self.per_tag.items())},
            "invocations": dict(sorted(self.invocations.items())),
            "transcript_sha256": self.transcript_sha256,
        }


class Channel:
    """Byte-level link carrying whole frames; subclasses provide I/O."""

    def deliver(self, frames: list[bytes]) -> None:
        raise NotImplementedError

    def next_frame(self, timeout: float) -> bytes:
        raise NotImplementedError

    def close(self) -> None:
        pass


_CLOSED = object()


class LocalChannel(Channel):
    """One end of an in-process queue pair."""

    def __init__(self, inbox: queue.Queue, outbox: queue.Queue):
        self._inbox = inbox
        self._outbox = outbox
        self._closed = threading.Event()

    @classmethod
    def pair(cls):
        a, b = queue.Queue(), queue.Queue()
        return cls(a, b), cls(b, a)

    def deliver(self, frames):
        if self._closed.is_set():
            raise TransportError("channel closed")
        for f in frames:
            self._outbox.put(f)

    def next_frame(self, timeout):
        if self._closed.is_set():
            raise TransportError("channel closed")
        try:
            item = self._inbox.get(timeout=timeout)
        except queue.Empty:
            raise TransportError(f"no frame from peer within {timeout:.0f}s") from None
        if item is _CLOSED:
            self._closed.set()
            raise TransportError("peer closed the channel")
        (n,) = HEADER.unpack_from(item)
        if n != len(item) - HEADER_BYTES:
            raise TransportError("frame length mismatch")
        return item[HEADER_BYTES:]

    def close(self):
        if not self._closed.is_set():
            self._closed.set()
            self._outbox.put(_CLOSED)


class TcpChannel(Channel):
    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)

    @classmethod
    def listen(cls, host: str, port: int, timeout: float = DEFAULT_TIMEOUT) -> TcpChannel:
        srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            srv.bind((host, port))
            srv.listen(1)
            srv.settimeout(timeout)
            conn, _ = srv.accept()
        except OSError as exc:
            raise TransportError(f"listen on {host}:{port} failed: {exc}") from exc
        finally:
            srv.close()
        return cls(conn)

    @classmethod
    def connect(cls, host: str, port: int, timeout: float = DEFAULT_TIMEOUT) -> TcpChannel:
        deadline = time.monotonic() + timeout
        while True:
            try:
                return cls(socket.create_connection((host, port), timeout=timeout))
            except OSError as exc:
                if time.monotonic() > deadline:
                    raise TransportError(f"connect to {host}:{port} failed: {exc}") from exc
                time.sleep(0.05)

    def deliver(self, frames):
        try:
            self.sock.sendall(b"".join(frames))
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from exc

    def _read_exact(self, n: int) -> bytes:
        buf = bytearray()
        while len(buf) < n:
            try:
                chunk = self.sock.recv(min(n - len(buf), 1 << 20))
            except OSError as exc:
                raise TransportError(f"recv failed: {exc}") from exc
            if not chunk:
                raise TransportError("peer closed the connection")
            buf += chunk
        return bytes(buf)

    def next_frame(self, timeout):
        self.sock.settimeout(timeout)
        (n,) = HEADER.unpack(self._read_exact(HEADER_BYTES))
        return self._read_exact(n)

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass


class Transport:
    """Buffers outgoing frames per round and meters bytes/rounds per tag."""

    def __init__(self, channel: Channel, party: int, timeout: float = DEFAULT_TIMEOUT):
        self.channel = channel
        self.metrics = Metrics(party)
        self.timeout = timeout
        self._buffer: list[bytes] = []
        self._buffer_tags: set = set()
        self._closed = False

    def send(self, payload: bytes, tags=(), bits: int | None = None):
        if self._closed:
            raise TransportError("channel closed")
        frame = encode_frame(bytes(payload))
        self._buffer.append(frame)
        self._buffer_tags.update(tags)
        self.metrics.record_send(tags, len(frame), 8 * len(payload) if bits is None else bits, frame)

    @property
    def pending(self) -> int:
        return len(self._buffer)

    def flush_round(self):
        if not self._buffer:
            return
        frames, tags = self._buffer, self._buffer_tags
        self._buffer, self._buffer_tags = [], set()
        self.metrics.record_round(tags)
        self.channel.deliver(frames)

    def recv(self) -> bytes:
        if self._closed:
            raise TransportError("channel closed")
        self.flush_round()
        return self.channel.next_frame(self.timeout)

    def close(self):
        self._closed = True
        self.channel.close()
