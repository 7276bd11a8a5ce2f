"""Oblivious transfer: batch descriptions, backends and convenience wrappers."""

from __future__ import annotations


from ..errors import UsageError
from .baseot import BaseOtSetup, DiffieHellmanBaseOt
from .core import LAMBDA, OtBackend, OtBatch, OtKind, schedule_bits
from .dealer import DealerBackend
from .iknp import IknpBackend

BACKENDS = ("dealer", "iknp")


def make_backend(name: str, seed: int | None = 0, party: int = 0, setup=None, **kw) -> OtBackend:
    """Build a backend by name.

    Without ``setup`` the IKNP backend samples base-OT material from ``seed``
    shared by both parties, a local trusted setup suitable for tests only.
    """
    if name == "dealer":
        return DealerBackend(seed=seed, **kw)
    if name == "iknp":
        if setup is None:
            setup = BaseOtSetup.generate_pair(seed)[party]
        return IknpBackend(setup=setup, **kw)
    raise UsageError(f"unknown OT backend {name!r}; choose from {BACKENDS}")


def execute(session, batches: list[OtBatch]) -> list:
    return session.backend.execute(session, batches)


def _one(session, batch):
    return execute(session, [batch])[0]


def cot(session, sender: int, count: int, bits, deltas=None, choices=None, correlation="add"):
    """Correlated OT: the sender gets s, the receiver gets s + b*delta (or delta - s)."""
    return _one(
        session,
        OtBatch(OtKind.COT, sender, count, bits, deltas=deltas, choices=choices, correlation=correlation),
    )


def ot_1of2(session, sender: int, count: int, bits: int, messages=None, choices=None):
    return _one(session, OtBatch(OtKind.OT, sender, count, bits, messages=messages, choices=choices))


def ot_1ofN(session, sender: int, count: int, bits: int, n: int, messages=None, choices=None):
    return _one(
        session, OtBatch(OtKind.OT1OFN, sender, count, bits, n=n, messages=messages, choices=choices)
    )


def rot(session, sender: int, count: int, bits: int, choices=None):
    """Random OT: the sender gets (count, 2) random pads, the receiver pads[b]."""
    return _one(session, OtBatch(OtKind.ROT, sender, count, bits, choices=choices))


__all__ = [
    "BACKENDS",
    "LAMBDA",
    "BaseOtSetup",
    "DealerBackend",
    "DiffieHellmanBaseOt",
    "IknpBackend",
    "OtBackend",
    "OtBatch",
    "OtKind",
    "cot",
    "execute",
    "make_backend",
    "ot_1of2",
    "ot_1ofN",
    "rot",
    "schedule_bits",
]

