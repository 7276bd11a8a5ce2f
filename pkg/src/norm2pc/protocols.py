"""Registry of runnable protocols on two private integer vectors.

P0 holds vector a, P1 holds vector b (same length n = groups * dim).  Each
entry shares both inputs, runs one protocol, and defines a plaintext oracle:

========  =====================================  =========================
name      secure result                          input range (signed)
========  =====================================  =========================
mill      [a_i < b_i] (unsigned l-bit)           [0, 2^l)
msb       top bit of a_i - b_i                   full ring
base_mux  s_i * (a_i - b_i)                      full ring
abs_mux   (1 - 2 s_i) (a_i - b_i)                full ring
gen_mux   a_i if s_i else b_i                    full ring
abs       |a_i - b_i|                            full ring
max/min   max/min over each group of a - b      |a_i|, |b_i| < 2^(l-3)
mult      a_i * b_i                              full ring
l1        sum |a - b| per group                  full ring
l2sq      sum (a - b)^2 per group                full ring
linf      max |a - b| per group                  |a_i|, |b_i| < 2^(l-2)
adder     -sum |a - b| per group                 full ring
========  =====================================  =========================

with s_i = lsb(a_i) ^ lsb(b_i).  All arithmetic results are mod 2^l.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import blocks, norms
from .errors import UsageError
from .millionaire import millionaire
from .ring import BitShare, as_ring


@dataclass(frozen=True)
class Protocol:
    name: str
    run: Callable  # (session, a_share, b_share, own_raw, dim) -> share
    oracle: Callable  # (a, b, bits, dim) -> object array
    headroom: int  # inputs drawn with |v| < 2^(l - headroom); 0 = full ring
    output: str = "arith"
    unsigned: bool = False
    grouped: bool = False
    tag: str = ""


def _mod(v, bits):
    return np.array([int(t) % (1 << bits) for t in np.ravel(v)], dtype=object)


def _signed(v, bits):
    m = 1 << bits
    u = np.array([int(t) % m for t in np.ravel(v)], dtype=object)
    return np.array([t - m if t >= m // 2 else t for t in u], dtype=object)


def _sel(a, b):
    return (np.asarray(a, dtype=object) % 2) ^ (np.asarray(b, dtype=object) % 2)


def _own_lsb(session, raw) -> BitShare:
    return BitShare(session.party, np.asarray(raw, dtype=object).astype(np.int64) & 1)


def _groups(v, dim):
    return np.asarray(v, dtype=object).reshape(-1, dim)


def _r_mill(s, a, b, raw, dim):
    bits = a.bits
    own = as_ring(np.asarray(raw, dtype=object), bits).astype(np.uint64)
    return millionaire(s, own, bits)


def _r_unary(fn):
    return lambda s, a, b, raw, dim: fn(s, a - b)


def _r_mux(fn):
    return lambda s, a, b, raw, dim: fn(s, _own_lsb(s, raw), a - b)


PROTOCOLS: dict[str, Protocol] = {}


def _reg(p: Protocol):
    PROTOCOLS[p.name] = p


_reg(Protocol("mill", _r_mill, lambda a, b, l, d: (np.asarray(a, object) % (1 << l) < np.asarray(b, object) % (1 << l)).astype(int), 0, "bit", unsigned=True))
_reg(Protocol("msb", _r_unary(blocks.msb), lambda a, b, l, d: np.array([int(t) >> (l - 1) for t in _mod(np.asarray(a, object) - np.asarray(b, object), l)]), 0, "bit"))
_reg(Protocol("base_mux", _r_mux(blocks.base_mux), lambda a, b, l, d: _mod(_sel(a, b) * (np.asarray(a, object) - np.asarray(b, object)), l), 0))
_reg(Protocol("abs_mux", _r_mux(blocks.abs_mux), lambda a, b, l, d: _mod((1 - 2 * _sel(a, b)) * (np.asarray(a, object) - np.asarray(b, object)), l), 0))
_reg(Protocol("gen_mux", lambda s, a, b, raw, dim: blocks.gen_mux(s, _own_lsb(s, raw), a, b), lambda a, b, l, d: _mod(np.where(_sel(a, b) == 1, np.asarray(a, object), np.asarray(b, object)), l), 0))
_reg(Protocol("abs", _r_unary(blocks.abs), lambda a, b, l, d: _mod(np.abs(_signed(np.asarray(a, object) - np.asarray(b, object), l)), l), 0))
_reg(Protocol("max", lambda s, a, b, raw, dim: blocks.max(s, a - b, dim), lambda a, b, l, d: _mod(_groups(np.asarray(a, object) - np.asarray(b, object), d).max(axis=1), l), 3, grouped=True))
_reg(Protocol("min", lambda s, a, b, raw, dim: blocks.min(s, a - b, dim), lambda a, b, l, d: _mod(_groups(np.asarray(a, object) - np.asarray(b, object), d).min(axis=1), l), 3, grouped=True))
_reg(Protocol("mult", lambda s, a, b, raw, dim: blocks.mult(s, a, b), lambda a, b, l, d: _mod(np.asarray(a, object) * np.asarray(b, object), l), 0))
_reg(Protocol("l1", lambda s, a, b, raw, dim: norms.l1_distance(s, a, b, dim), lambda a, b, l, d: _mod(np.abs(_groups(_signed(np.asarray(a, object) - np.asarray(b, object), l), d)).sum(axis=1), l), 0, grouped=True))
_reg(Protocol("l2sq", lambda s, a, b, raw, dim: norms.l2_squared_distance(s, a, b, dim), lambda a, b, l, d: _mod((_groups(np.asarray(a, object) - np.asarray(b, object), d) ** 2).sum(axis=1), l), 0, grouped=True))
_reg(Protocol("linf", lambda s, a, b, raw, dim: norms.linf_distance(s, a, b, dim), lambda a, b, l, d: _mod(np.abs(_groups(np.asarray(a, object) - np.asarray(b, object), d)).max(axis=1), l), 2, grouped=True))
_reg(Protocol("adder", lambda s, a, b, raw, dim: norms.adder(s, a, b, dim), lambda a, b, l, d: _mod(-np.abs(_groups(_signed(np.asarray(a, object) - np.asarray(b, object), l), d)).sum(axis=1), l), 0, grouped=True))

PROTOCOL_NAMES = tuple(PROTOCOLS)


def get(name: str) -> Protocol:
    try:
        return PROTOCOLS[name]
    except KeyError:
        raise UsageError(f"unknown protocol {name!r}; choose from {', '.join(PROTOCOL_NAMES)}") from None


def input_range(name: str, bits: int) -> tuple[int, int]:
    """Half-open range [lo, hi) of valid private inputs."""
    p = get(name)
    if p.unsigned:
        return 0, 1 << bits
    lim = 1 << (bits - 1 - p.headroom)
    return -lim, lim


def sample_inputs(name: str, n: int, bits: int, rng: np.random.Generator):
    """Random (a, b) python-int vectors inside the protocol's valid input range."""
    p = get(name)
    lo, hi = input_range(name, bits)
    dt = np.uint64 if p.unsigned else np.int64

    def draw():
        return rng.integers(lo, hi, size=n, dtype=dt).astype(object)

    return draw(), draw()


def check_range(name: str, values, bits: int):
    v = np.asarray(values, dtype=object)
    lo, hi = input_range(name, bits)
    bad = [int(t) for t in v if not lo <= int(t) < hi]
    if bad:
        raise UsageError(f"{name} at l={bits} needs inputs in [{lo}, {hi}); got {bad[0]}")


def evaluate(session, name: str, own, n: int, dim: int | None = None) -> object:
    """Run protocol ``name`` with this party's private vector ``own``."""
    p = get(name)
    bits = session.bits
    dim = n if dim is None or not p.grouped else dim
    a = norms.input_share(session, own if session.party == 0 else None, 0, n=n, bits=bits)
    b = norms.input_share(session, own if session.party == 1 else None, 1, n=n, bits=bits)
    return p.run(session, a, b, own, dim)


def output_values(peer_share, own_share, name: str, bits: int):
    """Combine both output shares into python ints (bits or ring elements)."""
    p = get(name)
    if p.output == "bit":
        return [int(v) for v in (np.asarray(own_share.bit) ^ np.asarray(peer_share.bit))]
    total = own_share.value + peer_share.value.astype(own_share.value.dtype)
    return [int(v) for v in total]


def oracle(name: str, a, b, bits: int, dim: int | None = None):
    n = len(a)
    return [int(v) for v in get(name).oracle(a, b, bits, n if dim is None else dim)]


__all__ = [
    "PROTOCOLS",
    "PROTOCOL_NAMES",
    "Protocol",
    "check_range",
    "input_range",
    "evaluate",
    "get",
    "oracle",
    "output_values",
    "sample_inputs",
]

