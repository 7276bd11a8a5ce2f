"""Base-OT material for the extension backend.

An extension in direction d (party d is the extension sender) needs
``lambda'`` base OTs run the other way: the extension receiver holds seed
pairs, the extension sender holds a random choice vector ``s`` and one seed
of each pair.  Two families exist per direction: ``iknp`` (lambda' = lambda,
2-choice OTs) and ``kk`` (lambda' = 2*lambda, 1-of-N OTs).

File layout (all integers little-endian)::

    magic   12 bytes  b"NORM2PC-BOT1"
    party   u8
    nsect   u8
    per section:
      family      u8   0 = iknp, 1 = kk
      ext_sender  u8   party acting as extension sender
      count       u16  lambda'
      seed_len    u8
      records     count * (1 + seed_len) bytes  if party == ext_sender
                        (choice bit, chosen seed)
                  count * 2 * seed_len bytes    otherwise (seed0, seed1)
"""

from __future__ import annotations

import hashlib
import secrets
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ProtocolError, UsageError
from .core import LAMBDA

MAGIC = b"NORM2PC-BOT1"
SEED_LEN = 16
FAMILIES = ("iknp", "kk")


def family_width(family: str, lam: int) -> int:
    return lam if family == "iknp" else 2 * lam


@dataclass
class BaseOtSet:
    family: str
    ext_sender: int
    choices: np.ndarray | None = None  # (count,) uint8, extension sender only
    seeds: np.ndarray | None = None  # (count, 16) chosen seeds, or (count, 2, 16) pairs

    @property
    def count(self) -> int:
        return self.seeds.shape[0]


@dataclass
class BaseOtSetup:
    party: int
    lam: int = LAMBDA
    sets: dict = field(default_factory=dict)  # (family, ext_sender) -> BaseOtSet

    def get(self, family: str, ext_sender: int) -> BaseOtSet:
        try:
            return self.sets[(family, ext_sender)]
        except KeyError:
            raise UsageError(f"setup lacks base OTs for {family} with sender {ext_sender}") from None

    # generation ---------------------------------------------------------
    @classmethod
    def generate_pair(cls, seed: int | None = None, lam: int = LAMBDA):
        """Sample matching setups for both parties (a local trusted setup)."""
        rng = np.random.default_rng(seed if seed is not None else secrets.randbits(128))
        ours = cls(0, lam), cls(1, lam)
        for fam in FAMILIES:
            k = family_width(fam, lam)
            for snd in (0, 1):
                pairs = rng.integers(0, 256, size=(k, 2, SEED_LEN), dtype=np.uint8)
                s = rng.integers(0, 2, size=k, dtype=np.uint8)
                chosen = pairs[np.arange(k), s]
                ours[snd].sets[(fam, snd)] = BaseOtSet(fam, snd, s, chosen)
                ours[1 - snd].sets[(fam, snd)] = BaseOtSet(fam, snd, None, pairs)
        return ours

    # serialisation ------------------------------------------------------
    def to_bytes(self) -> bytes:
        out = [MAGIC, struct.pack("<BB", self.party, len(self.sets))]
        for (fam, snd), st in sorted(self.sets.items()):
            out.append(struct.pack("<BBHB", FAMILIES.index(fam), snd, st.count, SEED_LEN))
            if snd == self.party:
                rec = np.concatenate([st.choices[:, None], st.seeds], axis=1)
            else:
                rec = st.seeds.reshape(st.count, 2 * SEED_LEN)
            out.append(np.ascontiguousarray(rec, dtype=np.uint8).tobytes())
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> BaseOtSetup:
        if data[: len(MAGIC)] != MAGIC:
            raise ProtocolError("not a base-OT setup file (bad magic)")
        pos = len(MAGIC)
        party, nsect = struct.unpack_from("<BB", data, pos)
        pos += 2
        setup = cls(party)
        lam = None
        for _ in range(nsect):
            fam_id, snd, count, slen = struct.unpack_from("<BBHB", data, pos)
            pos += 5
            if fam_id >= len(FAMILIES) or slen != SEED_LEN or snd not in (0, 1):
                raise ProtocolError("corrupt base-OT section header")
            fam = FAMILIES[fam_id]
            rec_len = 1 + slen if snd == party else 2 * slen
            raw = data[pos : pos + count * rec_len]
            if len(raw) != count * rec_len:
                raise ProtocolError("truncated base-OT setup file")
            pos += count * rec_len
            rec = np.frombuffer(raw, dtype=np.uint8).reshape(count, rec_len)
            if snd == party:
                if rec[:, 0].max(initial=0) > 1:
                    raise ProtocolError("base-OT choice bits must be 0/1")
                st = BaseOtSet(fam, snd, rec[:, 0].copy(), rec[:, 1:].copy())
            else:
                st = BaseOtSet(fam, snd, None, rec.reshape(count, 2, slen).copy())
            setup.sets[(fam, snd)] = st
            if fam == "iknp":
                lam = count
        if pos != len(data):
            raise ProtocolError("trailing bytes in base-OT setup file")
        setup.lam = lam or LAMBDA
        return setup

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> BaseOtSetup:
        return cls.from_bytes(Path(path).read_bytes())

    def fingerprint(self) -> str:
        """Hash of the public structure; both parties' files agree on it."""
        h = hashlib.sha256(struct.pack("<H", self.lam))
        for fam, snd in sorted(self.sets):
            h.update(struct.pack("<BBH", FAMILIES.index(fam), snd, self.sets[(fam, snd)].count))
        return h.hexdigest()[:16]


# --- Diffie-Hellman base OTs ------------------------------------------------

# 2048-bit safe prime, generator 2 (RFC 3526 group 14)
MODP_P = int(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74"
    "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437"
    "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05"
    "98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB"
    "9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718"
    "3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF",
    16,
)
MODP_G = 2
_ELEM = 256  # bytes per group element
_EXP_BITS = 256  # short exponents


def _enc(x: int) -> bytes:
    return x.to_bytes(_ELEM, "big")


def _dec(b: bytes) -> int:
    x = int.from_bytes(b, "big")
    if not 1 < x < MODP_P - 1:
        raise ProtocolError("group element out of range")
    return x


def _kdf(x: int, label: bytes, j: int, bit: int) -> bytes:
    return hashlib.sha256(label + struct.pack("<IB", j, bit) + _enc(x)).digest()[:SEED_LEN]


def _xor(a: bytes, b: bytes) -> bytes:
    return bytes(u ^ v for u, v in zip(a, b))


class DiffieHellmanBaseOt:
    """Semi-honest base OTs from the Bellare-Micali construction.

    Three message flows, all four base-OT sets in parallel.  Traffic is
    recorded under the ``setup`` tag, which protocol figures exclude.
    """

    def __init__(self, lam: int = LAMBDA):
        self.lam = lam

    def _rand_exp(self) -> int:
        return secrets.randbits(_EXP_BITS) | (1 << (_EXP_BITS - 1))

    def run(self, session) -> BaseOtSetup:
        me = session.party
        lam = self.lam
        setup = BaseOtSetup(me, lam)
        keys = [(fam, snd) for fam in FAMILIES for snd in (0, 1)]
        # base-OT sender = extension receiver = 1 - snd
        as_sender = [k for k in keys if k[1] != me]
        as_receiver = [k for k in keys if k[1] == me]
        with session.detached("setup"):
            cx = self._rand_exp()
            c_pub = pow(MODP_G, cx, MODP_P)
            peer_c = _dec(session.exchange(_enc(c_pub)))

            # flow 2: receivers publish pk0 for every base OT they receive
            rstate, msg = {}, []
            for fam, snd in as_receiver:
                k = family_width(fam, lam)
                choice = np.frombuffer(secrets.token_bytes(k), dtype=np.uint8) & 1
                ks = [self._rand_exp() for _ in range(k)]
                pk0 = []
                for j in range(k):
                    pc = pow(MODP_G, ks[j], MODP_P)
                    pk0.append(pc if choice[j] == 0 else peer_c * pow(pc, -1, MODP_P) % MODP_P)
                rstate[(fam, snd)] = (choice, ks)
                msg.extend(_enc(x) for x in pk0)
            peer = session.exchange(b"".join(msg))

            # flow 3: senders answer with g^r and both encrypted seeds
            pos, out = 0, []
            pairs_by_key = {}
            for fam, snd in as_sender:
                k = family_width(fam, lam)
                pairs = np.frombuffer(secrets.token_bytes(k * 2 * SEED_LEN), dtype=np.uint8)
                pairs = pairs.reshape(k, 2, SEED_LEN).copy()
                r = self._rand_exp()
                out.append(_enc(pow(MODP_G, r, MODP_P)))
                label = bytes([FAMILIES.index(fam), snd])
                for j in range(k):
                    pk0 = _dec(peer[pos : pos + _ELEM])
                    pos += _ELEM
                    pk1 = c_pub * pow(pk0, -1, MODP_P) % MODP_P
                    out.append(_xor(pairs[j, 0].tobytes(), _kdf(pow(pk0, r, MODP_P), label, j, 0)))
                    out.append(_xor(pairs[j, 1].tobytes(), _kdf(pow(pk1, r, MODP_P), label, j, 1)))
                pairs_by_key[(fam, snd)] = pairs
            if pos != len(peer):
                raise ProtocolError("base-OT flow size mismatch")
            reply = session.exchange(b"".join(out))

            pos = 0
            for fam, snd in as_receiver:
                choice, ks = rstate[(fam, snd)]
                k = len(ks)
                gr = _dec(reply[pos : pos + _ELEM])
                pos += _ELEM
                label = bytes([FAMILIES.index(fam), snd])
                seeds = np.zeros((k, SEED_LEN), dtype=np.uint8)
                for j in range(k):
                    ct = reply[pos : pos + 2 * SEED_LEN]
                    pos += 2 * SEED_LEN
                    c = int(choice[j])
                    pad = _kdf(pow(gr, ks[j], MODP_P), label, j, c)
                    seeds[j] = np.frombuffer(_xor(ct[c * SEED_LEN : (c + 1) * SEED_LEN], pad), np.uint8)
                setup.sets[(fam, snd)] = BaseOtSet(fam, snd, choice.copy(), seeds)
            if pos != len(reply):
                raise ProtocolError("base-OT flow size mismatch")
            for key, pairs in pairs_by_key.items():
                setup.sets[key] = BaseOtSet(key[0], key[1], None, pairs)
        return setup
