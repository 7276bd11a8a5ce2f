"""Communication and round model, measured reports and bound checks.

Bits are totals over both parties.  Three figures exist per protocol:

* ``analytic_bound``: closed-form upper bounds (exact for the multiplexers);
* ``schedule_bits``: the exact OT-extension schedule of this implementation,
  composed from the per-primitive costs in :class:`CostModelParams`;
* measured: what a run actually metered (dealer mode charges the same
  schedule, so measured equals ``schedule_bits`` there).

MB means 2^20 bytes throughout.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import protocols
from .errors import UsageError
from .millionaire import ChunkPlan, and_count, tree_levels

MB_BITS = 8 * 2**20

BOUND_PROTOCOLS = (
    "mill", "msb", "abs_mux", "base_mux", "gen_mux", "abs", "max", "min",
    "mult", "l1", "l2sq", "linf", "adder", "conv",
)  # fmt: skip
EXACT = ("abs_mux", "base_mux", "gen_mux")


@dataclass(frozen=True)
class CostModelParams:
    """Security parameter, ring width, radix and per-primitive bit costs.

    COT_k = lam + k, OT_k = lam + 2k, 1-of-N OT_k = 2 lam + N k, one AND
    opening = 4 bits over both parties.  A bit triple costs half of a 1-of-16
    OT with 2-bit messages (two triples per OT) unless ``triple_bits`` is set.
    """

    lam: int = 128
    ell: int = 32
    m_radix: int = 4
    and_open_bits: int = 4
    triple_bits: float | None = None
    mult_method: str = "binary"

    def __post_init__(self):
        if min(self.lam, self.ell, self.m_radix) < 1 or self.and_open_bits < 0:
            raise UsageError("cost parameters must be positive")

    def cot(self, k: int) -> int:
        return self.lam + k

    def ot(self, k: int) -> int:
        return self.lam + 2 * k

    def ot_n(self, n: int, k: int) -> int:
        return 2 * self.lam + n * k

    def with_ell(self, ell: int) -> CostModelParams:
        return replace(self, ell=ell)


def _groups(n: int, dim: int | None) -> tuple[int, int]:
    dim = n if dim is None else dim
    if n < 1 or dim < 1 or n % dim:
        raise UsageError(f"n={n} is not a positive multiple of dim={dim}")
    return n // dim, dim


# --- closed-form bounds --------------------------------------------------


def analytic_bound(protocol: str, params: CostModelParams = CostModelParams(), n: int = 1, dim: int | None = None) -> int:
    """Upper bound in bits for an n-element call (exact for the multiplexers).

    ``dim`` is the group size of max/min/linf and of the grouped norms.
    """
    lam, ell = params.lam, params.ell
    abs_b = (lam + 16) * (ell + 1) - 30
    if protocol == "mill":
        return (lam + 14) * ell * n
    if protocol == "msb":
        return (lam + 14) * (ell - 1) * n
    if protocol in EXACT:
        return (2 * lam + 2 * ell) * n
    if protocol == "abs":
        return abs_b * n
    if protocol in ("max", "min"):
        g, d = _groups(n, dim)
        return g * ((d - 1) * (lam + 16) * (ell + 1) - 30 * (d - 1))
    if protocol in ("mult", "l2sq", "conv"):
        return 2 * ell * (lam + ell) * n
    if protocol in ("l1", "adder"):
        return abs_b * n
    if protocol == "linf":
        return abs_b * n + analytic_bound("max", params, n, dim)
    raise UsageError(f"unknown protocol {protocol!r}; choose from {', '.join(BOUND_PROTOCOLS)}")


# --- implementation schedule model -------------------------------------


def _mill_bits(p: CostModelParams, n: int, bits: int) -> int:
    if n == 0:
        return 0
    plan = ChunkPlan(bits, p.m_radix)
    q, w = plan.q, plan.widths
    if q == 1:
        leaf = p.ot_n(1 << w[0], 1)
    else:
        leaf = p.ot_n(1 << w[0], 2) + (q - 2) * p.ot_n(1 << p.m_radix, 2) + p.ot_n(1 << p.m_radix, 1)
    t = and_count(q) * n
    if p.triple_bits is None:
        triples = math.ceil(t / 2) * p.ot_n(16, 2)
    else:
        triples = math.ceil(t * p.triple_bits)
    return leaf * n + triples + t * p.and_open_bits


def _mult_bits(p: CostModelParams, n: int, method: str | None = None) -> int:
    method = method or p.mult_method
    ell, lam = p.ell, p.lam
    binary = 2 * (ell * lam + ell * (ell + 1) // 2)
    if method == "binary":
        return binary * n
    if method == "nary":
        return 2 * (ell // 4) * p.ot_n(16, ell) * n
    if method == "beaver":
        return (binary + 4 * ell) * n
    raise UsageError(f"unknown multiplication method {method!r}")


def _tournament_pairs(dim: int) -> list[int]:
    out = []
    while dim > 1:
        out.append(dim // 2)
        dim = dim // 2 + dim % 2
    return out


def schedule_bits(protocol: str, params: CostModelParams = CostModelParams(), n: int = 1, dim: int | None = None) -> int:
    """Exact schedule bits this implementation sends for an n-element call."""
    p = params
    ell = p.ell
    mux = 2 * p.cot(ell)
    if protocol == "mill":
        return _mill_bits(p, n, ell)
    if protocol == "msb":
        return _mill_bits(p, n, ell - 1)
    if protocol in EXACT:
        return mux * n
    if protocol in ("abs", "l1", "adder"):
        return _mill_bits(p, n, ell - 1) + mux * n
    if protocol in ("max", "min"):
        g, d = _groups(n, dim)
        return sum(_mill_bits(p, g * k, ell - 1) + mux * g * k for k in _tournament_pairs(d))
    if protocol in ("mult", "l2sq", "conv"):
        return _mult_bits(p, n)
    if protocol == "linf":
        return schedule_bits("abs", p, n) + schedule_bits("max", p, n, dim)
    raise UsageError(f"unknown protocol {protocol!r}; choose from {', '.join(BOUND_PROTOCOLS)}")


def msb_rounds(params: CostModelParams, bits: int | None = None) -> int:
    bits = params.ell - 1 if bits is None else bits
    return 1 + len(tree_levels(ChunkPlan(bits, params.m_radix).q))


def rounds_per_level(params: CostModelParams = CostModelParams()) -> int:
    """Rounds of one tournament level: an MSB followed by a multiplexer."""
    return msb_rounds(params) + 2


def rounds(protocol: str, params: CostModelParams = CostModelParams(), n: int = 1, dim: int | None = None) -> int:
    """Rounds per party (a round = one batch of messages sent)."""
    if protocol == "mill":
        return msb_rounds(params, params.ell)
    if protocol == "msb":
        return msb_rounds(params)
    if protocol in EXACT:
        return 2
    if protocol in ("abs", "l1", "adder"):
        return msb_rounds(params) + 2
    if protocol in ("max", "min"):
        _, d = _groups(n, dim)
        return len(_tournament_pairs(d)) * rounds_per_level(params)
    if protocol in ("mult", "l2sq", "conv"):
        return 3 if params.mult_method == "beaver" else 2
    if protocol == "linf":
        return rounds("abs", params) + rounds("max", params, n, dim)
    raise UsageError(f"unknown protocol {protocol!r}")


def to_mb(bits: float) -> float:
    return bits / MB_BITS


def predict_table(protocol: str, params: CostModelParams = CostModelParams(), n: int = 2**16, dim: int | None = None, model: str = "schedule") -> float:
    """Predicted communication in MB for an n-element batch."""
    fn = {"schedule": schedule_bits, "bound": analytic_bound}.get(model)
    if fn is None:
        raise UsageError("model must be 'schedule' or 'bound'")
    return to_mb(fn(protocol, params, n, dim))


# --- reference figures reproduced by the benches --------------------------

# communication at n = 2^16, l = 32, in MB
HEADLINE_REFERENCE_MB = {"l1": 32.47, "msb": 29.97, "mult": 74.0, "linf": 63.23, "max": 33.26, "abs_mux": 2.50}
HEADLINE_WINDOW = {"l1": (0.7, 1.35), "msb": (0.7, 1.35), "mult": (0.7, 1.5), "linf": (0.7, 1.35), "max": (0.7, 1.35)}
# conv vs adder communication (MB) by dimension
CONV_ADDER_REFERENCE_MB = {2**8: (0.29, 0.13), 2**14: (18.5, 8.37), 2**16: (74.0, 32.47)}
CONV_ADDER_RATIO = 74.0 / 32.47
# per-layer conv / adder communication (MB) for the built-in CIFAR layer shapes
LAYER_REFERENCE_MB = ((500.0, 224.0), (148.0, 60.0), (1332.0, 597.0), (2664.0, 1000.0))


# --- reports ------------------------------------------------------------


@dataclass
class CostReport:
    protocol: str
    params: dict
    analytic_bits: int
    measured_bits: dict  # {"p0", "p1", "total"}
    rounds: int
    wall_ms: float
    backend: str
    label: str
    wire_bytes: dict = field(default_factory=dict)
    blocks: dict = field(default_factory=dict)  # sub-protocol tag -> {"bits", "calls"}
    bound_checks: list = field(default_factory=list)
    transcript_sha256: list = field(default_factory=list)
    output: list | None = None

    @property
    def measured_total(self) -> int:
        return int(self.measured_bits["total"])

    @property
    def measured_mb(self) -> float:
        return to_mb(self.measured_total)

    def block_mb(self, tag: str) -> float:
        return to_mb(self.blocks.get(tag, {}).get("bits", 0))

    def cost_params(self) -> CostModelParams:
        p = self.params
        return CostModelParams(lam=p["lambda"], ell=p["ell"], m_radix=p["m_radix"])

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["output"] is None:
            d.pop("output")
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> CostReport:
        return cls(**d)


def report_from_sessions(protocol, sessions, params: CostModelParams, n, dim, wall_ms, tag=None, blocks=()) -> CostReport:
    tag = tag or protocol
    st = [s.metrics.tag(tag) for s in sessions]
    backend = sessions[0].backend
    label = "emulated OT-extension schedule (dealer)" if backend.emulated else f"measured {backend.mode} messages"
    rep = CostReport(
        protocol=protocol,
        params={"lambda": params.lam, "ell": params.ell, "n": n, "m_radix": params.m_radix, "dim": dim or n},
        analytic_bits=analytic_bound(protocol, params, n, dim),
        measured_bits={"p0": st[0].schedule_bits, "p1": st[1].schedule_bits, "total": st[0].schedule_bits + st[1].schedule_bits},
        rounds=max(st[0].rounds, st[1].rounds),
        wall_ms=wall_ms,
        backend=backend.mode,
        label=label,
        wire_bytes={"p0": st[0].bytes_sent, "p1": st[1].bytes_sent},
        blocks={
            b: {
                "bits": sum(s.metrics.tag(b).schedule_bits for s in sessions),
                "calls": sessions[0].metrics.invocations.get(b, 0),
            }
            for b in blocks
        },
        transcript_sha256=[s.metrics.transcript_sha256 for s in sessions],
    )
    rep.bound_checks = assert_bounds(rep)
    return rep


def measure(protocol: str, n: int, params: CostModelParams = CostModelParams(), backend: str = "dealer", seed: int = 0, dim: int | None = None, blocks=None, inputs=None) -> CostReport:
    """Run ``protocol`` on random (or given) inputs in-process and report its cost."""
    from .session import run_local

    if blocks is None:
        blocks = {"l1": ("abs", "msb", "abs_mux"), "adder": ("abs", "msb"), "linf": ("abs", "msb", "max"),
                  "l2sq": ("mult",), "abs": ("msb", "abs_mux"), "max": ("msb", "base_mux"), "min": ("msb", "base_mux")}.get(protocol, ())  # fmt: skip
    if inputs is None:
        inputs = protocols.sample_inputs(protocol, n, params.ell, np.random.default_rng([seed, 0x17]))
    t0 = time.perf_counter()
    r0, r1, sessions = run_local(
        lambda s, v: protocols.evaluate(s, protocol, v, n, dim),
        inputs,
        backend=backend,
        seed=seed,
        bits=params.ell,
        m_radix=params.m_radix,
        lam=params.lam,
    )
    wall = (time.perf_counter() - t0) * 1e3
    rep = report_from_sessions(protocol, sessions, params, n, dim, wall, blocks=blocks)
    rep.output = protocols.output_values(r0, r1, protocol, params.ell)
    return rep


def assert_bounds(report: CostReport) -> list[dict]:
    """Findings comparing measured bits (and sub-blocks) with the bounds.

    Multiplexers must match their formula exactly; everything else must stay
    strictly below its bound (a zero-cost degenerate call must equal zero).
    Elementwise sub-blocks are bounded by their invocation count.
    """
    p = report.cost_params()
    n, dim = report.params["n"], report.params.get("dim")
    items = [(report.protocol, report.measured_total, n, dim)]
    for tag, blk in report.blocks.items():
        if tag in ("max", "min"):
            items.append((tag, blk["bits"], n, dim))
        elif tag in BOUND_PROTOCOLS:
            # elementwise blocks: bound by the number of elements processed
            items.append((tag, blk["bits"], blk["calls"], None))
    out = []
    for name, measured, nn, dd in items:
        bound = analytic_bound(name, p, nn, dd)
        if name in EXACT or bound == 0:
            rel, ok = "==", measured == bound
        else:
            rel, ok = "<", measured < bound
        out.append({"check": name, "relation": rel, "measured": int(measured), "bound": int(bound), "ok": bool(ok)})
    return out
