"""Distances between shared vectors and the adder / convolution layer kernels.

Comparison-based results (L-infinity, |x|) assume every difference fits in
l - 1 bits, i.e. |x_i - y_i| < 2^(l-1), and that max inputs differ by less than
2^(l-1) pairwise; otherwise the sign test wraps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import blocks
from .errors import UnsupportedOperationError, UsageError
from .packing import pack_uint, unpack_uint
from .ring import ArithShare, as_ring, random_ring


def input_share(session, values=None, owner: int = 0, n: int | None = None, bits: int | None = None) -> ArithShare:
    """Secret-share ``owner``'s private vector: the owner sends a random mask.

    The peer passes ``n`` instead of ``values``.  Traffic is tagged ``input``.
    """
    bits = session.bits if bits is None else bits
    with session.scope("input"):
        if session.party == owner:
            if values is None:
                raise UsageError("the input owner must supply values")
            v = as_ring(np.asarray(values), bits)
            r = random_ring(session.rng, v.shape[0], bits)
            session.send(pack_uint(r, bits))
            session.flush()
            return ArithShare(owner, bits, v - r)
        if n is None:
            raise UsageError("the non-owner must give the vector length n")
        r = unpack_uint(session.recv(), n, bits)
        return ArithShare(session.party, bits, r)


def _diff(session, x: ArithShare, y: ArithShare, dim: int | None) -> tuple[ArithShare, int]:
    if len(x) != len(y):
        raise UsageError(f"dimension mismatch: {len(x)} vs {len(y)}")
    n = len(x)
    dim = n if dim is None else dim
    if n == 0 or dim < 1 or n % dim:
        raise UsageError(f"length {n} is not a positive multiple of the dimension {dim}")
    return x - y, dim


def _group_sum(v: ArithShare, dim: int) -> ArithShare:
    g = len(v) // dim
    return ArithShare(v.party, v.bits, v.value.reshape(g, dim).sum(axis=1, dtype=v.value.dtype))


def l1_distance(session, x: ArithShare, y: ArithShare, dim: int | None = None) -> ArithShare:
    """Shares of sum_i |x_i - y_i|, one result per consecutive block of ``dim``."""
    d, dim = _diff(session, x, y, dim)
    with session.scope("l1", len(x) // dim):
        return _group_sum(blocks.abs(session, d), dim)


def l2_squared_distance(
    session, x: ArithShare, y: ArithShare, dim: int | None = None, method: str = "binary"
) -> ArithShare:
    """Shares of sum_i (x_i - y_i)^2."""
    d, dim = _diff(session, x, y, dim)
    with session.scope("l2sq", len(x) // dim):
        return _group_sum(blocks.square_vec(session, d, method), dim)


def linf_distance(session, x: ArithShare, y: ArithShare, dim: int | None = None) -> ArithShare:
    """Shares of max_i |x_i - y_i|."""
    d, dim = _diff(session, x, y, dim)
    with session.scope("linf", len(x) // dim):
        return blocks.max(session, blocks.abs(session, d), dim)


class SqrtProvider:
    """Plug-in computing shares of floor(sqrt(v)) from shares of v."""

    secure = True

    def sqrt(self, session, v: ArithShare) -> ArithShare:
        raise NotImplementedError


class PlaintextSqrtStub(SqrtProvider):
    """DEBUG ONLY, NOT SECURE: opens the radicand, takes isqrt, reshares."""

    secure = False

    def sqrt(self, session, v: ArithShare) -> ArithShare:
        bits = v.bits
        with session.scope("sqrt_debug"):
            peer = unpack_uint(session.exchange(pack_uint(v.value, bits)), len(v), bits)
            opened = (v.value + peer.astype(v.value.dtype)).astype(np.uint64)
            root = np.array([math.isqrt(int(t)) for t in opened], dtype=np.uint64)
        if session.party == 0:
            return ArithShare(0, bits, root)
        return ArithShare(1, bits, np.zeros(len(v), dtype=v.value.dtype))


def l2_distance(
    session, x: ArithShare, y: ArithShare, sqrt: SqrtProvider | None = None, dim: int | None = None
) -> ArithShare:
    """Shares of floor(||x - y||_2); needs a square-root provider."""
    if sqrt is None:
        raise UnsupportedOperationError(
            "L2 needs a SqrtProvider; use l2_squared_distance or pass PlaintextSqrtStub for debugging"
        )
    return sqrt.sqrt(session, l2_squared_distance(session, x, y, dim))


def adder(session, x: ArithShare, f: ArithShare, dim: int | None = None) -> ArithShare:
    """Adder-network response -sum_i |x_i - f_i| (the negated L1 distance)."""
    d, dim = _diff(session, x, f, dim)
    with session.scope("adder", len(x) // dim):
        return -_group_sum(blocks.abs(session, d), dim)


# --- layers -----------------------------------------------------------------

OPS = ("adder", "conv")


@dataclass(frozen=True)
class LayerSpec:
    """An h x w x c_in input, d x d x c_in x c_out filters, stride and zero padding."""

    h_in: int
    w_in: int
    c_in: int
    d: int
    c_out: int
    stride: int = 1
    padding: int = 0
    op: str = "adder"

    def __post_init__(self):
        if self.op not in OPS:
            raise UsageError(f"layer op must be one of {OPS}")
        if min(self.h_in, self.w_in, self.c_in, self.d, self.c_out, self.stride) < 1 or self.padding < 0:
            raise UsageError("layer dimensions must be positive")
        if self.h_out < 1 or self.w_out < 1:
            raise UsageError("kernel larger than padded input")

    @property
    def h_out(self) -> int:
        return (self.h_in + 2 * self.padding - self.d) // self.stride + 1

    @property
    def w_out(self) -> int:
        return (self.w_in + 2 * self.padding - self.d) // self.stride + 1

    @property
    def input_size(self) -> int:
        return self.h_in * self.w_in * self.c_in

    @property
    def filter_size(self) -> int:
        return self.d * self.d * self.c_in * self.c_out

    @property
    def output_size(self) -> int:
        return self.h_out * self.w_out * self.c_out

    @property
    def patch_size(self) -> int:
        return self.d * self.d * self.c_in

    @property
    def elementwise_ops(self) -> int:
        """Number of |.| (adder) or products (conv) the layer evaluates."""
        return self.output_size * self.patch_size

    def with_op(self, op: str) -> LayerSpec:
        return LayerSpec(self.h_in, self.w_in, self.c_in, self.d, self.c_out, self.stride, self.padding, op)

    def patch_index(self) -> np.ndarray:
        """(h_out*w_out, d*d*c_in) flat input indices; -1 marks zero padding."""
        oh, ow = np.meshgrid(np.arange(self.h_out), np.arange(self.w_out), indexing="ij")
        di, dj, c = np.meshgrid(np.arange(self.d), np.arange(self.d), np.arange(self.c_in), indexing="ij")
        rows = oh.reshape(-1, 1) * self.stride - self.padding + di.reshape(1, -1)
        cols = ow.reshape(-1, 1) * self.stride - self.padding + dj.reshape(1, -1)
        inside = (rows >= 0) & (rows < self.h_in) & (cols >= 0) & (cols < self.w_in)
        flat = (rows * self.w_in + cols) * self.c_in + c.reshape(1, -1)
        return np.where(inside, flat, -1)


# Layer shapes: 32x32 CIFAR-style ResNet stages
CIFAR_LAYERS = (
    LayerSpec(32, 32, 3, 3, 16, 1, 1),
    LayerSpec(32, 32, 16, 1, 32, 2, 0),
    LayerSpec(16, 16, 32, 3, 64, 2, 1),
    LayerSpec(8, 8, 64, 3, 64, 1, 1),
)


def _layer(session, x: ArithShare, f: ArithShare, spec: LayerSpec) -> ArithShare:
    if len(x) != spec.input_size:
        raise UsageError(f"input has {len(x)} entries, layer expects {spec.input_size}")
    if len(f) != spec.filter_size:
        raise UsageError(f"filters have {len(f)} entries, layer expects {spec.filter_size}")
    idx = spec.patch_index()  # (P, K)
    xpad = np.concatenate([x.value, np.zeros(1, dtype=x.value.dtype)])
    patches = xpad[idx]  # -1 picks the trailing zero
    fk = f.value.reshape(spec.patch_size, spec.c_out)  # (K, c_out), filters stored (d, d, c_in, c_out)
    p, k, co = patches.shape[0], spec.patch_size, spec.c_out
    # element order: (position, c_out, k)
    xs = np.broadcast_to(patches[:, None, :], (p, co, k)).reshape(-1)
    fs = np.broadcast_to(fk.T[None, :, :], (p, co, k)).reshape(-1)
    xa = ArithShare(session.party, x.bits, xs)
    fa = ArithShare(session.party, x.bits, fs)
    if spec.op == "adder":
        e = -blocks.abs(session, xa - fa).value
    else:
        e = blocks.mult(session, xa, fa).value
    y = e.reshape(p, co, k).sum(axis=2, dtype=x.value.dtype)
    return ArithShare(session.party, x.bits, y.reshape(-1))


def adder_layer(session, x: ArithShare, f: ArithShare, spec: LayerSpec) -> ArithShare:
    """Y[i, j, t] = -sum |X_patch - F[:, :, :, t]|; output flattened (h_out, w_out, c_out)."""
    spec = spec.with_op("adder")
    with session.scope("adder_layer", spec.output_size):
        return _layer(session, x, f, spec)


def conv_layer(session, x: ArithShare, f: ArithShare, spec: LayerSpec) -> ArithShare:
    """Convolution counterpart of :func:`adder_layer` using secure products."""
    spec = spec.with_op("conv")
    with session.scope("conv_layer", spec.output_size):
        return _layer(session, x, f, spec)


def layer_reference(x: np.ndarray, f: np.ndarray, spec: LayerSpec) -> np.ndarray:
    """Plaintext oracle over python ints (X (h, w, c_in), F (d, d, c_in, c_out))."""
    xp = np.zeros((spec.h_in + 2 * spec.padding, spec.w_in + 2 * spec.padding, spec.c_in), dtype=object)
    xp[spec.padding : spec.padding + spec.h_in, spec.padding : spec.padding + spec.w_in] = x
    out = np.zeros((spec.h_out, spec.w_out, spec.c_out), dtype=object)
    for i in range(spec.h_out):
        for j in range(spec.w_out):
            patch = xp[i * spec.stride : i * spec.stride + spec.d, j * spec.stride : j * spec.stride + spec.d]
            for t in range(spec.c_out):
                diff = patch - f[:, :, :, t]
                out[i, j, t] = -np.abs(diff).sum() if spec.op == "adder" else (patch * f[:, :, :, t]).sum()
    return out
