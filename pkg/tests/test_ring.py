import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from norm2pc.errors import UsageError
from norm2pc.ring import (
    ArithShare,
    BitShare,
    RingValue,
    as_ring,
    reconstruct,
    reconstruct_bits,
    reconstruct_value,
    share,
    share_bits,
    to_signed,
)


@pytest.mark.parametrize("bits", [8, 16, 32, 64])
def test_share_roundtrip(bits, rng):
    xs = [0, 1, -1, 2 ** (bits - 1) - 1, -(2 ** (bits - 1)), 12345]
    s0, s1 = share(xs, bits, rng)
    got = to_signed(reconstruct(s0, s1), bits)
    assert [int(v) for v in got] == [((x + 2 ** (bits - 1)) % 2**bits) - 2 ** (bits - 1) for x in xs]


@given(st.integers(-(2**70), 2**70), st.sampled_from([8, 16, 32, 64]))
@settings(max_examples=200, deadline=None)
def test_as_ring_is_reduction_mod_2l(x, bits):
    assert int(as_ring(x, bits)[0]) == x % 2**bits


def test_ring_value_wraps_and_signed_view():
    v = RingValue(8, 300)
    assert v.value == 44
    assert RingValue(8, 200).signed == -56
    assert to_signed(255, 8) == -1


def test_share_ops_are_linear(rng):
    a0, a1 = share([10, 20], 16, rng)
    b0, b1 = share([3, -4], 16, rng)
    assert list(to_signed(reconstruct(a0 + b0, a1 + b1), 16)) == [13, 16]
    assert list(to_signed(reconstruct(a0 - b0, a1 - b1), 16)) == [7, 24]
    assert list(to_signed(reconstruct(-a0, -a1), 16)) == [-10, -20]
    assert list(to_signed(reconstruct(a0 * 3, a1 * 3), 16)) == [30, 60]
    assert list(to_signed(reconstruct(a0 + 5, a1 + 5), 16)) == [15, 25]
    assert reconstruct_value(a0.sum(), a1.sum()).signed == 30


def test_bit_shares_xor_and_flip(rng):
    b0, b1 = share_bits([0, 1, 1], rng)
    assert list(reconstruct_bits(b0.flip(), b1.flip())) == [1, 0, 0]
    c0, c1 = share_bits([1, 1, 0], rng)
    assert list(reconstruct_bits(b0 ^ c0, b1 ^ c1)) == [1, 0, 1]


def test_share_validation(rng):
    s0, _ = share([1], 8, rng)
    t0, _ = share([1], 16, rng)
    with pytest.raises(UsageError):
        s0 + t0
    with pytest.raises(UsageError):
        reconstruct(s0, s0)
    with pytest.raises(UsageError):
        as_ring(1, 12)
    with pytest.raises(UsageError):
        ArithShare(2, 8, [1])
    with pytest.raises(UsageError):
        share([1], 8)


def test_bitshare_lift():
    assert list(BitShare(0, [1, 0]).lift(32)) == [1, 0]
    assert BitShare(0, [1]).lift(32).dtype == np.uint32
