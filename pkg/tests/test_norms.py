import numpy as np
import pytest

from conftest import shared, two_party
from norm2pc import norms
from norm2pc.errors import UnsupportedOperationError, UsageError
from norm2pc.ring import reconstruct, to_signed


def run_norm(fn, x, y, bits=32, **kw):
    rng = np.random.default_rng(5)
    xs, ys = shared(x, bits, rng), shared(y, bits, rng)
    r0, r1, sess = two_party(lambda s, p: fn(s, *p, **kw), ((xs[0], ys[0]), (xs[1], ys[1])), bits=bits)
    return [int(v) for v in to_signed(reconstruct(r0, r1), bits)], sess


def test_small_examples():
    assert run_norm(norms.l1_distance, [1, 2], [4, 0])[0] == [5]
    assert run_norm(norms.l2_squared_distance, [0, 3], [4, 0])[0] == [25]
    assert run_norm(norms.linf_distance, [1, 9], [4, 0])[0] == [9]
    assert run_norm(norms.adder, [5], [2])[0] == [-3]


@pytest.mark.parametrize("fn", [norms.l1_distance, norms.l2_squared_distance, norms.linf_distance, norms.adder])
def test_identical_vectors_give_zero(fn):
    v = [7, -3, 11, 0]
    assert run_norm(fn, v, v)[0] == [0]


@pytest.mark.parametrize("method", ["binary", "nary", "beaver"])
def test_l2sq_methods_agree(method, rng):
    x, y = rng.integers(-1000, 1000, 50), rng.integers(-1000, 1000, 50)
    out, _ = run_norm(norms.l2_squared_distance, x, y, method=method)
    assert out == [int(((x - y) ** 2).sum())]


def test_grouped_norms(rng):
    x, y = rng.integers(-500, 500, 24), rng.integers(-500, 500, 24)
    d = np.abs(x - y).reshape(6, 4)
    assert run_norm(norms.l1_distance, x, y, dim=4)[0] == [int(v) for v in d.sum(axis=1)]
    assert run_norm(norms.linf_distance, x, y, dim=4)[0] == [int(v) for v in d.max(axis=1)]
    assert run_norm(norms.l2_squared_distance, x, y, dim=4)[0] == [int(v) for v in (d**2).sum(axis=1)]


def test_norm_inequalities(rng):
    for _ in range(5):
        n = int(rng.integers(1, 40))
        x, y = rng.integers(-10**6, 10**6, n), rng.integers(-10**6, 10**6, n)
        (l1,), _ = run_norm(norms.l1_distance, x, y)
        (linf,), _ = run_norm(norms.linf_distance, x, y)
        (l2sq,), _ = run_norm(norms.l2_squared_distance, x, y, bits=64)
        (neg,), _ = run_norm(norms.adder, x, y)
        assert linf <= l1 <= n * linf
        assert linf * linf <= l2sq <= l1 * l1
        assert neg == -l1


def test_length_mismatch_and_bad_dim():
    with pytest.raises(UsageError):
        run_norm(norms.l1_distance, [1, 2, 3], [1, 2])
    with pytest.raises(UsageError):
        run_norm(norms.l1_distance, [1, 2, 3], [1, 2, 3], dim=2)


def test_l2_needs_sqrt_provider():
    with pytest.raises(UnsupportedOperationError):
        run_norm(norms.l2_distance, [0, 3], [4, 0])


def test_plaintext_sqrt_stub():
    stub = norms.PlaintextSqrtStub()
    assert not stub.secure
    assert run_norm(norms.l2_distance, [0, 3], [4, 0], sqrt=stub)[0] == [5]
    assert run_norm(norms.l2_distance, [2, 2], [2, 2], sqrt=stub)[0] == [0]
    assert run_norm(norms.l2_distance, [0], [3], sqrt=stub)[0] == [3]


def test_input_share_roundtrip(rng):
    vals = rng.integers(-(2**31), 2**31, 20)

    def prog(s, _):
        a = norms.input_share(s, vals if s.party == 0 else None, owner=0, n=20)
        b = norms.input_share(s, vals[::-1] if s.party == 1 else None, owner=1, n=20)
        return a, b

    (a0, b0), (a1, b1), sess = two_party(prog)
    assert list(to_signed(reconstruct(a0, a1), 32)) == list(vals)
    assert list(to_signed(reconstruct(b0, b1), 32)) == list(vals[::-1])
    assert sess[0].metrics.tag("input").bytes_sent == 4 + 20 * 4


# --- layers -----------------------------------------------------------------


def run_layer(fn, spec, x, f, bits=32):
    rng = np.random.default_rng(8)
    xs = shared(np.asarray(x).reshape(-1), bits, rng)
    fs = shared(np.asarray(f).reshape(-1), bits, rng)
    r0, r1, _ = two_party(lambda s, p: fn(s, *p, spec), ((xs[0], fs[0]), (xs[1], fs[1])), bits=bits)
    out = np.array([int(v) for v in to_signed(reconstruct(r0, r1), bits)], dtype=object)
    return out.reshape(spec.h_out, spec.w_out, spec.c_out)


def test_layer_shapes():
    spec = norms.LayerSpec(32, 32, 3, 3, 16, 1, 1)
    assert (spec.h_out, spec.w_out) == (32, 32)
    assert spec.elementwise_ops == 32 * 32 * 16 * 27
    spec = norms.LayerSpec(16, 16, 32, 3, 64, 2, 1)
    assert (spec.h_out, spec.w_out) == (8, 8)
    with pytest.raises(UsageError):
        norms.LayerSpec(2, 2, 1, 3, 1)
    with pytest.raises(UsageError):
        norms.LayerSpec(4, 4, 1, 1, 1, op="pool")


def test_one_by_one_layer():
    spec = norms.LayerSpec(1, 1, 1, 1, 1)
    assert run_layer(norms.adder_layer, spec, [5], [2]).ravel().tolist() == [-3]
    assert run_layer(norms.conv_layer, spec, [5], [2]).ravel().tolist() == [10]


def test_zero_filter_gives_negated_l1_of_patches(rng):
    spec = norms.LayerSpec(4, 4, 1, 2, 1)
    x = rng.integers(-50, 50, (4, 4, 1))
    out = run_layer(norms.adder_layer, spec, x, np.zeros((2, 2, 1, 1), dtype=np.int64))
    expect = np.array(
        [[-np.abs(x[i : i + 2, j : j + 2]).sum() for j in range(3)] for i in range(3)], dtype=object
    )
    assert out.shape == (3, 3, 1)
    assert (out[:, :, 0] == expect).all()


def test_identity_kernel_conv_copies_input(rng):
    spec = norms.LayerSpec(3, 3, 2, 1, 2)
    x = rng.integers(-50, 50, (3, 3, 2))
    f = np.eye(2, dtype=np.int64).reshape(1, 1, 2, 2)
    assert (run_layer(norms.conv_layer, spec, x, f) == x).all()


@pytest.mark.parametrize("op", ["adder", "conv"])
@pytest.mark.parametrize(
    "spec",
    [norms.LayerSpec(5, 4, 2, 3, 3, 1, 1), norms.LayerSpec(6, 6, 1, 3, 2, 2, 0), norms.LayerSpec(4, 4, 3, 2, 2, 2, 1)],
)
def test_layers_match_reference(op, spec, rng):
    x = rng.integers(-100, 100, (spec.h_in, spec.w_in, spec.c_in))
    f = rng.integers(-100, 100, (spec.d, spec.d, spec.c_in, spec.c_out))
    fn = norms.adder_layer if op == "adder" else norms.conv_layer
    got = run_layer(fn, spec, x, f)
    assert (got == norms.layer_reference(x.astype(object), f.astype(object), spec.with_op(op))).all()


def test_layer_rejects_wrong_sizes():
    spec = norms.LayerSpec(2, 2, 1, 1, 1)
    with pytest.raises(UsageError):
        run_layer(norms.adder_layer, spec, [1, 2, 3], [1])
