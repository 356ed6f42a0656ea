import io
import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import crandn, rel_err
from tgmp.tensor import (
    MAX_ORDER,
    ShapeError,
    contract_leading,
    flat_index,
    fold,
    frobenius_norm,
    hadamard,
    kron,
    mode_product,
    mode_vec_product,
    outer,
    read_tensor,
    tensor_from_bytes,
    tensor_to_bytes,
    unfold,
    unvectorize,
    vectorize,
    write_tensor,
)

shapes = st.lists(st.integers(1, 4), min_size=1, max_size=5).map(tuple)


def loop_unfold(t, k):
    """Brute-force unfolding: column = column-major merge of the other indices."""
    rest = [n for i, n in enumerate(t.shape) if i != k]
    out = np.zeros((t.shape[k], int(np.prod(rest))), dtype=t.dtype)
    for idx in itertools.product(*(range(n) for n in t.shape)):
        others = [i for m, i in enumerate(idx) if m != k]
        col = flat_index(others, rest) if rest else 0
        out[idx[k], col] = t[idx]
    return out


def loop_mode_product(t, k, q):
    shape = list(t.shape)
    shape[k] = q.shape[0]
    out = np.zeros(shape, dtype=np.result_type(t, q))
    for idx in itertools.product(*(range(n) for n in shape)):
        acc = 0
        for i in range(t.shape[k]):
            src = list(idx)
            src[k] = i
            acc += t[tuple(src)] * q[idx[k], i]
        out[idx] = acc
    return out


def all_small_shapes(max_order=4, max_dim=4):
    for d in range(1, max_order + 1):
        yield from itertools.product(range(1, max_dim + 1), repeat=d)


def test_flat_index_first_fastest():
    assert flat_index((1, 0, 0), (2, 3, 4)) == 1
    assert flat_index((0, 1, 0), (2, 3, 4)) == 2
    assert flat_index((1, 2, 3), (2, 3, 4)) == 1 + 2 * 2 + 3 * 6
    with pytest.raises(IndexError):
        flat_index((2, 0, 0), (2, 3, 4))


def test_vectorize_matches_flat_index_exhaustively():
    rng = np.random.default_rng(0)
    for shape in all_small_shapes(3, 3):
        t = crandn(rng, *shape)
        v = vectorize(t)
        for idx in itertools.product(*(range(n) for n in shape)):
            assert v[flat_index(idx, shape)] == t[idx]
        assert np.array_equal(unvectorize(v, shape), t)


def test_unfold_matrix_mode0_is_identity():
    m = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(unfold(m, 0), m)


def test_unfold_2x2x2_mode1_hand():
    t = unvectorize(np.arange(1.0, 9.0), (2, 2, 2))
    u = unfold(t, 1)
    for i, j, p in itertools.product(range(2), repeat=3):
        assert u[j, flat_index((i, p), (2, 2))] == t[i, j, p]


def test_unfold_matches_loop_oracle_on_small_shapes():
    rng = np.random.default_rng(1)
    for shape in all_small_shapes():
        t = crandn(rng, *shape)
        for k in range(len(shape)):
            assert np.array_equal(unfold(t, k), loop_unfold(t, k))


def test_mode_product_matches_loop_oracle_on_small_shapes():
    rng = np.random.default_rng(2)
    for shape in all_small_shapes():
        t = crandn(rng, *shape)
        for k in range(len(shape)):
            q = crandn(rng, 3, shape[k])
            assert rel_err(mode_product(t, k, q), loop_mode_product(t, k, q)) <= 1e-12


def test_mode_product_2x3x2_example():
    rng = np.random.default_rng(3)
    t, q = crandn(rng, 2, 3, 2), crandn(rng, 4, 3)
    out = mode_product(t, 1, q)
    assert out.shape == (2, 4, 2)
    for i1, j, i3 in itertools.product(range(2), range(4), range(2)):
        ref = sum(t[i1, i2, i3] * q[j, i2] for i2 in range(3))
        assert abs(out[i1, j, i3] - ref) <= 1e-12 * abs(ref) + 1e-15


def test_contract_leading_matches_loops_on_small_shapes():
    rng = np.random.default_rng(4)
    for shape in all_small_shapes(3, 4):
        x, s = crandn(rng, 2, *shape), crandn(rng, *shape)
        ref = np.array([sum(x[(n,) + idx] * s[idx] for idx in itertools.product(*(range(m) for m in shape)))
                        for n in range(2)])
        assert rel_err(contract_leading(x, s), ref) <= 1e-12
        assert rel_err(contract_leading(x, s), unfold(x, 0) @ vectorize(s)) <= 1e-12


def test_contract_leading_trivial_cases():
    x = np.zeros((3, 2, 2))
    x[1, 0, 1] = 1.0
    s = np.arange(4.0).reshape(2, 2)
    assert np.array_equal(contract_leading(x, s), [0.0, s[0, 1], 0.0])
    assert np.array_equal(contract_leading(np.ones((2, 2, 2)), np.zeros((2, 2))), [0.0, 0.0])
    with pytest.raises(ShapeError):
        contract_leading(np.ones((2, 2, 3)), np.ones((2, 2)))


@given(shapes, st.integers(0, 2**32 - 1))
def test_fold_inverts_unfold(shape, seed):
    t = crandn(np.random.default_rng(seed), *shape)
    for k in range(len(shape)):
        assert np.array_equal(fold(unfold(t, k), k, shape), t)
        assert np.isclose(np.linalg.norm(unfold(t, k)), frobenius_norm(t), rtol=1e-14)


def test_mode_product_composition():
    rng = np.random.default_rng(5)
    t = crandn(rng, 3, 3, 3)
    q1, q2 = crandn(rng, 4, 3), crandn(rng, 2, 4)
    for k in range(3):
        lhs = mode_product(mode_product(t, k, q1), k, q2)
        assert rel_err(lhs, mode_product(t, k, q2 @ q1)) <= 1e-12


def test_mode_product_identity():
    t = crandn(np.random.default_rng(6), 2, 3, 4)
    for k in range(3):
        assert np.allclose(mode_product(t, k, np.eye(t.shape[k])), t, rtol=0, atol=0)


def test_vector_products_equal_unfolding_times_kron():
    rng = np.random.default_rng(7)
    m = rng.random((3, 2, 2))
    b, c = crandn(rng, 2), crandn(rng, 2)
    lhs = mode_vec_product(mode_vec_product(m, 1, b), 1, c)
    assert rel_err(lhs, unfold(m, 0) @ kron(c, b)) <= 1e-12
    t = crandn(rng, 2, 3, 4, 2)
    vs = [crandn(rng, n) for n in t.shape[1:]]
    out = t
    for v in vs:
        out = mode_vec_product(out, 1, v)
    assert rel_err(out, unfold(t, 0) @ kron(*vs[::-1])) <= 1e-12


def test_vector_product_basis_and_ones():
    t = crandn(np.random.default_rng(8), 2, 3, 4)
    e = np.zeros(3)
    e[1] = 1.0
    assert np.array_equal(mode_vec_product(t, 1, e), t[:, 1, :])
    assert np.allclose(mode_vec_product(t, 2, np.ones(4)), t.sum(axis=2))
    with pytest.raises(ShapeError):
        mode_vec_product(t, 2, np.ones(3))


def test_kron_hadamard_outer():
    b = np.array([1.0, 2.0, 3.0])
    assert np.array_equal(kron(np.array([1.0, 0.0]), b), np.r_[b, 0, 0, 0])
    a = crandn(np.random.default_rng(9), 2, 3)
    assert np.array_equal(hadamard(a, np.ones((2, 3))), a)
    with pytest.raises(ShapeError):
        hadamard(a, np.ones((3, 2)))
    o = outer([1, 2], [3, 4], [5, 6])
    assert o[1, 1, 1] == 48
    for i, j, k in itertools.product(range(2), repeat=3):
        assert o[i, j, k] == [1, 2][i] * [3, 4][j] * [5, 6][k]


def test_frobenius_norm_exact_sum():
    t = crandn(np.random.default_rng(10), 3, 4, 5)
    ref = np.sqrt(float(np.sum(np.abs(np.ravel(t)).astype(np.longdouble) ** 2)))
    assert abs(frobenius_norm(t) - ref) <= 1e-14 * ref


def test_mode_errors():
    t = np.ones((2, 2))
    with pytest.raises(ShapeError):
        unfold(t, 2)
    with pytest.raises(ShapeError):
        mode_product(t, 0, np.ones((2, 3)))
    with pytest.raises(ShapeError):
        fold(np.ones((2, 3)), 0, (2, 2))


@given(shapes, st.integers(0, 2**32 - 1))
def test_container_round_trip_bit_exact(shape, seed):
    t = crandn(np.random.default_rng(seed), *shape)
    buf = tensor_to_bytes(t)
    assert buf[:8] == b"TGMPTNS1"
    back = tensor_from_bytes(buf)
    assert back.shape == t.shape
    assert back.tobytes() == t.tobytes() or np.array_equal(back, t)
    assert tensor_to_bytes(back) == buf


def test_container_layout_and_errors(tmp_path):
    t = unvectorize(np.array([1 + 2j, 3 - 4j, -0.0 + 0j, 5j]), (2, 2))
    buf = tensor_to_bytes(t)
    assert int.from_bytes(buf[8:16], "little") == 2
    vals = np.frombuffer(buf[32:], dtype="<f8")
    assert list(vals[:4]) == [1.0, 2.0, 3.0, -4.0]
    write_tensor(tmp_path / "t.tns", t)
    assert (tmp_path / "t.tns").read_bytes() == buf
    bio = io.BytesIO()
    write_tensor(bio, t)
    bio.seek(0)
    assert np.array_equal(read_tensor(bio), t)
    with pytest.raises(ValueError):
        tensor_from_bytes(b"XXXXXXXX" + buf[8:])
    with pytest.raises(ValueError):
        tensor_from_bytes(buf[:-8])
    with pytest.raises(ShapeError):
        tensor_to_bytes(np.ones((1,) * (MAX_ORDER + 1)))
