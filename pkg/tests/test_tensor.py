import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tuckervb import tensor as T
from tuckervb.errors import DimensionError, ModeError

G = np.array([[1.0, 2.0], [3.0, 4.0]])


# -- vectorize / unvectorize ------------------------------------------------

def test_vectorize_row_major():
    assert T.vectorize(G).tolist() == [1, 2, 3, 4]


def test_vectorize_one_way_unchanged():
    v = np.array([3.0, -1.0, 7.5])
    assert np.array_equal(T.vectorize(v), v)


def test_vectorize_roundtrip_random(rng):
    t = rng.standard_normal((3, 4, 2))
    back = T.unvectorize(T.vectorize(t), t.shape)
    assert np.array_equal(back, t)


def test_unvectorize_examples():
    assert np.array_equal(T.unvectorize([1, 2, 3, 4], (2, 2)), G)
    s = T.unvectorize([5.0], (1, 1, 1))
    assert s.shape == (1, 1, 1) and s[0, 0, 0] == 5.0


def test_unvectorize_length_mismatch():
    with pytest.raises(DimensionError):
        T.unvectorize([1, 2, 3], (2, 2))


def test_roundtrips_exhaustive_small():
    rng = np.random.default_rng(0)
    for d in range(1, 5):
        for shape in itertools.product(*[range(1, 7, 2)] * d):
            t = rng.standard_normal(shape)
            assert np.array_equal(T.unvectorize(T.vectorize(t), shape), t)
            for k in range(d):
                assert np.array_equal(T.mode_fold(T.mode_unfold(t, k), k, shape), t)


def test_vec_norm_equals_frobenius(rng):
    t = rng.standard_normal((3, 5, 2))
    assert np.isclose(np.linalg.norm(T.vectorize(t)), np.sqrt((t**2).sum()), rtol=1e-14)


# -- unfold / fold ----------------------------------------------------------

def test_mode_unfold_matrix_examples():
    assert np.array_equal(T.mode_unfold(G, 0), [[1, 2], [3, 4]])
    assert np.array_equal(T.mode_unfold(G, 1), [[1, 3], [2, 4]])


def test_mode_unfold_matches_index_definition(rng):
    t = rng.standard_normal((2, 3, 4))
    for k in range(3):
        u = T.mode_unfold(t, k)
        rest = [j for j in range(3) if j != k]
        for idx in itertools.product(*[range(s) for s in t.shape]):
            col = 0
            for j in rest:
                col = col * t.shape[j] + idx[j]
            assert u[idx[k], col] == t[idx]


def test_mode_unfold_refold_random(rng):
    t = rng.standard_normal((2, 3, 4))
    for k in range(3):
        assert np.array_equal(T.mode_fold(T.mode_unfold(t, k), k, t.shape), t)


def test_mode_out_of_range():
    with pytest.raises(ModeError):
        T.mode_unfold(G, 2)
    with pytest.raises(ModeError):
        T.mode_product(G, np.eye(2), -1)


# -- mode products ----------------------------------------------------------

def test_mode_product_identity(rng):
    t = rng.standard_normal((3, 4, 5))
    for k in range(3):
        assert np.array_equal(T.mode_product(t, np.eye(t.shape[k]), k), t)


def test_mode_product_sum_example():
    out = T.mode_product(G, np.array([[1.0, 1.0]]), 0)
    assert out.shape == (1, 2)
    assert np.array_equal(out, [[4.0, 6.0]])


def test_mode_product_brute_force(rng):
    t = rng.standard_normal((2, 3, 4))
    m = rng.standard_normal((5, 3))
    out = T.mode_product(t, m, 1)
    ref = np.zeros((2, 5, 4))
    for i, j, l, c in itertools.product(range(2), range(5), range(4), range(3)):
        ref[i, j, l] += t[i, c, l] * m[j, c]
    assert np.allclose(out, ref, rtol=1e-13, atol=1e-13)


def test_mode_product_equals_unfolded_multiply(rng):
    t = rng.standard_normal((3, 4, 2))
    m = rng.standard_normal((6, 4))
    out = T.mode_product(t, m, 1)
    ref = T.mode_fold(m @ T.mode_unfold(t, 1), 1, (3, 6, 2))
    assert np.allclose(out, ref, rtol=1e-13)


def test_mode_products_commute(rng):
    t = rng.standard_normal((3, 3, 3))
    a, b = rng.standard_normal((3, 3)), rng.standard_normal((3, 3))
    lhs = T.mode_product(T.mode_product(t, a, 0), b, 1)
    rhs = T.mode_product(T.mode_product(t, b, 1), a, 0)
    assert np.allclose(lhs, rhs, rtol=1e-13, atol=1e-14)


def test_mode_product_multilinear(rng):
    t1, t2 = rng.standard_normal((2, 2, 3, 4))
    m = rng.standard_normal((5, 3))
    lhs = T.mode_product(2.0 * t1 - t2, m, 1)
    rhs = 2.0 * T.mode_product(t1, m, 1) - T.mode_product(t2, m, 1)
    assert np.allclose(lhs, rhs, rtol=1e-13, atol=1e-13)


def test_mode_product_dimension_mismatch():
    with pytest.raises(DimensionError):
        T.mode_product(G, np.ones((3, 3)), 0)


# -- kronecker --------------------------------------------------------------

def test_kronecker_identity():
    assert np.array_equal(T.kronecker(np.eye(2), np.eye(3)), np.eye(6))


def test_kronecker_scalar(rng):
    b = rng.standard_normal((3, 2))
    assert np.array_equal(T.kronecker([[2.0]], b), 2 * b)


def test_kronecker_mixed_product(rng):
    a, b = rng.standard_normal((2, 3)), rng.standard_normal((3, 2))
    x, y = rng.standard_normal(3), rng.standard_normal(2)
    assert np.allclose(T.kronecker(a, b) @ np.kron(x, y), np.kron(a @ x, b @ y), rtol=1e-13)


def test_kron_matvec_matches_dense(rng):
    mats = [rng.standard_normal((3, 2)), rng.standard_normal((4, 3)), rng.standard_normal((2, 2))]
    x = rng.standard_normal(12)
    assert np.allclose(T.kron_matvec(mats, x), T.kronecker(*mats) @ x, rtol=1e-12)


# -- tucker_reconstruct -----------------------------------------------------

def test_tucker_identity_factors(rng):
    x = rng.standard_normal((3, 4))
    assert np.allclose(T.tucker_reconstruct(x, [np.eye(3), np.eye(4)]), x)


def test_tucker_rank_one_outer_product(rng):
    u, v = rng.standard_normal((4, 1)), rng.standard_normal((3, 1))
    out = T.tucker_reconstruct(np.ones((1, 1)), [u, v])
    assert np.allclose(out, u @ v.T, rtol=1e-14)


def test_tucker_elementwise_sum_oracle(rng):
    core = rng.standard_normal((2, 3, 2))
    us = [rng.standard_normal((4, 2)), rng.standard_normal((5, 3)), rng.standard_normal((4, 2))]
    out = T.tucker_reconstruct(core, us)
    ref = np.zeros((4, 5, 4))
    for i, j, k in itertools.product(range(4), range(5), range(4)):
        acc = 0.0
        for a, b, c in itertools.product(range(2), range(3), range(2)):
            acc += core[a, b, c] * us[0][i, a] * us[1][j, b] * us[2][k, c]
        ref[i, j, k] = acc
    assert np.allclose(out, ref, rtol=1e-12, atol=1e-13)


def test_tucker_matches_kronecker_matrix_path(rng):
    # pins the convention: row-major vec with U_0 kron ... kron U_{d-1}
    core = rng.standard_normal((2, 3, 2))
    us = [rng.standard_normal((4, 2)), rng.standard_normal((5, 3)), rng.standard_normal((3, 2))]
    via_modes = T.tucker_reconstruct(core, us)
    via_matrix = T.unvectorize(T.kronecker(*us) @ T.vectorize(core), (4, 5, 3))
    rel = np.linalg.norm(via_modes - via_matrix) / np.linalg.norm(via_matrix)
    assert rel < 1e-12


def test_tucker_dimension_mismatch(rng):
    with pytest.raises(DimensionError):
        T.tucker_reconstruct(np.ones((2, 2)), [np.ones((3, 3)), np.ones((3, 2))])
    with pytest.raises(DimensionError):
        T.tucker_reconstruct(np.ones((2, 2)), [np.ones((3, 2))])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(1, 4), min_size=1, max_size=4), st.integers(0, 2**31 - 1))
def test_property_kronecker_path_agrees(ranks, seed):
    rng = np.random.default_rng(seed)
    core = rng.standard_normal(ranks)
    us = [rng.standard_normal((r + 1, r)) for r in ranks]
    a = T.tucker_reconstruct(core, us).reshape(-1)
    b = T.kronecker(*us) @ core.reshape(-1)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)
