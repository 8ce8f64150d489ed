import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_orthonormal
from tuckervb import operators as O
from tuckervb.errors import DimensionError, RankError
from tuckervb.problems import fredholm_kernel, heat_multipliers


def test_dense_apply_identity(rng):
    x = rng.standard_normal(5)
    assert np.array_equal(O.apply(O.DenseOperator(np.eye(5)), x), x)


def test_dense_apply_length_mismatch():
    with pytest.raises(DimensionError):
        O.DenseOperator(np.eye(3)).apply(np.ones(4))


def test_separable_apply_matches_dense(rng):
    fs = [rng.standard_normal((3, 4)), rng.standard_normal((5, 2)), rng.standard_normal((2, 3))]
    op = O.SeparableOperator(fs)
    x = rng.standard_normal(op.shape[1])
    assert op.shape == (30, 24)
    assert np.allclose(op.apply(x), op.to_dense() @ x, rtol=1e-12, atol=1e-12)


def test_spectral_unit_multipliers_is_identity(rng):
    op = O.SpectralOperator(np.ones((4, 5, 6)))
    x = rng.standard_normal(op.shape[1])
    assert np.allclose(op.apply(x), x, atol=1e-12)


def test_spectral_rejects_nonfinite():
    with pytest.raises(ValueError):
        O.SpectralOperator(np.array([[1.0, np.inf], [1.0, 1.0]]))


def test_spectral_dense_matches_apply(rng):
    op = O.SpectralOperator(rng.random((4, 3)))
    x = rng.standard_normal(12)
    assert np.allclose(op.apply(x), op.to_dense() @ x, atol=1e-12)


def test_spectral_as_separable_only_when_factorable(rng):
    sep = O.SpectralOperator(heat_multipliers((4, 4), (0.01, 0.02), 0.1)).as_separable()
    assert sep is not None
    assert O.SpectralOperator(rng.random((4, 4))).as_separable() is None


@pytest.mark.parametrize("n", [1, 2, 7, 8, 16])
def test_real_trig_basis_orthonormal(n):
    b, f = O.real_trig_basis(n)
    assert np.max(np.abs(b.T @ b - np.eye(n))) < 1e-12
    assert np.all(np.diff(f) >= 0)


def test_trig_basis_eight_points():
    b, _ = O.real_trig_basis(8)
    assert np.allclose(b.T @ b, np.eye(8), atol=1e-12)


# -- subspace construction --------------------------------------------------

def test_identity_operator_full_rank_subspace_orthogonal():
    op = O.SeparableOperator([np.eye(3), np.eye(4)])
    sub = O.build_subspace_from_separable(op, (3, 4))
    u = sub.matrix()
    assert np.allclose(u.T @ u, np.eye(12), atol=1e-12)
    assert np.allclose(u @ u.T, np.eye(12), atol=1e-12)


def test_diagonal_factor_selects_leading_coordinates():
    op = O.SeparableOperator([np.diag([3.0, 2.0, 1.0])])
    u = O.build_subspace_from_separable(op, (2,)).factors[0]
    assert np.allclose(np.abs(u), [[1, 0], [0, 1], [0, 0]], atol=1e-14)
    _, _, vt = np.linalg.svd(np.diag([3.0, 2.0, 1.0]))
    proj = u @ u.T
    ref = vt[:2].T @ vt[:2]
    assert np.allclose(proj, ref, atol=1e-14)


def test_fredholm_captured_energy_matches_svd():
    k = fredholm_kernel(32, 0.15)
    op = O.SeparableOperator([k])
    u = O.build_subspace_from_separable(op, (12,)).factors[0]
    s = np.linalg.svd(k, compute_uv=False)
    captured = np.linalg.norm(k @ u) ** 2 / np.linalg.norm(k) ** 2
    sig = np.exp(-0.15 * np.arange(1, 33))
    assert abs(captured - (s[:12] ** 2).sum() / (s**2).sum()) < 1e-10
    assert abs(captured - (sig[:12] ** 2).sum() / (sig**2).sum()) < 1e-10


def test_separable_rank_too_large():
    op = O.SeparableOperator([np.ones((2, 3))])
    with pytest.raises(RankError):
        O.build_subspace_from_separable(op, (3,))
    with pytest.raises(RankError):
        O.build_subspace_from_separable(op, (0,))
    with pytest.raises(RankError):
        O.build_subspace_from_separable(op, (1, 1))


def test_spectral_subspace_selects_slowest_decaying():
    mult = heat_multipliers((8, 8, 8), (0.01, 0.005, 0.02), 0.1)
    op = O.SpectralOperator(mult)
    sub = O.build_subspace_from_spectral(op, (3, 5, 8))
    for k, u in enumerate(sub.factors):
        assert np.allclose(u.T @ u, np.eye(u.shape[1]), atol=1e-12)
    # per-mode multiplier along the x axis is non-increasing in kept order
    mx = mult[:, 0, 0]
    assert np.all(np.diff(mx) <= 1e-15)
    assert np.all(mx[:3] >= mx[3:].max())


def test_spectral_full_rank_reduced_equals_full(rng):
    op = O.SpectralOperator(heat_multipliers((4, 4), (0.01, 0.02), 0.1))
    sub = O.build_subspace_from_spectral(op, (4, 4))
    u = sub.matrix()
    assert np.allclose(u.T @ u, np.eye(16), atol=1e-12)
    assert np.allclose(u @ u.T, np.eye(16), atol=1e-12)


def test_subspace_rejects_non_orthonormal():
    with pytest.raises(ValueError):
        O.TuckerSubspace((np.ones((3, 2)),))
    with pytest.raises(RankError):
        O.TuckerSubspace((np.eye(3)[:2],))


def test_subspace_preserves_norm(rng):
    sub = O.TuckerSubspace((random_orthonormal(rng, 5, 2), random_orthonormal(rng, 6, 3)))
    g = rng.standard_normal(sub.n_g)
    assert abs(np.linalg.norm(sub.expand(g)) - np.linalg.norm(g)) < 1e-10
    assert np.allclose(sub.project(sub.expand(g)), g, atol=1e-12)
    assert np.allclose(sub.expand(g), sub.matrix() @ g, atol=1e-12)


# -- reduce -----------------------------------------------------------------

def test_reduce_identity_gram():
    op = O.DenseOperator(np.eye(6), (2, 3))
    red = O.reduce(op, O.identity_subspace((2, 3)), np.arange(6.0))
    assert np.allclose(red.gram, np.eye(6), atol=1e-12)
    assert red.diagonal


def test_reduce_separable_matches_dense(rng):
    a0, a1 = rng.standard_normal((2, 2)), rng.standard_normal((3, 3))
    sep = O.SeparableOperator([a0, a1])
    dense = O.DenseOperator(np.kron(a0, a1), (2, 3))
    sub = O.TuckerSubspace((random_orthonormal(rng, 2, 2), random_orthonormal(rng, 3, 2)))
    y = rng.standard_normal(6)
    r1, r2 = O.reduce(sep, sub, y), O.reduce(dense, sub, y)
    assert np.allclose(r1.a_tilde, r2.a_tilde, atol=1e-12)
    assert np.allclose(r1.gram, r2.gram, atol=1e-12)
    assert np.allclose(r1.aty, r2.aty, atol=1e-12)
    assert r1.mode_factors is not None


def test_reduce_aty_independent(rng):
    op = O.SeparableOperator([rng.standard_normal((4, 3)), rng.standard_normal((5, 4))])
    sub = O.build_subspace_from_separable(op, (2, 3))
    y = rng.standard_normal(20)
    red = O.reduce(op, sub, y)
    at = op.to_dense() @ sub.matrix()
    assert np.allclose(red.aty, at.T @ y, atol=1e-12)
    assert np.allclose(red.gram, red.gram.T, atol=1e-12)
    g = rng.standard_normal(6)
    assert np.allclose(red.matvec(g), at @ g, atol=1e-12)
    assert abs(red.residual_norm2(g) - np.sum((y - at @ g) ** 2)) < 1e-10


def test_reduce_spectral_matches_dense(rng):
    mult = rng.random((4, 3)) + 0.1
    op = O.SpectralOperator(mult)
    sub = O.build_subspace_from_spectral(op, (2, 3))
    y = rng.standard_normal(12)
    red = O.reduce(op, sub, y)
    at = op.to_dense() @ sub.matrix()
    assert np.allclose(red.a_tilde, at, atol=1e-12)
    assert red.diagonal


def test_reduce_linear_in_y(rng):
    op = O.SeparableOperator([rng.standard_normal((4, 4)), rng.standard_normal((3, 3))])
    sub = O.build_subspace_from_separable(op, (2, 2))
    y1, y2 = rng.standard_normal((2, 12))
    lhs = O.reduce(op, sub, y1 + y2).aty
    rhs = O.reduce(op, sub, y1).aty + O.reduce(op, sub, y2).aty
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_reduce_dimension_mismatch(rng):
    op = O.SeparableOperator([np.eye(3), np.eye(2)])
    with pytest.raises(DimensionError):
        O.reduce(op, O.identity_subspace((2, 3)), np.ones(6))
    with pytest.raises(DimensionError):
        O.reduce(op, O.identity_subspace((3, 2)), np.ones(5))
    with pytest.raises(DimensionError):
        O.reduce(op, O.identity_subspace((4,)), np.ones(6))


def test_full_rank_reduced_tikhonov_equals_full(rng):
    a0 = rng.standard_normal((3, 3)) + 3 * np.eye(3)
    a1 = rng.standard_normal((4, 4)) + 3 * np.eye(4)
    op = O.SeparableOperator([a0, a1])
    sub = O.build_subspace_from_separable(op, (3, 4))
    y = rng.standard_normal(12)
    red = O.reduce(op, sub, y)
    a = op.to_dense()
    for lam in (1e-4, 0.1, 10.0):
        g = np.linalg.solve(red.gram + lam * np.eye(12), red.aty)
        x_full = np.linalg.solve(a.T @ a + lam * np.eye(12), a.T @ y)
        assert np.allclose(sub.expand(g), x_full, rtol=1e-8, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2**31 - 1))
def test_property_separable_vs_dense(d, seed):
    rng = np.random.default_rng(seed)
    shapes = [(int(rng.integers(1, 5)), int(rng.integers(1, 5))) for _ in range(d)]
    op = O.SeparableOperator([rng.standard_normal(s) for s in shapes])
    x = rng.standard_normal(op.shape[1])
    assert np.allclose(op.apply(x), op.to_dense() @ x, rtol=1e-12, atol=1e-12)
