import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperpower.linop import DimensionError
from hyperpower.tensorkron import (FastDiagSolver, GeneralizedKronSum, KronCholeskySolve, KroneckerOp,
                                   SingularOperatorError, fastdiag_build, fastdiag_solve, kron_dense,
                                   kron_matvec, kron_sum_apply, vec_index)


def spd(rng, n):
    a = rng.standard_normal((n, n))
    return a @ a.T + n * np.eye(n)


def sym(rng, n):
    a = rng.standard_normal((n, n))
    return a + a.T


def hat_matrices(n_el):
    """Linear hat-function stiffness and mass on a uniform mesh, Dirichlet rows removed."""
    h = 1.0 / n_el
    n = n_el - 1
    k = (np.diag(np.full(n, 2.0)) - np.diag(np.ones(n - 1), 1) - np.diag(np.ones(n - 1), -1)) / h
    m = (np.diag(np.full(n, 4.0)) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1)) * h / 6
    return k, m


@pytest.mark.parametrize("idx,expected", [((1, 1, 1), 1), ((2, 3, 4), 24), ((2, 1, 1), 2), ((1, 2, 1), 3)])
def test_vec_index(idx, expected):
    assert vec_index(idx, (2, 3, 4)) == expected


@pytest.mark.parametrize("idx", [(0, 1, 1), (3, 1, 1), (1, 1, 5)])
def test_vec_index_out_of_range(idx):
    with pytest.raises(IndexError):
        vec_index(idx, (2, 3, 4))


def test_vec_index_matches_flattening():
    dims = (2, 3, 4)
    x = np.arange(24).reshape(dims[::-1])  # (n3, n2, n1)
    for i3 in range(4):
        for i2 in range(3):
            for i1 in range(2):
                assert x.reshape(-1)[vec_index((i1 + 1, i2 + 1, i3 + 1), dims) - 1] == x[i3, i2, i1]


def test_identity_factors():
    v = np.arange(6.0)
    np.testing.assert_array_equal(kron_matvec(KroneckerOp([np.eye(2), np.eye(3)]), v), v)


def test_two_by_two_example():
    op = KroneckerOp([[[1, 2], [3, 4]], np.eye(2)])
    np.testing.assert_allclose(op.apply(np.array([1.0, 0, 0, 0])), [1, 0, 3, 0])


def test_factor_order_is_outermost_first():
    rng = np.random.default_rng(0)
    d2, d1 = rng.standard_normal((2, 2)), rng.standard_normal((3, 3))
    assert np.allclose(KroneckerOp([d2, d1]).todense(), np.kron(d2, d1))


@settings(max_examples=40, deadline=None)
@given(shapes=st.lists(st.tuples(st.integers(1, 4), st.integers(1, 4)), min_size=1, max_size=4),
       seed=st.integers(0, 2**16))
def test_matvec_matches_dense(shapes, seed):
    rng = np.random.default_rng(seed)
    factors = [rng.standard_normal(s) for s in shapes]
    op = KroneckerOp(factors)
    x = rng.standard_normal(op.shape[1])
    ref = kron_dense(factors) @ x
    assert np.linalg.norm(op.apply(x) - ref) <= 1e-13 * max(1.0, np.linalg.norm(ref))


def test_transpose_operator():
    rng = np.random.default_rng(1)
    op = KroneckerOp([rng.standard_normal((2, 3)), rng.standard_normal((4, 2)), rng.standard_normal((3, 3))])
    np.testing.assert_allclose(op.T.todense(), op.todense().T, atol=1e-14)


def test_mixed_product_property():
    rng = np.random.default_rng(2)
    a, b, c, d = (rng.standard_normal((3, 3)) for _ in range(4))
    lhs = KroneckerOp([a, b]).todense() @ KroneckerOp([c, d]).todense()
    np.testing.assert_allclose(lhs, np.kron(a @ c, b @ d), atol=1e-13)


def test_inverse_distributes():
    rng = np.random.default_rng(3)
    a, b = spd(rng, 3), spd(rng, 2)
    np.testing.assert_allclose(np.linalg.inv(np.kron(a, b)), np.kron(np.linalg.inv(a), np.linalg.inv(b)),
                               atol=1e-13)


def test_matvec_dimension_mismatch():
    with pytest.raises(DimensionError):
        KroneckerOp([np.eye(2), np.eye(3)]).apply(np.ones(5))


def test_flops_equal_sizes_is_n_to_the_four():
    for n in (2, 5, 9):
        op = KroneckerOp([np.ones((n, n))] * 3)
        assert op.flops == 3 * n ** 4


def test_flop_slope_is_four_thirds():
    ns = np.array([4, 8, 16])
    flops = [KroneckerOp([np.ones((n, n))] * 3).flops for n in ns]
    slope = np.polyfit(np.log(ns ** 3), np.log(flops), 1)[0]
    assert slope == pytest.approx(4 / 3, abs=1e-12)


def test_kron_sum_scalar():
    ks = GeneralizedKronSum([([[2.0]], [[1.0]]), ([[3.0]], [[1.0]])])
    np.testing.assert_allclose(kron_sum_apply(ks, np.array([1.0])), [5.0])


def test_kron_sum_vanishing_term():
    rng = np.random.default_rng(4)
    a1, m1, m2 = sym(rng, 3), spd(rng, 3), spd(rng, 2)
    ks = GeneralizedKronSum([(a1, m1), (np.zeros((2, 2)), m2)])
    x = rng.standard_normal(6)
    np.testing.assert_allclose(ks.apply(x), np.kron(m2, a1) @ x, atol=1e-13)


def test_kron_sum_dense_oracle():
    rng = np.random.default_rng(5)
    terms = [(sym(rng, n), spd(rng, n)) for n in (2, 2, 3)]
    ks = GeneralizedKronSum(terms)
    (a1, m1), (a2, m2), (a3, m3) = terms
    dense = np.kron(m3, np.kron(m2, a1)) + np.kron(m3, np.kron(a2, m1)) + np.kron(a3, np.kron(m2, m1))
    x = rng.standard_normal(12)
    assert np.linalg.norm(ks.apply(x) - dense @ x) <= 1e-13 * np.linalg.norm(dense @ x)
    np.testing.assert_allclose(ks.todense(), dense, atol=1e-12)


def test_kron_sum_rejects_nonsquare():
    with pytest.raises(DimensionError):
        GeneralizedKronSum([(np.ones((2, 3)), np.ones((2, 3)))])


def test_fastdiag_scalar():
    solver = fastdiag_build(GeneralizedKronSum([([[4.0]], [[1.0]])]))
    np.testing.assert_allclose(solver.diagonal, [4.0])
    np.testing.assert_allclose(fastdiag_solve(solver, np.array([8.0])), [2.0])


def test_fastdiag_hat_roundtrip():
    k, m = hat_matrices(6)
    ks = GeneralizedKronSum([(k, m), (k, m)])
    solver = fastdiag_build(ks)
    b = np.random.default_rng(6).standard_normal(ks.shape[0])
    x = fastdiag_solve(solver, b)
    assert np.linalg.norm(ks.apply(x) - b) <= 1e-10 * np.linalg.norm(b)
    assert np.all(solver.diagonal > 0)


def test_fastdiag_zero_rhs():
    k, m = hat_matrices(4)
    solver = fastdiag_build(GeneralizedKronSum([(k, m), (k, m)]))
    np.testing.assert_array_equal(solver.apply(np.zeros(9)), np.zeros(9))


def test_fastdiag_random_dense_solve():
    rng = np.random.default_rng(7)
    ks = GeneralizedKronSum([(spd(rng, 3), spd(rng, 3)), (spd(rng, 4), spd(rng, 4))])
    b = rng.standard_normal(12)
    np.testing.assert_allclose(fastdiag_build(ks).apply(b), np.linalg.solve(ks.todense(), b), rtol=1e-10)


def test_fastdiag_transforms_diagonalize():
    rng = np.random.default_rng(8)
    a, m = sym(rng, 4), spd(rng, 4)
    solver = fastdiag_build(GeneralizedKronSum([(a, m)]))
    u = solver.transforms[0]
    np.testing.assert_allclose(u.T @ m @ u, np.eye(4), atol=1e-12)
    np.testing.assert_allclose(u.T @ a @ u, np.diag(solver.eigenvalues[0]), atol=1e-12)


def test_fastdiag_rejects_indefinite_mass():
    with pytest.raises(np.linalg.LinAlgError):
        fastdiag_build(GeneralizedKronSum([(np.eye(2), np.diag([1.0, -1.0]))]))


def test_fastdiag_rejects_nonsymmetric():
    with pytest.raises(ValueError):
        fastdiag_build(GeneralizedKronSum([(np.array([[1.0, 2.0], [0.0, 1.0]]), np.eye(2))]))


def test_fastdiag_singular():
    # A_1 ⊕̂ A_2 with eigenvalues {1} and {-1} sums to zero
    with pytest.raises(SingularOperatorError):
        fastdiag_build(GeneralizedKronSum([([[1.0]], [[1.0]]), ([[-1.0]], [[1.0]])]))


def test_fastdiag_direct_constructor_checks_singularity():
    with pytest.raises(SingularOperatorError):
        FastDiagSolver([np.eye(2)], [np.array([0.0, 1.0])])


def test_kron_cholesky_solve():
    rng = np.random.default_rng(9)
    ms = [spd(rng, n) for n in (3, 2, 4)]
    b = rng.standard_normal(24)
    np.testing.assert_allclose(KronCholeskySolve(ms).apply(b), np.linalg.solve(kron_dense(ms), b), rtol=1e-11)
