import numpy as np
import pytest
import scipy.sparse as sp

from gperot import Problem, preset
from gperot.linalg import (ILU0, check_hermitian, embed_real, solve_pcg,
                           stack_real, unstack_real)


def random_hermitian_pd(n, rng, shift=1.0):
    B = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return B @ B.conj().T / n + shift * np.eye(n)


def test_check_hermitian():
    rng = np.random.default_rng(0)
    A = sp.csr_matrix(random_hermitian_pd(8, rng))
    check_hermitian(A)
    A2 = A.copy().tolil()
    A2[0, 1] += 1.0
    with pytest.raises(ValueError):
        check_hermitian(A2.tocsr())


def test_stack_unstack_roundtrip():
    rng = np.random.default_rng(1)
    v = rng.standard_normal(10) + 1j * rng.standard_normal(10)
    assert np.array_equal(unstack_real(stack_real(v)), v)


def test_embed_real_is_symmetric_for_hermitian():
    rng = np.random.default_rng(2)
    A = random_hermitian_pd(6, rng)
    E = embed_real(A)
    assert np.allclose(E, E.T)
    v = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    assert np.allclose(E @ stack_real(v), stack_real(A @ v))


def test_ilu0_diagonal_matrix_exact():
    d = np.array([2.0, 3.0, 5.0, 7.0])
    A = sp.diags(d).tocsr()
    P = ILU0(A)
    rng = np.random.default_rng(3)
    z = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    assert np.allclose(P.apply(z), z / d)


def test_ilu0_tridiagonal_is_exact_lu():
    # no fill occurs for a tridiagonal matrix, so ILU0 solves exactly
    n = 30
    A = sp.diags([-np.ones(n - 1), 4.0 * np.ones(n), -np.ones(n - 1)],
                 [-1, 0, 1]).tocsr()
    P = ILU0(A)
    rng = np.random.default_rng(4)
    b = rng.standard_normal(n)
    x = P.apply(b)
    assert np.linalg.norm(A @ x - b) < 1e-12 * np.linalg.norm(b)


def test_ilu0_rejects_zero_diagonal():
    A = sp.csr_matrix(np.array([[1.0, 2.0], [3.0, 0.0]]))
    with pytest.raises(ValueError, match="row 1"):
        ILU0(A)


def test_ilu0_reduces_cg_iterations_on_model_operator():
    problem = Problem(preset("model1").with_mesh(16))
    A = problem.A0[0]
    rng = np.random.default_rng(5)
    b = rng.standard_normal(A.shape[0]) + 1j * rng.standard_normal(A.shape[0])
    _, plain = solve_pcg(A, b, prec=None, rel_tol=1e-8, max_iter=20000)
    _, pre = solve_pcg(A, b, prec=ILU0(A), rel_tol=1e-8, max_iter=20000)
    assert plain.breakdown is None and pre.breakdown is None
    assert pre.iterations < plain.iterations


def test_pcg_identity_converges_immediately():
    b = np.array([1.0 + 2.0j, -3.0, 0.5j])
    x, rep = solve_pcg(np.eye(3), b, rel_tol=1e-12)
    assert np.allclose(x, b)
    assert rep.iterations <= 1


def test_pcg_matches_dense_solve():
    rng = np.random.default_rng(6)
    A = random_hermitian_pd(20, rng)
    b = rng.standard_normal(20) + 1j * rng.standard_normal(20)
    x, rep = solve_pcg(A, b, rel_tol=1e-10, max_iter=500)
    assert rep.breakdown is None
    assert np.linalg.norm(x - np.linalg.solve(A, b)) \
        < 1e-9 * np.linalg.norm(b)


def test_pcg_detects_indefiniteness():
    b = np.ones(5, dtype=complex)
    x, rep = solve_pcg(-np.eye(5), b, rel_tol=1e-10)
    assert rep.breakdown == "indefinite"


def test_pcg_stagnation_flag():
    rng = np.random.default_rng(7)
    A = random_hermitian_pd(40, rng, shift=1e-8)
    b = rng.standard_normal(40) + 1j * rng.standard_normal(40)
    _, rep = solve_pcg(A, b, rel_tol=1e-14, max_iter=2)
    assert rep.breakdown == "stagnation"


def test_pcg_real_embedding_equivalence():
    # complex-linear Hermitian solve agrees between native complex inner
    # product and the explicit stacked real embedding
    rng = np.random.default_rng(8)
    A = random_hermitian_pd(15, rng)
    b = rng.standard_normal(15) + 1j * rng.standard_normal(15)
    x_c, rep_c = solve_pcg(A, b, rel_tol=1e-12, max_iter=500, inner="complex")
    E = embed_real(A)
    x_r, rep_r = solve_pcg(lambda v: unstack_real(E @ stack_real(v)), b,
                           rel_tol=1e-12, max_iter=500, inner="real")
    assert rep_c.breakdown is None and rep_r.breakdown is None
    assert np.linalg.norm(x_c - x_r) < 1e-10 * np.linalg.norm(b)


def test_pcg_monotone_in_a_norm():
    rng = np.random.default_rng(9)
    A = random_hermitian_pd(30, rng)
    b = rng.standard_normal(30) + 1j * rng.standard_normal(30)
    x_star = np.linalg.solve(A, b)
    errs = []
    for iters in range(1, 12):
        x, _ = solve_pcg(A, b, rel_tol=0.0, max_iter=iters)
        e = x - x_star
        errs.append(np.vdot(e, A @ e).real)
    for a, bb in zip(errs, errs[1:]):
        assert bb <= a * (1.0 + 1e-10)


def test_preconditioner_does_not_move_fixed_point():
    rng = np.random.default_rng(10)
    A = sp.csr_matrix(random_hermitian_pd(25, rng))
    b = rng.standard_normal(25) + 1j * rng.standard_normal(25)
    x1, _ = solve_pcg(A, b, rel_tol=1e-12, max_iter=1000)
    x2, _ = solve_pcg(A, b, prec=ILU0(A), rel_tol=1e-12, max_iter=1000)
    assert np.linalg.norm(x1 - x2) < 1e-9 * np.linalg.norm(b)
