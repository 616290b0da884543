"""Eigenvalue diagnostics: component spectra, projected Hessians, rate bounds.

Conjugation-dependent (real-linear) operators are eigendecomposed in the
real 2n embedding: a complex vector v maps to the stacked real vector
(Re v, Im v), and a Hermitian matrix maps to a symmetric real block matrix.
Constraints are handled by LOBPCG deflation in the pencil inner product.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, lobpcg

from . import fem
from .core import MetricSelector, PFrame, Problem
from .linalg import stack_real, unstack_real


@dataclass
class EigReport:
    eigenvalues: np.ndarray      # ascending
    eigenvectors: np.ndarray     # columns, normalized in the pencil B-norm
    residuals: np.ndarray        # per-pair ||Op v - lambda B v|| / ||v||

    def __iter__(self):
        return iter(self.eigenvalues)


@dataclass
class RatePrediction:
    tau: float
    eta_inf: float
    eta_sup: float

    @property
    def rho(self) -> float:
        return max(1.0 - self.tau * self.eta_inf, self.tau * self.eta_sup - 1.0)

    @property
    def admissible(self) -> bool:
        return 0.0 < self.tau < 2.0 / self.eta_sup

    @property
    def tau_interval(self) -> tuple:
        return (0.0, 2.0 / self.eta_sup)


def predicted_rate(tau: float, eta_inf: float, eta_sup: float) -> RatePrediction:
    if not 0.0 < eta_inf <= eta_sup:
        raise ValueError("need 0 < eta_inf <= eta_sup")
    return RatePrediction(tau=tau, eta_inf=eta_inf, eta_sup=eta_sup)


def _lobpcg_run(Aop, Bop, X0, prec=None, Y=None, largest=False, tol=1e-9,
                maxiter=2000):
    # near-tolerance exit warnings are uninformative here; eigenpair
    # residuals are reported explicitly instead
    with np.errstate(all="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        vals, vecs = lobpcg(Aop, X0, B=Bop, M=prec, Y=Y, largest=largest,
                            tol=tol, maxiter=maxiter)
    order = np.argsort(vals)
    return vals[order], vecs[:, order]


def _residuals(Aop, Bop, vals, vecs):
    out = np.empty(vals.size)
    for i in range(vals.size):
        v = vecs[:, i]
        out[i] = np.linalg.norm(Aop @ v - vals[i] * (Bop @ v)) / np.linalg.norm(v)
    return out


def eigs_component_A(problem: Problem, Phi: PFrame, j: int, k: int,
                     tol: float = 1e-9, seed: int = 0, A=None,
                     maxiter: int = 3000) -> EigReport:
    """k smallest eigenpairs of the complex Hermitian pencil (A_j(Phi), M)."""
    A = A if A is not None else problem.assemble_A(Phi)
    Aj = A[j]
    M = problem.disc.M
    n = problem.disc.n
    prec = LinearOperator((n, n), matvec=problem.preconditioner(j).apply,
                          dtype=np.complex128)
    rng = np.random.default_rng(seed)
    block = max(k + 3, 6)
    X0 = rng.standard_normal((n, block)) + 1j * rng.standard_normal((n, block))
    X0[:, 0] = Phi.coefficients[:, j]
    vals, vecs = _lobpcg_run(Aj, M, X0, prec=prec, largest=False, tol=tol,
                             maxiter=maxiter)
    vals, vecs = vals[:k], vecs[:, :k]
    return EigReport(vals, vecs, _residuals(Aj, M, vals, vecs))


def _embedded_ops(problem: Problem, apply_complex, j: int):
    """Real 2n embedding of a real-linear complex-storage operator and of M."""
    n = problem.disc.n
    M = problem.disc.M

    def amat(x):
        return stack_real(apply_complex(unstack_real(np.ravel(x))))

    def mmat(x):
        return stack_real(M @ unstack_real(np.ravel(x)))

    def pmat(x):
        return stack_real(problem.preconditioner(j).apply(unstack_real(np.ravel(x))))

    Aop = LinearOperator((2 * n, 2 * n), matvec=amat, dtype=float)
    Bop = LinearOperator((2 * n, 2 * n), matvec=mmat, dtype=float)
    Pop = LinearOperator((2 * n, 2 * n), matvec=pmat, dtype=float)
    return Aop, Bop, Pop


def eigs_projected_hessian(problem: Problem, Phi: PFrame, j: int, k: int,
                           tol: float = 1e-9, seed: int = 0, A=None,
                           maxiter: int = 3000) -> EigReport:
    """k smallest eigenpairs of F_j v = A_j v + B_jj(v, phi_j) against M,
    restricted to the sphere tangent space {Re(phi_j^H M v) = 0}."""
    A = A if A is not None else problem.assemble_A(Phi)
    d = problem.disc
    n = d.n
    phi = Phi.coefficients[:, j]
    phi_q = np.asarray(fem.eval_quadrature(d, phi))
    kappa = problem.spec.interaction[j, j]
    Aj = A[j]

    def apply_F(v):
        out = Aj @ v
        if kappa != 0.0:
            vq = np.asarray(fem.eval_quadrature(d, v))
            re_pv = (phi_q * vq.conj()).real
            out = out + fem.assemble_load(d, 2.0 * kappa * re_pv * phi_q)
        return out

    Aop, Bop, Pop = _embedded_ops(problem, apply_F, j)
    # tangent constraint Re((M phi)^H v) = 0 <=> emb(M phi) . emb(v) = 0;
    # with pencil weight M the deflation vector is emb(phi)
    Y = stack_real(phi)[:, None]
    rng = np.random.default_rng(seed)
    block = max(k + 3, 6)
    X0 = rng.standard_normal((2 * n, block))
    X0[:, 0] = stack_real(1j * phi)
    vals, vecs = _lobpcg_run(Aop, Bop, X0, prec=Pop, Y=Y, largest=False,
                             tol=tol, maxiter=maxiter)
    vals, vecs = vals[:k], vecs[:, :k]
    return EigReport(vals, vecs, _residuals(Aop, Bop, vals, vecs))


def _frame_stack(V: np.ndarray) -> np.ndarray:
    return stack_real(np.asarray(V).ravel(order="F"))


def _frame_unstack(x: np.ndarray, n: int, p: int) -> np.ndarray:
    return unstack_real(x).reshape((n, p), order="F")


def eigs_horizontal_pencil(problem: Problem, Phi: PFrame, sel: MetricSelector,
                           which: str = "smallest", k: int = 2,
                           tol: float = 1e-8, seed: int = 0,
                           maxiter: int = 3000) -> EigReport:
    """Extreme eigenvalues of the Lagrangian Hessian against the metric G,
    restricted to the horizontal space {phi_j^H M v_j = 0 for all j}.

    These set the contraction factor of the descent iteration.
    """
    d = problem.disc
    n, p = d.n, problem.spec.p
    A = problem.assemble_A(Phi)
    lam = problem.lagrange_multipliers(Phi, A)
    phi_quad = Phi.quad_values()
    M = d.M
    dim = 2 * n * p

    def hess(x):
        V = _frame_unstack(np.ravel(x), n, p)
        return _frame_stack(problem.apply_hess_lagrangian(Phi, lam, V, A=A,
                                                          phi_quad=phi_quad))

    def metric(x):
        V = _frame_unstack(np.ravel(x), n, p)
        return _frame_stack(problem.apply_metric(Phi, sel, V, A=A, lam=lam,
                                                 phi_quad=phi_quad))

    def prec(x):
        V = _frame_unstack(np.ravel(x), n, p)
        out = np.column_stack([problem.preconditioner(j).apply(V[:, j])
                               for j in range(p)])
        return _frame_stack(out)

    Aop = LinearOperator((dim, dim), matvec=hess, dtype=float)
    Bop = LinearOperator((dim, dim), matvec=metric, dtype=float)
    Pop = LinearOperator((dim, dim), matvec=prec, dtype=float)

    # horizontal constraints: per component both Re and Im of phi_j^H M v_j
    # vanish; deflation vectors are G^{-1} of the M-weighted constraint frames
    C = []
    for j in range(p):
        for vec in (Phi.coefficients[:, j], 1j * Phi.coefficients[:, j]):
            rhs = np.zeros((n, p), dtype=np.complex128)
            rhs[:, j] = M @ vec
            sol, _ = problem.solve_metric(Phi, sel, rhs, rel_tol=1e-12,
                                          A=A, lam=lam, phi_quad=phi_quad)
            C.append(_frame_stack(sol))
    Y = np.column_stack(C)

    rng = np.random.default_rng(seed)
    block = max(k + 3, 6)
    X0 = rng.standard_normal((dim, block))
    largest = which == "largest"
    vals, vecs = _lobpcg_run(Aop, Bop, X0, prec=None if largest else Pop,
                             Y=Y, largest=largest, tol=tol, maxiter=maxiter)
    if largest:
        vals, vecs = vals[-k:], vecs[:, -k:]
    else:
        vals, vecs = vals[:k], vecs[:, :k]
    return EigReport(vals, vecs, _residuals(Aop, Bop, vals, vecs))


def _metric_extremes(problem: Problem, Phi: PFrame, j: int, omega: float,
                     A, lam, phi_quad, tol: float = 1e-7, seed: int = 0,
                     maxiter: int = 2000):
    """Extreme eigenvalues of the pencil (A_j + B_jj - omega lambda_j M, M)."""
    d = problem.disc
    phi_q = phi_quad[j]
    kappa = problem.spec.interaction[j, j]
    Aj = A[j]
    M = d.M
    shift = omega * lam[j]

    def apply_G(v):
        out = Aj @ v - shift * (M @ v)
        if kappa != 0.0:
            vq = np.asarray(fem.eval_quadrature(d, v))
            re_pv = (phi_q * vq.conj()).real
            out = out + fem.assemble_load(d, 2.0 * kappa * re_pv * phi_q)
        return out

    Aop, Bop, Pop = _embedded_ops(problem, apply_G, j)
    n2 = 2 * d.n
    rng = np.random.default_rng(seed)
    X0 = rng.standard_normal((n2, 4))
    lo, _ = _lobpcg_run(Aop, Bop, X0.copy(), prec=Pop, largest=False,
                        tol=tol, maxiter=maxiter)
    hi, _ = _lobpcg_run(Aop, Bop, X0.copy(), prec=None, largest=True,
                        tol=tol, maxiter=maxiter)
    return lo[0], hi[-1]


def condition_sweep(problem: Problem, Phi: PFrame, omega_list,
                    tol: float = 1e-7, seed: int = 0) -> list:
    """Mass-pencil condition numbers of the Lagrangian metric per component.

    Returns [(omega, [kappa_j or None, ...]), ...]; None marks an indefinite
    metric (smallest pencil eigenvalue nonpositive). omega = 0 gives the
    unshifted diagonal Hessian block A_j + B_jj.
    """
    A = problem.assemble_A(Phi)
    lam = problem.lagrange_multipliers(Phi, A)
    phi_quad = Phi.quad_values()
    out = []
    for omega in omega_list:
        kappas = []
        for j in range(problem.spec.p):
            lo, hi = _metric_extremes(problem, Phi, j, omega, A, lam,
                                      phi_quad, tol=tol, seed=seed)
            kappas.append(hi / lo if lo > 0.0 else None)
        out.append((float(omega), kappas))
    return out
