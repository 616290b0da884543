"""Discrete Gross-Pitaevskii energy, Hamiltonians, multipliers, residual, metrics.

Real duality convention: a "dual vector" d represents the real-linear
functional w -> Re(w^H d). All second-derivative and metric applications
return dual coefficients under this pairing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import fem
from .fem import Discretization, build_discretization
from .linalg import ILU0, solve_pcg
from .model import ModelSpec


class IndefiniteMetric(RuntimeError):
    """Raised when a metric operator loses positive definiteness during a solve."""

    def __init__(self, component: int, message: str | None = None):
        self.component = component
        super().__init__(message or f"metric operator indefinite for component {component}")


class DegenerateState(RuntimeError):
    """Raised when a Gram denominator in the gradient formula is numerically zero."""


@dataclass(frozen=True)
class MetricSelector:
    """Riemannian metric choice: state-dependent Hamiltonian or Lagrangian-based."""

    variant: str                 # "energy_adaptive" | "lagrangian"
    omega: float = 0.0

    def __post_init__(self):
        if self.variant == "lagrangian":
            if not 0.0 < self.omega < 1.0:
                raise ValueError("lagrangian metric requires omega in (0, 1)")
        elif self.variant != "energy_adaptive":
            raise ValueError(f"unknown metric variant {self.variant!r}")

    @classmethod
    def energy_adaptive(cls) -> "MetricSelector":
        return cls("energy_adaptive")

    @classmethod
    def lagrangian(cls, omega: float) -> "MetricSelector":
        return cls("lagrangian", omega)

    @property
    def is_complex_linear(self) -> bool:
        return self.variant == "energy_adaptive"


class PFrame:
    """n x p complex coefficient array, one column per component."""

    def __init__(self, disc: Discretization, coefficients: np.ndarray):
        coefficients = np.asarray(coefficients, dtype=np.complex128)
        if coefficients.shape != (disc.n, disc.spec.p):
            raise ValueError(
                f"expected shape {(disc.n, disc.spec.p)}, got {coefficients.shape}"
            )
        self.disc = disc
        self.coefficients = coefficients

    @property
    def p(self) -> int:
        return self.coefficients.shape[1]

    def gram(self) -> np.ndarray:
        """Complex diagonal Gram g_j = phi_j^H M phi_j."""
        MPhi = self.disc.M @ self.coefficients
        return np.einsum("ij,ij->j", self.coefficients.conj(), MPhi)

    def is_feasible(self, rtol: float = 1e-10) -> bool:
        N = self.disc.spec.masses
        return bool(np.all(np.abs(self.gram().real - N) <= rtol * N))

    def quad_values(self) -> list:
        """Per-component complex values at all quadrature points."""
        return [fem.eval_quadrature(self.disc, self.coefficients[:, j])
                for j in range(self.p)]


class Problem:
    """Caches the linear operators and preconditioners for one discretization."""

    def __init__(self, spec: ModelSpec, disc: Discretization | None = None, q: int = 4):
        self.spec = spec
        self.disc = disc if disc is not None else build_discretization(spec, q)
        d = self.disc
        self.A0 = [
            (d.S + d.Vmass[j] + 1j * spec.frequencies[j] * d.R).tocsr()
            for j in range(spec.p)
        ]
        self._ilu: list = [None] * spec.p
        # linear-part data on the fixed connectivity pattern, so the
        # density-weighted part can be added per iteration without re-sorting
        self._pat_indptr, self._pat_indices, _, _, _ = fem._assembly_pattern(d)
        self._A0_data = [fem.align_to_pattern(d, A) for A in self.A0]

    def preconditioner(self, j: int) -> ILU0:
        if self._ilu[j] is None:
            self._ilu[j] = ILU0(self.A0[j])
        return self._ilu[j]

    # --- densities and nonlinear assembly -------------------------------

    def densities(self, Phi: PFrame, quad_vals=None) -> np.ndarray:
        """rho_j = sum_i kappa_ij |phi_i|^2 at quadrature points; shape (p, nq_total)."""
        vals = quad_vals if quad_vals is not None else Phi.quad_values()
        dens = np.stack([np.abs(v) ** 2 for v in vals])
        return self.spec.interaction.T @ dens

    def assemble_A(self, Phi: PFrame) -> list:
        """Component Hamiltonians A_j = A0_j + W(rho_j)."""
        rho = self.densities(Phi)
        out = []
        for j in range(self.spec.p):
            if np.any(rho[j]):
                data = self._A0_data[j] + fem.assemble_weighted_mass_data(self.disc, rho[j])
                out.append(sp.csr_matrix((data, self._pat_indices, self._pat_indptr),
                                         shape=(self.disc.n, self.disc.n)))
            else:
                out.append(self.A0[j])
        return out

    # --- energy, multipliers, residual ----------------------------------

    def energy(self, Phi: PFrame) -> float:
        c = Phi.coefficients
        e = 0.0
        for j in range(self.spec.p):
            e += 0.5 * np.vdot(c[:, j], self.A0[j] @ c[:, j]).real
        Q = fem.quartic_interactions(self.disc, c)
        e += 0.25 * float(np.sum(self.spec.interaction * Q))
        return e

    def lagrange_multipliers(self, Phi: PFrame, A=None) -> np.ndarray:
        A = A if A is not None else self.assemble_A(Phi)
        c = Phi.coefficients
        lam = np.array([np.vdot(c[:, j], A[j] @ c[:, j]).real for j in range(self.spec.p)])
        return lam / self.spec.masses

    def residual(self, Phi: PFrame, A=None, lam=None):
        """M-weighted residual norm r and per-component algebraic residuals."""
        A = A if A is not None else self.assemble_A(Phi)
        lam = lam if lam is not None else self.lagrange_multipliers(Phi, A)
        c = Phi.coefficients
        M = self.disc.M
        Rj = [A[j] @ c[:, j] - lam[j] * (M @ c[:, j]) for j in range(self.spec.p)]
        r2 = sum(np.vdot(v, M @ v).real for v in Rj)
        return float(np.sqrt(max(r2, 0.0))), Rj

    # --- second derivative and metrics ----------------------------------

    def apply_B(self, i: int, j: int, vj_quad, ui_quad) -> np.ndarray:
        """Dual coefficients of B_ij(v_j, u_i) given quad values of v_j, phi_j, u_i.

        vj_quad is the precomputed real field Re(phi_j conj(v_j)); ui_quad the
        complex quad values of u_i.
        """
        kappa = self.spec.interaction[i, j]
        if kappa == 0.0:
            return np.zeros(self.disc.n, dtype=np.complex128)
        return fem.assemble_load(self.disc, 2.0 * kappa * vj_quad * ui_quad)

    def apply_hess_lagrangian(self, Phi: PFrame, lam: np.ndarray, V: np.ndarray,
                              A=None, phi_quad=None) -> np.ndarray:
        """Dual coefficients of (D^2 E - diag(lam) x M) applied to V; real-linear in V."""
        A = A if A is not None else self.assemble_A(Phi)
        phi_quad = phi_quad if phi_quad is not None else Phi.quad_values()
        p = self.spec.p
        V = np.asarray(V, dtype=np.complex128)
        v_quad = [fem.eval_quadrature(self.disc, V[:, j]) for j in range(p)]
        re_pv = [np.asarray((phi_quad[j] * v_quad[j].conj()).real) for j in range(p)]
        M = self.disc.M
        out = np.empty_like(V)
        for i in range(p):
            acc = A[i] @ V[:, i] - lam[i] * (M @ V[:, i])
            for j in range(p):
                acc = acc + self.apply_B(i, j, re_pv[j], phi_quad[i])
            out[:, i] = acc
        return out

    def apply_metric(self, Phi: PFrame, sel: MetricSelector, V: np.ndarray,
                     A=None, lam=None, phi_quad=None) -> np.ndarray:
        A = A if A is not None else self.assemble_A(Phi)
        V = np.asarray(V, dtype=np.complex128)
        if sel.variant == "energy_adaptive":
            out = np.empty_like(V)
            for j in range(self.spec.p):
                out[:, j] = A[j] @ V[:, j]
            return out
        lam = lam if lam is not None else self.lagrange_multipliers(Phi, A)
        phi_quad = phi_quad if phi_quad is not None else Phi.quad_values()
        M = self.disc.M
        out = np.empty_like(V)
        for j in range(self.spec.p):
            vq = fem.eval_quadrature(self.disc, V[:, j])
            re_pv = np.asarray((phi_quad[j] * vq.conj()).real)
            out[:, j] = (A[j] @ V[:, j]
                         + self.apply_B(j, j, re_pv, phi_quad[j])
                         - sel.omega * lam[j] * (M @ V[:, j]))
        return out

    def solve_metric(self, Phi: PFrame, sel: MetricSelector, RHS: np.ndarray,
                     rel_tol: float = 1e-10, max_iter: int = 5000,
                     A=None, lam=None, phi_quad=None, X0=None):
        """Componentwise G_j^{-1} rhs_j; returns (n x p array, total CG iterations)."""
        A = A if A is not None else self.assemble_A(Phi)
        RHS = np.asarray(RHS, dtype=np.complex128)
        p = self.spec.p
        out = np.empty_like(RHS)
        total_iters = 0
        if sel.variant == "energy_adaptive":
            for j in range(p):
                x, rep = solve_pcg(A[j], RHS[:, j], prec=self.preconditioner(j),
                                   rel_tol=rel_tol, max_iter=max_iter, inner="complex",
                                   x0=None if X0 is None else X0[:, j])
                if rep.breakdown == "indefinite":
                    raise IndefiniteMetric(j)
                out[:, j] = x
                total_iters += rep.iterations
            return out, total_iters
        lam = lam if lam is not None else self.lagrange_multipliers(Phi, A)
        phi_quad = phi_quad if phi_quad is not None else Phi.quad_values()
        M = self.disc.M
        for j in range(p):
            pq = phi_quad[j]
            Aj, lj = A[j], lam[j]
            kappa = self.spec.interaction[j, j]

            def matvec(v, Aj=Aj, lj=lj, pq=pq, kappa=kappa):
                vq = fem.eval_quadrature(self.disc, v)
                re_pv = np.asarray((pq * vq.conj()).real)
                Bv = fem.assemble_load(self.disc, 2.0 * kappa * re_pv * pq) \
                    if kappa != 0.0 else 0.0
                return Aj @ v + Bv - sel.omega * lj * (M @ v)

            x, rep = solve_pcg(matvec, RHS[:, j], prec=self.preconditioner(j),
                               rel_tol=rel_tol, max_iter=max_iter, inner="real",
                               x0=None if X0 is None else X0[:, j])
            if rep.breakdown == "indefinite":
                raise IndefiniteMetric(j)
            out[:, j] = x
            total_iters += rep.iterations
        return out, total_iters
