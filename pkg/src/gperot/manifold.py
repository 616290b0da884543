"""Geometry of the product-of-spheres constraint manifold.

Each component wave function lives on the sphere {Re(phi^H M phi) = N_j};
the iterate is the p-frame of all components. Phase rotations of single
components leave the physics unchanged, so distances are measured after
per-component phase alignment against a reference frame.
"""

from __future__ import annotations

import numpy as np

from .core import DegenerateState, MetricSelector, PFrame, Problem


class RetractionError(RuntimeError):
    pass


class AlignmentError(RuntimeError):
    pass


def retract(problem: Problem, Phi: PFrame, Z: np.ndarray) -> PFrame:
    """Columnwise renormalization of Phi + Z back to the mass spheres."""
    M = problem.disc.M
    W = Phi.coefficients + np.asarray(Z, dtype=np.complex128)
    norms2 = np.einsum("ij,ij->j", W.conj(), M @ W).real
    if np.any(norms2 <= 0.0) or not np.all(np.isfinite(norms2)):
        raise RetractionError("retraction undefined: zero or non-finite column norm")
    scale = np.sqrt(problem.spec.masses / norms2)
    return PFrame(problem.disc, W * scale)


def project_tangent(problem: Problem, Phi: PFrame, V: np.ndarray) -> np.ndarray:
    """Remove the normal component: v_j - phi_j Re(phi_j^H M v_j)/N_j."""
    c = Phi.coefficients
    g = np.einsum("ij,ij->j", c.conj(), problem.disc.M @ np.asarray(V)).real
    return V - c * (g / problem.spec.masses)


def project_horizontal(problem: Problem, Phi: PFrame, V: np.ndarray) -> np.ndarray:
    """Remove the full complex Gram component, annihilating phase directions i*phi_j."""
    c = Phi.coefficients
    g = np.einsum("ij,ij->j", c.conj(), problem.disc.M @ np.asarray(V))
    return V - c * (g / problem.spec.masses)


def riemannian_grad(problem: Problem, Phi: PFrame, sel: MetricSelector,
                    rel_tol: float = 1e-10, A=None, lam=None, phi_quad=None,
                    warm=None):
    """Metric gradient of the energy at Phi.

    Returns (grad, sigma, cg_iters) with grad_j = y_j - u_j sigma_j where
    y = G^{-1}(A Phi), u = G^{-1}(M Phi) and sigma_j = Re(phi^H M y_j)/Re(phi^H M u_j).
    For the energy-adaptive metric G = A the first solve is exact: y = Phi.
    warm, if given, is a dict carrying the previous solves "Y"/"U" as inner
    CG starting guesses; it is updated in place.
    """
    A = A if A is not None else problem.assemble_A(Phi)
    c = Phi.coefficients
    M = problem.disc.M
    MPhi = M @ c
    iters = 0
    warm = warm if warm is not None else {}
    if sel.variant == "energy_adaptive":
        Y = c
    else:
        lam = lam if lam is not None else problem.lagrange_multipliers(Phi, A)
        phi_quad = phi_quad if phi_quad is not None else Phi.quad_values()
        APhi = np.column_stack([A[j] @ c[:, j] for j in range(Phi.p)])
        Y, it = problem.solve_metric(Phi, sel, APhi, rel_tol, A=A, lam=lam,
                                     phi_quad=phi_quad, X0=warm.get("Y"))
        warm["Y"] = Y
        iters += it
    U, it = problem.solve_metric(Phi, sel, MPhi, rel_tol, A=A, lam=lam,
                                 phi_quad=phi_quad, X0=warm.get("U"))
    warm["U"] = U
    iters += it
    num = np.einsum("ij,ij->j", MPhi.conj(), Y).real
    den = np.einsum("ij,ij->j", MPhi.conj(), U).real
    if np.any(np.abs(den) < 1e-300):
        raise DegenerateState("vanishing Gram denominator in gradient computation")
    sigma = num / den
    return Y - U * sigma, sigma, iters


def phase_align(problem: Problem, V: np.ndarray, Ref: PFrame):
    """Rotate each column of V by a unimodular factor to have a real positive
    M-weighted Gram against the reference column. Returns (aligned, theta)."""
    g = np.einsum("ij,ij->j", Ref.coefficients.conj(),
                  problem.disc.M @ np.asarray(V, dtype=np.complex128))
    mags = np.abs(g)
    if np.any(mags == 0.0):
        raise AlignmentError("phase alignment undefined: zero Gram entry")
    theta = g.conj() / mags
    return np.asarray(V) * theta, theta


def aligned_distance(problem: Problem, Phi: PFrame, Ref: PFrame, norm: str = "L") -> float:
    """Norm of the phase-aligned difference between two frames.

    norm: "L" = mass norm, "H" = (mass + stiffness) norm, "R" = the
    rotation-and-potential weighted energy norm of the linear operators.
    """
    aligned, _ = phase_align(problem, Phi.coefficients, Ref)
    D = aligned - Ref.coefficients
    d = problem.disc
    if norm == "L":
        return float(np.sqrt(np.einsum("ij,ij->", D.conj(), d.M @ D).real))
    if norm == "H":
        G = d.M + d.S
        return float(np.sqrt(np.einsum("ij,ij->", D.conj(), G @ D).real))
    if norm == "R":
        s = sum(np.vdot(D[:, j], problem.A0[j] @ D[:, j]).real for j in range(Phi.p))
        return float(np.sqrt(max(s, 0.0)))
    raise ValueError("norm must be 'L', 'H' or 'R'")
