"""Riemannian gradient descent drivers with fixed, exact and adaptive step sizes.

Two methods are provided: energy-adaptive descent ("earg", metric G = A)
and Lagrangian-metric descent ("lagr", metric G_j = A_j + B_jj - omega
lambda_j M). Runs warm-start with energy-adaptive steps of size 1 until the
residual is moderate, then switch to the requested method.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import fem
from .core import IndefiniteMetric, MetricSelector, PFrame, Problem
from .manifold import retract, riemannian_grad
from .model import ModelSpec


@dataclass(frozen=True)
class StepRule:
    variant: str            # "fixed" | "line_search" | "adaptive"
    tau: float = 1.0        # fixed value, or tau_0 for the first adaptive step
    tau_min: float = 0.1
    tau_max: float = 10.0
    grid_points: int = 64
    refine_rel_tol: float = 1e-6

    def __post_init__(self):
        if self.variant not in ("fixed", "line_search", "adaptive"):
            raise ValueError(f"unknown step rule {self.variant!r}")
        if not 0.0 < self.tau_min < self.tau_max:
            raise ValueError("need 0 < tau_min < tau_max")

    @classmethod
    def fixed(cls, tau: float) -> "StepRule":
        return cls("fixed", tau=tau)

    @classmethod
    def line_search(cls, tau_min: float = 0.1, tau_max: float = 10.0) -> "StepRule":
        return cls("line_search", tau_min=tau_min, tau_max=tau_max)

    @classmethod
    def adaptive(cls, tau0: float = 1.0) -> "StepRule":
        return cls("adaptive", tau=tau0)


@dataclass
class RunOptions:
    method: str = "earg"                    # "earg" | "lagr"
    omega: float = 0.9                      # only for "lagr"
    step: StepRule = field(default_factory=lambda: StepRule.fixed(1.0))
    stop_residual: float = 1e-14
    max_iters: int = 10000
    tol_cg: float = 1e-8                    # inner tolerance factor: rel_tol = r_k * tol_cg
    warm_start_residual: float = 1e-2
    warm_start_max_iters: int = 1000
    record_every: int = 1
    fallback: str = "earg_step"             # "earg_step" | "halve_omega"
    keep_iterates: bool = False

    def metric(self) -> MetricSelector:
        if self.method == "earg":
            return MetricSelector.energy_adaptive()
        if self.method == "lagr":
            return MetricSelector.lagrangian(self.omega)
        raise ValueError(f"unknown method {self.method!r}")


@dataclass
class IterationRecord:
    k: int
    energy: float
    residual: float
    tau: float
    cg_iters: int
    wall_ms: float


@dataclass
class RunResult:
    frame: PFrame
    multipliers: np.ndarray
    history: list
    termination: str                        # "converged" | "max_iters" | "metric_indefinite"
    iterates: list = field(default_factory=list)

    @property
    def energy(self) -> float:
        return self.history[-1].energy

    @property
    def residual(self) -> float:
        return self.history[-1].residual

    @property
    def converged(self) -> bool:
        return self.termination == "converged"


def initial_guess(problem: Problem) -> PFrame:
    """Constant one on all interior nodes, each column normalized to its mass."""
    ones = np.ones((problem.disc.n, problem.spec.p), dtype=np.complex128)
    return retract(problem, PFrame(problem.disc, ones), 0.0)


def _mnorm2(problem: Problem, V: np.ndarray) -> float:
    return float(np.einsum("ij,ij->", np.conj(V), problem.disc.M @ V).real)


def step(problem: Problem, Phi: PFrame, sel: MetricSelector, tau: float,
         rel_tol: float = 1e-10, A=None) -> PFrame:
    """One descent step Phi -> retract(Phi - tau * grad)."""
    grad, _, _ = riemannian_grad(problem, Phi, sel, rel_tol, A=A)
    return retract(problem, Phi, -tau * grad)


class _LineSearchObjective:
    """Cached evaluation of tau -> E(retract(Phi - tau * direction)).

    Quadratic forms of the linear operators and quadrature values of Phi and
    the direction are computed once; each evaluation is then a handful of
    polynomial evaluations, independent of the matrix sizes.
    """

    def __init__(self, problem: Problem, Phi: PFrame, direction: np.ndarray):
        d = problem.disc
        p = problem.spec.p
        c = Phi.coefficients
        g = np.asarray(direction, dtype=np.complex128)
        self.K = problem.spec.interaction
        self.N = problem.spec.masses
        self.p = p

        self.aff = np.empty(p)
        self.afg = np.empty(p)
        self.agg = np.empty(p)
        self.mff = np.empty(p)
        self.mfg = np.empty(p)
        self.mgg = np.empty(p)
        for j in range(p):
            A0f = problem.A0[j] @ c[:, j]
            A0g = problem.A0[j] @ g[:, j]
            Mf = d.M @ c[:, j]
            Mg = d.M @ g[:, j]
            self.aff[j] = np.vdot(c[:, j], A0f).real
            self.afg[j] = np.vdot(g[:, j], A0f).real
            self.agg[j] = np.vdot(g[:, j], A0g).real
            self.mff[j] = np.vdot(c[:, j], Mf).real
            self.mfg[j] = np.vdot(g[:, j], Mf).real
            self.mgg[j] = np.vdot(g[:, j], Mg).real

        # density fields of phi - tau*g: |.|^2 = F0 - 2 tau F1 + tau^2 F2
        w = d.quad.global_weights
        F = np.empty((p, 3, w.size))
        for j in range(p):
            fq = np.asarray(fem.eval_quadrature(d, c[:, j]))
            gq = np.asarray(fem.eval_quadrature(d, g[:, j]))
            F[j, 0] = np.abs(fq) ** 2
            F[j, 1] = (fq * gq.conj()).real
            F[j, 2] = np.abs(gq) ** 2
        # pair table T[i,a,j,b] = int F[i,a] F[j,b]
        self.T = np.einsum("iaq,q,jbq->iajb", F, w, F)
        self.c_of_tau = lambda t: np.array([1.0, -2.0 * t, t * t])

    def __call__(self, tau: float) -> float:
        ct = self.c_of_tau(tau)
        # squared mass norms of the unnormalized columns and the rescalings
        m = self.mff - 2.0 * tau * self.mfg + tau * tau * self.mgg
        if np.any(m <= 0.0):
            return np.inf
        s2 = self.N / m
        quad = self.aff - 2.0 * tau * self.afg + tau * tau * self.agg
        e = 0.5 * float(np.sum(s2 * quad))
        Q = np.einsum("a,b,iajb->ij", ct, ct, self.T)
        e += 0.25 * float(np.einsum("i,j,ij,ij->", s2, s2, self.K, Q))
        return e


def exact_line_search(problem: Problem, Phi: PFrame, direction: np.ndarray,
                      rule: StepRule) -> float:
    """Minimize E along the retracted ray over [tau_min, tau_max]."""
    obj = _LineSearchObjective(problem, Phi, direction)
    taus = np.geomspace(rule.tau_min, rule.tau_max, rule.grid_points)
    vals = np.array([obj(t) for t in taus])
    i = int(np.argmin(vals))
    lo = taus[max(i - 1, 0)]
    hi = taus[min(i + 1, taus.size - 1)]
    # golden-section refinement
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = obj(x1), obj(x2)
    while (b - a) > rule.refine_rel_tol * max(a, rule.tau_min):
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = obj(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = obj(x2)
    return float(np.clip(0.5 * (a + b), rule.tau_min, rule.tau_max))


def choose_step(problem: Problem, rule: StepRule, Phi: PFrame, grad: np.ndarray,
                prev_phi=None, prev_grad=None, prev_tau: float | None = None) -> float:
    if rule.variant == "fixed":
        return rule.tau
    if rule.variant == "line_search":
        return exact_line_search(problem, Phi, grad, rule)
    # adaptive: norm quotient of state and gradient increments
    if prev_phi is None or prev_grad is None:
        return prev_tau if prev_tau is not None else rule.tau
    num = np.sqrt(_mnorm2(problem, Phi.coefficients - prev_phi))
    den = np.sqrt(_mnorm2(problem, grad - prev_grad))
    if den == 0.0:
        return prev_tau if prev_tau is not None else rule.tau
    return num / den


def run(spec: ModelSpec, options: RunOptions, problem: Problem | None = None,
        start: PFrame | None = None) -> RunResult:
    """Full descent run: warm start, main iteration, telemetry.

    max_iters counts main-phase iterations only; the warm start has its own
    cap. Inner CG tolerances follow the residual: rel_tol = r_k * tol_cg,
    clipped to [1e-14, 0.1].
    """
    problem = problem if problem is not None else Problem(spec)
    Phi = start if start is not None else initial_guess(problem)
    sel_main = options.metric()
    ea = MetricSelector.energy_adaptive()

    history: list = []
    iterates: list = []
    t0 = time.perf_counter()
    prev_phi = prev_grad = None
    tau_used = 0.0
    cg_used = 0
    omega = options.omega
    warm_caches: dict = {}
    force_ea_steps = 0
    k = 0
    main_iters = 0
    warm = True
    termination = "max_iters"

    while True:
        A = problem.assemble_A(Phi)
        lam = problem.lagrange_multipliers(Phi, A)
        r, _ = problem.residual(Phi, A, lam)
        E = problem.energy(Phi)
        if k % options.record_every == 0 or r < options.stop_residual:
            history.append(IterationRecord(
                k=k, energy=E, residual=r, tau=tau_used, cg_iters=cg_used,
                wall_ms=1e3 * (time.perf_counter() - t0)))
        if options.keep_iterates:
            iterates.append(Phi)

        if warm and r < options.warm_start_residual:
            warm = False
        if not warm and r < options.stop_residual:
            termination = "converged"
            break
        if warm and k >= options.warm_start_max_iters:
            termination = "max_iters"
            break
        if not warm and main_iters >= options.max_iters:
            termination = "max_iters"
            break

        if warm or force_ea_steps > 0:
            sel, rule = ea, StepRule.fixed(1.0)
            if force_ea_steps > 0:
                force_ea_steps -= 1
        elif sel_main.variant == "lagrangian":
            sel, rule = MetricSelector.lagrangian(omega), options.step
        else:
            sel, rule = sel_main, options.step

        rel_tol = float(np.clip(r * options.tol_cg, 1e-14, 1e-1))
        try:
            cache = warm_caches.setdefault((sel.variant, sel.omega), {})
            grad, _, cg_used = riemannian_grad(problem, Phi, sel, rel_tol, A=A,
                                               warm=cache)
        except IndefiniteMetric:
            if sel.variant == "energy_adaptive":
                termination = "metric_indefinite"
                break
            if options.fallback == "halve_omega":
                omega = omega / 2.0
            else:
                force_ea_steps = 1
            continue

        tau_used = choose_step(problem, rule, Phi, grad, prev_phi, prev_grad,
                               prev_tau=tau_used if tau_used > 0 else rule.tau)
        prev_phi = Phi.coefficients
        prev_grad = grad
        Phi = retract(problem, Phi, -tau_used * grad)
        k += 1
        if not warm:
            main_iters += 1

    lam = problem.lagrange_multipliers(Phi)
    return RunResult(frame=Phi, multipliers=lam, history=history,
                     termination=termination, iterates=iterates)
