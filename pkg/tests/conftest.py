import numpy as np
import pytest

from gperot import Problem, preset
from gperot.core import PFrame
from gperot.model import Component, ModelSpec, Potential

import oracles


@pytest.fixture(scope="session")
def spec_m2():
    return preset("model1").with_mesh(2)


@pytest.fixture(scope="session")
def problem_m2(spec_m2):
    return Problem(spec_m2)


@pytest.fixture(scope="session")
def dense_m2(spec_m2):
    return oracles.dense_operators(spec_m2, q=10)


@pytest.fixture(scope="session")
def spec_m4():
    return preset("model1").with_mesh(4)


@pytest.fixture(scope="session")
def problem_m4(spec_m4):
    return Problem(spec_m4)


def single_component_spec(m=4, kappa=10.0, omega_rot=-0.8):
    """Small one-component model used for toy eigenvalue/rate studies."""
    comp = Component(mass=1.0, frequency=omega_rot,
                     potential=Potential(a=0.5, b=0.5))
    return ModelSpec(domain=(-8.0, 8.0, -8.0, 8.0), elements_per_dir=m,
                     components=(comp,),
                     interaction=np.array([[kappa]]))


@pytest.fixture(scope="session")
def spec_toy1():
    return single_component_spec(m=4)


@pytest.fixture(scope="session")
def problem_toy1(spec_toy1):
    return Problem(spec_toy1)


@pytest.fixture(scope="session")
def ground_toy1(spec_toy1, problem_toy1):
    """Converged single-component toy ground state (m=4)."""
    from gperot.optimize import RunOptions, StepRule, run
    opts = RunOptions(method="lagr", omega=0.9, step=StepRule.fixed(1.0),
                      stop_residual=1e-13, max_iters=3000)
    res = run(spec_toy1, opts, problem=problem_toy1)
    assert res.converged
    return res


@pytest.fixture(scope="session")
def ground_m4(spec_m4, problem_m4):
    """Converged two-component model at the coarse m=4 mesh."""
    from gperot.optimize import RunOptions, StepRule, run
    opts = RunOptions(method="lagr", omega=0.9, step=StepRule.fixed(1.0),
                      stop_residual=3e-12, max_iters=8000)
    res = run(spec_m4, opts, problem=problem_m4)
    assert res.converged
    return res


def random_feasible_frame(problem, seed=0):
    rng = np.random.default_rng(seed)
    n, p = problem.disc.n, problem.spec.p
    C = rng.standard_normal((n, p)) + 1j * rng.standard_normal((n, p))
    M = problem.disc.M
    for j in range(p):
        nrm = np.sqrt(np.vdot(C[:, j], M @ C[:, j]).real)
        C[:, j] *= np.sqrt(problem.spec.masses[j]) / nrm
    return PFrame(problem.disc, C)
