"""Ground states of rotating multicomponent Bose-Einstein condensates.

Riemannian gradient descent on the product-of-spheres constraint manifold
with energy-adaptive or Lagrangian-based metrics, discretized by biquadratic
finite elements.
"""

from .core import (DegenerateState, IndefiniteMetric, MetricSelector, PFrame,
                   Problem)
from .fem import Discretization, build_discretization
from .model import (Component, ConfigurationError, ModelSpec, Potential,
                    preset)
from .optimize import (IterationRecord, RunOptions, RunResult, StepRule,
                       initial_guess, run)
from .spectral import (EigReport, RatePrediction, condition_sweep,
                       eigs_component_A, eigs_horizontal_pencil,
                       eigs_projected_hessian, predicted_rate)

__version__ = "0.1.0"
