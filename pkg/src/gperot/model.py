"""Physical model description: domain, components, trapping potentials, interactions."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


class ConfigurationError(ValueError):
    """Raised when a model specification violates its structural assumptions."""


@dataclass(frozen=True)
class Potential:
    """Trapping potential V(x, y) = a x^2 + b y^2 + c sin^2(alpha x) + d sin^2(beta y).

    All of a, b, c, d must be nonnegative, which makes V >= 0 on the whole
    plane. This parametric family covers harmonic traps plus optical-lattice
    style sin^2 modulations.
    """

    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    d: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        if min(self.a, self.b, self.c, self.d) < 0.0:
            raise ConfigurationError("potential coefficients a, b, c, d must be >= 0")

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        v = self.a * x**2 + self.b * y**2
        if self.c != 0.0:
            v = v + self.c * np.sin(self.alpha * x) ** 2
        if self.d != 0.0:
            v = v + self.d * np.sin(self.beta * y) ** 2
        return v


@dataclass(frozen=True)
class Component:
    """One condensate species: particle number, rotation frequency, trap."""

    mass: float
    frequency: float
    potential: Potential
    # margin eps_j in the trap-dominates-rotation check
    # V_j(x) - (1+eps_j)/4 * Omega_j^2 (x^2+y^2) >= 0
    assumption_margin: float = 0.1


@dataclass(frozen=True)
class ModelSpec:
    """Full problem description on an axis-aligned rectangle.

    domain is (ax, bx, ay, by); elements_per_dir is the number of Q2
    elements per coordinate direction.
    """

    domain: tuple[float, float, float, float]
    elements_per_dir: int
    components: tuple[Component, ...]
    interaction: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        K = np.array(self.interaction, dtype=float)
        object.__setattr__(self, "interaction", K)
        self.validate()

    @property
    def p(self) -> int:
        return len(self.components)

    @property
    def masses(self) -> np.ndarray:
        return np.array([c.mass for c in self.components])

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([c.frequency for c in self.components])

    def validate(self) -> None:
        ax, bx, ay, by = self.domain
        if not (bx > ax and by > ay):
            raise ConfigurationError("domain must be a nondegenerate rectangle")
        if self.elements_per_dir < 2:
            raise ConfigurationError("need at least 2 elements per direction")
        if self.p < 1:
            raise ConfigurationError("need at least one component")
        K = self.interaction
        if K.shape != (self.p, self.p):
            raise ConfigurationError(f"interaction matrix must be {self.p}x{self.p}")
        if not np.allclose(K, K.T, rtol=0.0, atol=1e-14 * max(1.0, abs(K).max())):
            raise ConfigurationError("interaction matrix must be symmetric")
        if K.min() < 0.0:
            raise ConfigurationError("interaction matrix entries must be nonnegative")
        for j, comp in enumerate(self.components):
            if comp.mass <= 0.0:
                raise ConfigurationError(f"component {j}: mass must be positive")
            if comp.assumption_margin <= 0.0:
                raise ConfigurationError(f"component {j}: assumption margin must be positive")

    def with_mesh(self, m: int) -> "ModelSpec":
        return replace(self, elements_per_dir=m)

    def single_component(self, j: int) -> "ModelSpec":
        """Reduce to the single species j, keeping only its self-interaction."""
        return replace(
            self,
            components=(self.components[j],),
            interaction=np.array([[self.interaction[j, j]]]),
        )


def preset(name: str) -> ModelSpec:
    """Built-in two- and three-component benchmark models on [-10,10]^2, m=64."""
    domain = (-10.0, 10.0, -10.0, 10.0)
    if name == "model1" or name == "model2":
        # V1 = 3/4((0.8x)^2 + (1.2y)^2), V2 = 1/2((1.2x)^2 + (0.9y)^2)
        comps = (
            Component(mass=2.0, frequency=-1.0, potential=Potential(a=0.75 * 0.64, b=0.75 * 1.44)),
            Component(mass=1.0, frequency=-1.2, potential=Potential(a=0.5 * 1.44, b=0.5 * 0.81)),
        )
        k12 = 20.0 if name == "model1" else 60.0
        K = np.array([[120.0, k12], [k12, 100.0]])
        return ModelSpec(domain, 64, comps, K)
    if name == "model3":
        comps = (
            Component(mass=2.0, frequency=-1.0, potential=Potential(a=0.5 * 0.81, b=0.5 * 1.21)),
            Component(mass=1.0, frequency=-1.1, potential=Potential(a=0.5 * 1.21, b=0.5 * 0.81)),
            Component(
                mass=3.0,
                frequency=-1.2,
                potential=Potential(a=0.5, b=0.5, c=1.0, d=0.5, alpha=1.0, beta=1.0),
            ),
        )
        K = np.array([[100.0, 40.0, 50.0], [40.0, 125.0, 60.0], [50.0, 60.0, 150.0]])
        return ModelSpec(domain, 64, comps, K)
    raise ConfigurationError(f"unknown preset {name!r} (expected model1|model2|model3)")
