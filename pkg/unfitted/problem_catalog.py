"""
📐 Problem Catalog
==================
Benchmark problems shared by every scheme and study: a level set
(φ < 0 inside Ω), its analytic gradient, the manufactured solution and
the boundary data derived from it.

Problems are a closed catalog keyed by name (``flower``, ``disk``);
``with_linear_solution`` swaps the exact solution of any geometry for a
global linear field, which is what the patch tests run on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Tuple

import numpy as np

from unfitted.errors import InvalidArgumentError

ScalarField = Callable[[np.ndarray, np.ndarray], np.ndarray]
VectorField = Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]

# ==========================================
# 🔧 CONFIGURATION
# ==========================================
FLOWER_PETALS = 7
FLOWER_PHASE = 7.0 * math.pi / 36.0
DEFAULT_FLOWER_RADIUS = 0.47
DEFAULT_DISK_RADIUS = 0.25


def _sinexp(x, y):
    return np.sin(x) * np.exp(y)


def _sinexp_grad(x, y):
    ey = np.exp(y)
    return np.cos(x) * ey, np.sin(x) * ey


def _zero(x, y):
    return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)


@dataclass(frozen=True)
class LevelSetProblem:
    """Experiment definition: geometry through φ plus data (f, g, κ).

    ``normal_source`` selects the normal used for Neumann/Robin data at
    boundary quadrature points: ``"levelset"`` uses ∇φ/|∇φ| at the point,
    ``"discrete"`` uses the normal of the polygonal segment carrying the
    point (exact data for the polygonal boundary).
    """

    name: str
    phi: ScalarField
    grad_phi: VectorField
    exact_u: Optional[ScalarField] = None
    grad_u: Optional[VectorField] = None
    f: ScalarField = _zero
    kappa: float = 1.0
    theta0: float = 0.0
    normal_source: str = "levelset"
    params: dict = field(default_factory=dict)

    # ------------------------------------------
    # Boundary data
    # ------------------------------------------
    def normal(self, x, y):
        gx, gy = self.grad_phi(x, y)
        norm = np.hypot(gx, gy)
        norm = np.where(norm > 0.0, norm, 1.0)
        return gx / norm, gy / norm

    def _require_exact(self):
        if self.exact_u is None or self.grad_u is None:
            raise InvalidArgumentError(f"❌ Problem '{self.name}' has no exact solution to derive boundary data from")

    def g_dirichlet(self, x, y):
        self._require_exact()
        return self.exact_u(x, y)

    def g_neumann(self, x, y):
        self._require_exact()
        nx, ny = self.normal(x, y)
        ux, uy = self.grad_u(x, y)
        return nx * ux + ny * uy

    def g_robin(self, x, y):
        return self.g_dirichlet(x, y) + self.kappa * self.g_neumann(x, y)

    def boundary_flux(self, x, y, nx, ny):
        """∂u/∂n on Γ, with n chosen by ``normal_source``."""
        if self.normal_source == "discrete":
            self._require_exact()
            ux, uy = self.grad_u(x, y)
            return nx * ux + ny * uy
        return self.g_neumann(x, y)

    def robin_data(self, x, y, nx, ny):
        return self.g_dirichlet(x, y) + self.kappa * self.boundary_flux(x, y, nx, ny)


# ==========================================
# 🌸 Catalog
# ==========================================

def flower_problem(R: float = DEFAULT_FLOWER_RADIUS, theta0: float = 0.0, kappa: float = 1.0) -> LevelSetProblem:
    """Seven-petal flower φ = r⁴(5 + 3 sin(7θ + 7π/36))/2 − R⁴, rotated by θ₀.

    θ is the full-quadrant polar angle minus θ₀, so φ is continuous on the
    whole square. The gradient at r = 0 is (0, 0).
    """
    if R <= 0:
        raise InvalidArgumentError(f"❌ Flower radius must be positive, got R={R}")

    def phi(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        r2 = x * x + y * y
        theta = np.arctan2(y, x) - theta0
        return r2 * r2 * (5.0 + 3.0 * np.sin(FLOWER_PETALS * theta + FLOWER_PHASE)) / 2.0 - R**4

    def grad_phi(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        r2 = x * x + y * y
        theta = np.arctan2(y, x) - theta0
        amplitude = 5.0 + 3.0 * np.sin(FLOWER_PETALS * theta + FLOWER_PHASE)
        angular = 1.5 * FLOWER_PETALS * np.cos(FLOWER_PETALS * theta + FLOWER_PHASE)
        # ∂φ/∂r e_r + (1/r) ∂φ/∂θ e_θ, written with r³cos α = r²x, r³sin α = r²y
        return r2 * (2.0 * amplitude * x - angular * y), r2 * (2.0 * amplitude * y + angular * x)

    return LevelSetProblem(
        name="flower",
        phi=phi,
        grad_phi=grad_phi,
        exact_u=_sinexp,
        grad_u=_sinexp_grad,
        f=_zero,
        kappa=kappa,
        theta0=theta0,
        params={"R": R, "theta0": theta0},
    )


def disk_problem(radius: float = DEFAULT_DISK_RADIUS, kappa: float = 1.0) -> LevelSetProblem:
    """Disk φ = x² + y² − radius²; analytic area and perimeter make it the calibration geometry."""
    if not 0.0 < radius < 0.5:
        raise InvalidArgumentError(f"❌ Disk radius must lie in (0, 0.5), got {radius}")

    def phi(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return x * x + y * y - radius * radius

    def grad_phi(x, y):
        return 2.0 * np.asarray(x, dtype=float), 2.0 * np.asarray(y, dtype=float)

    return LevelSetProblem(
        name="disk",
        phi=phi,
        grad_phi=grad_phi,
        exact_u=_sinexp,
        grad_u=_sinexp_grad,
        f=_zero,
        kappa=kappa,
        params={"radius": radius},
    )


def with_linear_solution(problem: LevelSetProblem, a: float = 1.0, b: float = 2.0, c: float = 3.0) -> LevelSetProblem:
    """Same geometry, exact solution u = a + bx + cy (harmonic, so f = 0)."""

    def exact_u(x, y):
        return a + b * np.asarray(x, dtype=float) + c * np.asarray(y, dtype=float)

    def grad_u(x, y):
        shape = np.broadcast(np.asarray(x), np.asarray(y)).shape
        return np.full(shape, float(b)), np.full(shape, float(c))

    return replace(
        problem,
        name=f"{problem.name}-linear",
        exact_u=exact_u,
        grad_u=grad_u,
        f=_zero,
        normal_source="discrete",
        params={**problem.params, "solution": "linear", "coeffs": (a, b, c)},
    )


PROBLEMS = {
    "flower": flower_problem,
    "disk": disk_problem,
}


def build_problem(
    name: str,
    *,
    R: float = DEFAULT_FLOWER_RADIUS,
    radius: float = DEFAULT_DISK_RADIUS,
    theta0: float = 0.0,
    kappa: float = 1.0,
    solution: str = "sinexp",
) -> LevelSetProblem:
    """Look a problem up by name; study configs go through here."""
    if name == "flower":
        problem = flower_problem(R=R, theta0=theta0, kappa=kappa)
    elif name == "disk":
        # rotation-invariant; θ₀ is carried only so sweep rows stay labelled
        problem = replace(disk_problem(radius=radius, kappa=kappa), theta0=theta0)
    else:
        raise InvalidArgumentError(f"❌ Unknown problem '{name}' (known: {', '.join(PROBLEMS)})")

    if solution == "linear":
        return with_linear_solution(problem)
    if solution != "sinexp":
        raise InvalidArgumentError(f"❌ Unknown solution '{solution}' (known: sinexp, linear)")
    return problem
