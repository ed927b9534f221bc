"""
🧪 Pytest Configuration and Fixtures
Shared meshes, problems and assembled systems for the unfitted FEM tests
"""

from types import SimpleNamespace

import numpy as np
import pytest

from unfitted.background_mesh import build_crisscross
from unfitted.fem_assembly import SchemeParams
from unfitted.fem_core import build_scalar_space, build_vector_space
from unfitted.problem_catalog import disk_problem, flower_problem, with_linear_solution
from unfitted.unfitted_mesh import classify_and_extract, extract_boundary_segments


# ==========================================
# 🔧 Helpers
# ==========================================

def discretize(problem, n):
    """Background mesh, active mesh, Γ segments and both FE spaces for one problem."""
    bg = build_crisscross(n)
    mesh = classify_and_extract(bg, problem)
    bdry = extract_boundary_segments(mesh, bg)
    space = build_scalar_space(mesh, bg)
    zspace = build_vector_space(mesh, bg)
    return SimpleNamespace(problem=problem, bg=bg, mesh=mesh, bdry=bdry, space=space, zspace=zspace)


# ==========================================
# 🌸 Problem Fixtures
# ==========================================

@pytest.fixture
def flower():
    """Flower domain R=0.47, θ₀=0, u = sin(x)e^y"""
    return flower_problem()


@pytest.fixture
def disk():
    """Disk of radius 0.25"""
    return disk_problem()


@pytest.fixture
def linear_flower():
    """Flower geometry with u = 1 + 2x + 3y"""
    return with_linear_solution(flower_problem())


# ==========================================
# 🕸️ Discretization Fixtures
# ==========================================

@pytest.fixture(scope="module")
def flower16():
    return discretize(flower_problem(), 16)


@pytest.fixture(scope="module")
def flower32():
    return discretize(flower_problem(), 32)


@pytest.fixture(scope="module")
def disk64():
    return discretize(disk_problem(), 64)


@pytest.fixture
def default_dirichlet_params():
    return SchemeParams(gamma=1.0, sigma=0.01)


@pytest.fixture
def default_neumann_params():
    return SchemeParams(gamma_div=1.0, gamma_1=10.0, sigma=0.01)


@pytest.fixture
def rng():
    """Seeded generator so random-vector tests are reproducible"""
    return np.random.default_rng(20240611)
