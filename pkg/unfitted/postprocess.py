"""
📐 Postprocess
==============
Error norms over the polygonal Ω, the triple norms of the Dirichlet and
Neumann coercivity estimates, convergence slopes and the discrete
integration-by-parts identity on the fictitious strip B_h.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from unfitted.background_mesh import BackgroundMesh
from unfitted.errors import InvalidArgumentError
from unfitted.fem_core import ScalarSpaceP1, VectorSpaceZ, interpolate_nodal, interpolate_vector
from unfitted.problem_catalog import LevelSetProblem
from unfitted.quadrature import ERROR_DEGREE, SEGMENT_ORDERS, TRIANGLE_DEGREE, segment_points, triangle_points
from unfitted.unfitted_mesh import (
    ActiveMesh,
    BoundaryDiscretization,
    domain_subtriangles,
    facet_strip_parts,
    strip_subtriangles,
)

# ==========================================
# 🔧 CONFIGURATION
# ==========================================
GAMMA_ORDER = SEGMENT_ORDERS[-1]


@dataclass(frozen=True)
class ErrorReport:
    l2_rel: float
    h1_rel: float
    l2_meanfree_rel: float
    gamma_l2: float
    triple_norm: float

    def as_dict(self) -> dict:
        return asdict(self)


def _values_on(space: ScalarSpaceP1, coeffs: np.ndarray, cells: np.ndarray, points: np.ndarray) -> np.ndarray:
    basis = space.basis_at(cells, points)
    return np.einsum("mkv,mv->mk", basis, coeffs[space.cell_dofs[cells]])


def _boundary_error(problem, coeffs, space, bdry) -> tuple[np.ndarray, np.ndarray]:
    points, weights, _ = segment_points(bdry.p0, bdry.p1, GAMMA_ORDER)
    error = problem.exact_u(points[..., 0], points[..., 1]) - _values_on(space, coeffs, bdry.cell, points)
    return error, weights


# ==========================================
# 📏 Error norms
# ==========================================

def error_norms(
    problem: LevelSetProblem,
    coeffs: np.ndarray,
    mesh: ActiveMesh,
    bg: BackgroundMesh,
    space: ScalarSpaceP1,
    bdry: BoundaryDiscretization,
) -> ErrorReport:
    """Relative L²/H¹ errors over Ω (clipped cells, degree-4 rules) and absolute Γ / energy errors.

    ``triple_norm`` is √(|u − u_h|²_{1,Ω_h} + h⁻¹‖u − u_h‖²_{0,Γ}), with the
    exact solution evaluated on the whole active mesh. Neumann and Robin
    studies replace it with ``triple_norm_error_mixed``.
    """
    if problem.exact_u is None:
        raise InvalidArgumentError(f"❌ Problem '{problem.name}' has no exact solution to compare against")
    coeffs = np.asarray(coeffs, dtype=float)[: space.n_dofs]

    corners, owners = domain_subtriangles(mesh, bg)
    points, weights, _ = triangle_points(corners, ERROR_DEGREE)
    x, y = points[..., 0], points[..., 1]
    u = problem.exact_u(x, y)
    error = u - _values_on(space, coeffs, owners, points)

    ux, uy = problem.grad_u(x, y)
    grad_h = space.cell_gradients(coeffs)[owners]
    ex = ux - grad_h[:, None, 0]
    ey = uy - grad_h[:, None, 1]

    area = weights.sum()
    u_l2 = np.sqrt(np.sum(weights * u * u))
    u_h1 = np.sqrt(np.sum(weights * (ux * ux + uy * uy)))
    shift = np.sum(weights * error) / area
    l2 = np.sqrt(np.sum(weights * error * error))
    l2_meanfree = np.sqrt(max(np.sum(weights * (error - shift) ** 2), 0.0))
    h1 = np.sqrt(np.sum(weights * (ex * ex + ey * ey)))

    gamma_error, gamma_weights = _boundary_error(problem, coeffs, space, bdry)
    gamma_sq = float(np.sum(gamma_weights * gamma_error**2))

    # energy part over all of Ω_h
    cells = np.arange(mesh.n_cells)
    apoints, aweights, _ = triangle_points(bg.corners(mesh.cells), ERROR_DEGREE)
    aux, auy = problem.grad_u(apoints[..., 0], apoints[..., 1])
    agrad = space.cell_gradients(coeffs)[cells]
    energy_sq = float(np.sum(aweights * ((aux - agrad[:, None, 0]) ** 2 + (auy - agrad[:, None, 1]) ** 2)))

    report = ErrorReport(
        l2_rel=float(l2 / u_l2) if u_l2 > 0 else float(l2),
        h1_rel=float(h1 / u_h1) if u_h1 > 0 else float(h1),
        l2_meanfree_rel=float(min(l2_meanfree, l2) / u_l2) if u_l2 > 0 else float(min(l2_meanfree, l2)),
        gamma_l2=float(np.sqrt(gamma_sq)),
        triple_norm=float(np.sqrt(energy_sq + gamma_sq / mesh.h)),
    )
    logging.debug(f"📊 Errors: L2 {report.l2_rel:.3e}, H1 {report.h1_rel:.3e}, Γ {report.gamma_l2:.3e}")
    return report


def sample_solution(
    coeffs: np.ndarray,
    mesh: ActiveMesh,
    bg: BackgroundMesh,
    space: ScalarSpaceP1,
    points: np.ndarray,
):
    """Evaluate u_h and ∇u_h at arbitrary points of O.

    Returns (inside, values, grads) where ``inside`` flags points of the
    polygonal Ω (linearized φ < 0 on an active cell); values and grads are
    only meaningful there.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    tris = bg.locate(points)
    cells = np.where(tris >= 0, mesh.cell_of_background[np.maximum(tris, 0)], -1)
    active = cells >= 0
    safe = np.where(active, cells, 0)

    tri_vertices = bg.triangles[mesh.cells[safe]]
    bary = space.basis_at(safe, points[:, None, :])[:, 0, :]
    phi_lin = np.einsum("mv,mv->m", bary, mesh.snapped_phi[tri_vertices])
    inside = active & (phi_lin < 0.0)

    values = np.einsum("mv,mv->m", bary, np.asarray(coeffs)[space.cell_dofs[safe]])
    grads = space.cell_gradients(np.asarray(coeffs, dtype=float)[: space.n_dofs])[safe]
    return inside, values, grads


# ==========================================
# ⦀ Triple norms
# ==========================================

def _h1_seminorm_sq(space: ScalarSpaceP1, v: np.ndarray) -> float:
    grads = space.cell_gradients(v)
    return float(np.sum(space.areas * np.einsum("md,md->m", grads, grads)))


def triple_norm_dirichlet(
    v: np.ndarray,
    mesh: ActiveMesh,
    bg: BackgroundMesh,
    space: ScalarSpaceP1,
    bdry: BoundaryDiscretization,
) -> float:
    """√(|v|²_{1,Ω_h} + h⁻¹‖v‖²_{0,Γ})."""
    v = np.asarray(v, dtype=float)[: space.n_dofs]
    points, weights, _ = segment_points(bdry.p0, bdry.p1, GAMMA_ORDER)
    trace = _values_on(space, v, bdry.cell, points)
    return float(np.sqrt(_h1_seminorm_sq(space, v) + np.sum(weights * trace**2) / mesh.h))


def triple_norm_neumann(
    v: np.ndarray,
    z: np.ndarray,
    mesh: ActiveMesh,
    bg: BackgroundMesh,
    space: ScalarSpaceP1,
    zspace: VectorSpaceZ,
) -> float:
    """√(|v|²_{1,Ω_h} + ‖div z‖²_{0,Ω_h^Γ} + ‖z + ∇v‖²_{0,Ω_h^Γ} + h‖[∂v/∂n]‖²_{0,Γ_h^i})."""
    v = np.asarray(v, dtype=float)[: space.n_dofs]
    z = np.asarray(z, dtype=float)
    cut = zspace.cells
    grads = space.grads[cut]
    zx = z[zspace.cell_dofs(0)]
    zy = z[zspace.cell_dofs(1)]

    div = np.einsum("mv,mv->m", zx, grads[:, :, 0]) + np.einsum("mv,mv->m", zy, grads[:, :, 1])
    div_sq = float(np.sum(space.areas[cut] * div**2))

    points, weights, _ = triangle_points(space.coords[space.cell_dofs[cut]], TRIANGLE_DEGREE)
    basis = space.basis_at(cut, points)
    grad_v = space.cell_gradients(v)[cut]
    sx = np.einsum("mkv,mv->mk", basis, zx) + grad_v[:, None, 0]
    sy = np.einsum("mkv,mv->mk", basis, zy) + grad_v[:, None, 1]
    match_sq = float(np.sum(weights * (sx * sx + sy * sy)))

    facets = mesh.facets.gamma_h_int
    all_grads = space.cell_gradients(v)
    jump = np.einsum("md,md->m", all_grads[facets.left] - all_grads[facets.right], facets.normal)
    jump_sq = float(np.sum(facets.length * jump**2))

    return float(np.sqrt(_h1_seminorm_sq(space, v) + div_sq + match_sq + mesh.h * jump_sq))


def triple_norm_error_mixed(
    problem: LevelSetProblem,
    solution: np.ndarray,
    mesh: ActiveMesh,
    bg: BackgroundMesh,
    space: ScalarSpaceP1,
    zspace: VectorSpaceZ,
) -> float:
    """⦀(I_h u − u_h, I_h(−∇u) − y_h)⦀ for a Neumann/Robin solution laid out as [u | y | ...]."""
    if problem.exact_u is None:
        raise InvalidArgumentError(f"❌ Problem '{problem.name}' has no exact solution to compare against")
    solution = np.asarray(solution, dtype=float)
    if len(solution) < space.n_dofs + zspace.n_dofs:
        raise InvalidArgumentError(
            f"❌ Solution has {len(solution)} entries, expected at least {space.n_dofs + zspace.n_dofs}"
        )
    u_h = solution[: space.n_dofs]
    y_h = solution[space.n_dofs : space.n_dofs + zspace.n_dofs]

    def flux(x, y):
        ux, uy = problem.grad_u(x, y)
        return -ux, -uy

    v = interpolate_nodal(space, problem.exact_u) - u_h
    z = interpolate_vector(zspace, flux) - y_h
    return triple_norm_neumann(v, z, mesh, bg, space, zspace)


# ==========================================
# 📉 Slopes and identities
# ==========================================

def convergence_slope(points) -> float:
    """Least-squares slope of log(error) against log(h)."""
    data = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(data) < 3:
        raise InvalidArgumentError(f"❌ Convergence slope needs at least 3 points, got {len(data)}")
    if np.any(~np.isfinite(data)) or np.any(data <= 0.0):
        raise InvalidArgumentError("❌ Convergence slope needs positive finite (h, error) pairs")
    slope, _ = np.polyfit(np.log(data[:, 0]), np.log(data[:, 1]), 1)
    return float(slope)


def integration_by_parts_sides(
    v: np.ndarray,
    mesh: ActiveMesh,
    bg: BackgroundMesh,
    space: ScalarSpaceP1,
    bdry: BoundaryDiscretization,
) -> tuple[float, float]:
    """Both sides of ∫_{Γ_h}(∂v/∂n)v − ∫_Γ(∂v/∂n)v = ∫_{B_h}|∇v|² − Σ_{F_Γ} ∫_{F∩B_h} v[∂v/∂n]."""
    v = np.asarray(v, dtype=float)[: space.n_dofs]
    grads = space.cell_gradients(v)

    gamma_h = mesh.facets.gamma_h
    points, weights, _ = segment_points(gamma_h.p0, gamma_h.p1)
    trace = np.sum(weights * _values_on(space, v, gamma_h.left, points), axis=1)
    lhs = float(np.sum(trace * np.einsum("md,md->m", grads[gamma_h.left], gamma_h.normal)))

    points, weights, _ = segment_points(bdry.p0, bdry.p1)
    trace = np.sum(weights * _values_on(space, v, bdry.cell, points), axis=1)
    lhs -= float(np.sum(trace * np.einsum("md,md->m", grads[bdry.cell], bdry.normal)))

    corners, owners = strip_subtriangles(mesh, bg)
    d1 = corners[:, 1] - corners[:, 0]
    d2 = corners[:, 2] - corners[:, 0]
    areas = 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    rhs = float(np.sum(areas * np.einsum("md,md->m", grads[owners], grads[owners])))

    facets = mesh.facets.f_gamma
    p0, p1 = facet_strip_parts(mesh, bg, facets)
    points, weights, _ = segment_points(p0, p1)
    trace = np.sum(weights * _values_on(space, v, facets.left, points), axis=1)
    jump = np.einsum("md,md->m", grads[facets.left] - grads[facets.right], facets.normal)
    rhs -= float(np.sum(trace * jump))
    return lhs, rhs
