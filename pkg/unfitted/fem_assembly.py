"""
🏗️ FEM Assembly
===============
Linear systems for the schemes that avoid integration over cut cells
(Dirichlet, Neumann, Robin) and for the CutFEM baselines.

Conventions:
- element blocks are indexed [test, trial]
- ∂v/∂n on a Γ segment uses the gradient of the Cut cell carrying it;
  on a Γ_h facet, the gradient of its unique active cell
- facet jumps are left − right; every jump term is a product of two
  jumps, so the orientation cancels
- h is the global background mesh size

Unknown layout: u-dofs first, then y-dofs (Neumann/Robin) or P0
multipliers (CutFEM Lagrange), then the mean-value multiplier row when a
scheme is posed on mean-zero V_h.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix

from unfitted.background_mesh import BackgroundMesh
from unfitted.errors import AssemblyError, InvalidArgumentError
from unfitted.fem_core import ScalarSpaceP1, VectorSpaceZ
from unfitted.problem_catalog import LevelSetProblem
from unfitted.quadrature import SEGMENT_ORDER, TRIANGLE_DEGREE, segment_points, triangle_points
from unfitted.unfitted_mesh import ActiveMesh, BoundaryDiscretization, FacetSet, domain_subtriangles

# ==========================================
# 🔧 CONFIGURATION
# ==========================================
GRADDIV_SCALINGS = ("constant", "h_squared")
CUTFEM_VARIANTS = ("lagrange_p0", "nitsche_sym", "nitsche_asym", "neumann")


@dataclass(frozen=True)
class SchemeParams:
    gamma: float = 1.0
    sigma: float = 0.01
    gamma_div: float = 1.0
    gamma_1: float = 10.0
    kappa: float = 1.0
    graddiv_scaling: str = "constant"

    def __post_init__(self):
        for name in ("gamma", "sigma", "gamma_div", "gamma_1", "kappa"):
            if getattr(self, name) < 0:
                raise InvalidArgumentError(f"❌ Scheme parameter {name} must be >= 0, got {getattr(self, name)}")
        if self.graddiv_scaling not in GRADDIV_SCALINGS:
            raise InvalidArgumentError(
                f"❌ Unknown graddiv_scaling '{self.graddiv_scaling}' (known: {', '.join(GRADDIV_SCALINGS)})"
            )

    def effective_gamma_div(self, h: float) -> float:
        return self.gamma_div * h * h if self.graddiv_scaling == "h_squared" else self.gamma_div


@dataclass(frozen=True, eq=False)
class LinearSystem:
    matrix: csr_matrix
    rhs: np.ndarray
    constraint_rows: int
    symmetric: bool
    n_u: int
    n_y: int = 0
    n_multipliers: int = 0

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def unconstrained(self) -> csr_matrix:
        """Matrix with the mean-value row and column removed."""
        m = self.n - self.constraint_rows
        return self.matrix[:m, :m].tocsr()

    def dump(self, path) -> Path:
        """Coordinate text format, one ``i j value`` line per stored entry."""
        path = Path(path)
        coo = self.matrix.tocoo()
        with open(path, "w", encoding="utf-8") as f:
            for i, j, v in zip(coo.row, coo.col, coo.data):
                f.write(f"{i} {j} {v:.17g}\n")
        logging.info(f"✅ Saved {coo.nnz} matrix entries → {path}")
        return path


class TripletBuilder:
    """Collects dense element blocks as triplets; duplicates are summed on compression."""

    def __init__(self, n: int):
        self.n = n
        self._rows: list[np.ndarray] = []
        self._cols: list[np.ndarray] = []
        self._vals: list[np.ndarray] = []
        self.rhs = np.zeros(n)

    def add(self, row_dofs: np.ndarray, col_dofs: np.ndarray, blocks: np.ndarray) -> None:
        rows = np.broadcast_to(row_dofs[:, :, None], blocks.shape)
        cols = np.broadcast_to(col_dofs[:, None, :], blocks.shape)
        self._rows.append(rows.ravel())
        self._cols.append(cols.ravel())
        self._vals.append(blocks.ravel())

    def add_rhs(self, dofs: np.ndarray, values: np.ndarray) -> None:
        np.add.at(self.rhs, dofs.ravel(), values.ravel())

    def tocsr(self) -> csr_matrix:
        if not self._rows:
            return csr_matrix((self.n, self.n))
        rows = np.concatenate(self._rows)
        cols = np.concatenate(self._cols)
        vals = np.concatenate(self._vals)
        return coo_matrix((vals, (rows, cols)), shape=(self.n, self.n)).tocsr()


# ==========================================
# 🧩 Term builders
# ==========================================

def _segment_data(space: ScalarSpaceP1, cells, p0, p1, normal):
    """Quadrature points/weights, basis values, ∫φ_i and ∂φ_i/∂n on a batch of segments."""
    points, weights, _ = segment_points(p0, p1, SEGMENT_ORDER)
    basis = space.basis_at(cells, points)
    integrals = np.einsum("mk,mkv->mv", weights, basis)
    dn = np.einsum("mvd,md->mv", space.grads[cells], normal)
    return points, weights, basis, integrals, dn


def _add_stiffness(builder: TripletBuilder, space: ScalarSpaceP1, measures: np.ndarray) -> None:
    blocks = measures[:, None, None] * np.einsum("mid,mjd->mij", space.grads, space.grads)
    builder.add(space.cell_dofs, space.cell_dofs, blocks)


def _add_volume_load(builder: TripletBuilder, space: ScalarSpaceP1, f, corners, owners) -> None:
    points, weights, _ = triangle_points(corners, TRIANGLE_DEGREE)
    basis = space.basis_at(owners, points)
    values = f(points[..., 0], points[..., 1]) * weights
    builder.add_rhs(space.cell_dofs[owners], np.einsum("mk,mkv->mv", values, basis))


def _add_ghost(builder: TripletBuilder, space: ScalarSpaceP1, facets: FacetSet, coefficient: float) -> None:
    """coefficient · Σ_E ∫_E [∂u/∂n][∂v/∂n] over the given facets (normal derivatives are constant)."""
    if len(facets) == 0 or coefficient == 0.0:
        return
    dofs = np.concatenate([space.cell_dofs[facets.left], space.cell_dofs[facets.right]], axis=1)
    jump = np.concatenate(
        [
            np.einsum("mvd,md->mv", space.grads[facets.left], facets.normal),
            -np.einsum("mvd,md->mv", space.grads[facets.right], facets.normal),
        ],
        axis=1,
    )
    blocks = (coefficient * facets.length)[:, None, None] * jump[:, :, None] * jump[:, None, :]
    builder.add(dofs, dofs, blocks)


def _add_gamma_h_flux(builder: TripletBuilder, space: ScalarSpaceP1, facets: FacetSet) -> None:
    """−∫_{Γ_h} (∂u/∂n) v with the one-sided gradient of the incident cell."""
    _, _, _, integrals, dn = _segment_data(space, facets.left, facets.p0, facets.p1, facets.normal)
    dofs = space.cell_dofs[facets.left]
    builder.add(dofs, dofs, -integrals[:, :, None] * dn[:, None, :])


def _add_nitsche(
    builder: TripletBuilder,
    space: ScalarSpaceP1,
    bdry: BoundaryDiscretization,
    g_values: np.ndarray,
    *,
    flux: bool,
    adjoint_sign: float,
    penalty: float,
    data,
) -> None:
    """Γ-segment terms of the Nitsche family.

    flux          : −∫_Γ (∂u/∂n) v
    adjoint_sign s: s ∫_Γ u ∂v/∂n   and   s ∫_Γ g ∂v/∂n on the right
    penalty p     : p ∫_Γ u v       and   p ∫_Γ g v on the right
    """
    _, weights, basis, integrals, dn = data
    dofs = space.cell_dofs[bdry.cell]
    blocks = adjoint_sign * dn[:, :, None] * integrals[:, None, :]
    if flux:
        blocks = blocks - integrals[:, :, None] * dn[:, None, :]
    if penalty != 0.0:
        blocks = blocks + penalty * np.einsum("mk,mki,mkj->mij", weights, basis, basis)
    builder.add(dofs, dofs, blocks)

    g_integral = np.einsum("mk,mk->m", weights, g_values)
    load = adjoint_sign * dn * g_integral[:, None]
    if penalty != 0.0:
        load = load + penalty * np.einsum("mk,mkv->mv", weights * g_values, basis)
    builder.add_rhs(dofs, load)


def _add_mean_constraint(builder: TripletBuilder, space: ScalarSpaceP1) -> None:
    """Lagrange multiplier row/column enforcing ∫_{Ω_h} u_h = 0 (last unknown)."""
    masses = space.lumped_masses()
    last = np.array([[builder.n - 1]])
    dofs = np.arange(space.n_dofs)[None, :]
    builder.add(last, dofs, masses[None, None, :])
    builder.add(dofs, last, masses[None, :, None])


def _boundary_values(bdry: BoundaryDiscretization, field_of_point_and_normal):
    points, _, _ = segment_points(bdry.p0, bdry.p1, SEGMENT_ORDER)
    nx = np.broadcast_to(bdry.normal[:, 0:1], points.shape[:2])
    ny = np.broadcast_to(bdry.normal[:, 1:2], points.shape[:2])
    return field_of_point_and_normal(points[..., 0], points[..., 1], nx, ny)


def _require_boundary(bdry: BoundaryDiscretization) -> None:
    if len(bdry) == 0:
        raise AssemblyError("❌ Boundary discretization is empty: nothing carries the boundary condition")


# ==========================================
# 🧱 Dirichlet
# ==========================================

def assemble_dirichlet(
    problem: LevelSetProblem,
    mesh: ActiveMesh,
    bg: BackgroundMesh,
    bdry: BoundaryDiscretization,
    space: ScalarSpaceP1,
    params: SchemeParams,
) -> LinearSystem:
    """Antisymmetric Nitsche on Γ + Γ_h flux + ghost penalty on F_Γ; no integral over Ω."""
    _require_boundary(bdry)
    if params.gamma <= 0:
        logging.warning(f"⚠️ Dirichlet assembly with gamma={params.gamma}: coercivity is not guaranteed")
    h = mesh.h
    builder = TripletBuilder(space.n_dofs)

    _add_stiffness(builder, space, space.areas)
    _add_volume_load(builder, space, problem.f, bg.corners(mesh.cells), np.arange(mesh.n_cells))
    _add_gamma_h_flux(builder, space, mesh.facets.gamma_h)

    data = _segment_data(space, bdry.cell, bdry.p0, bdry.p1, bdry.normal)
    g = problem.g_dirichlet(data[0][..., 0], data[0][..., 1])
    _add_nitsche(builder, space, bdry, g, flux=False, adjoint_sign=1.0, penalty=params.gamma / h, data=data)
    _add_ghost(builder, space, mesh.facets.f_gamma, params.sigma * h)

    logging.debug(f"🏗️ Dirichlet system: {space.n_dofs} dofs")
    return LinearSystem(matrix=builder.tocsr(), rhs=builder.rhs, constraint_rows=0, symmetric=False, n_u=space.n_dofs)


# ==========================================
# 🧱 Neumann / Robin (mixed with flux variable y on cut cells)
# ==========================================

def _add_flux_variable_terms(
    builder: TripletBuilder,
    problem: LevelSetProblem,
    mesh: ActiveMesh,
    bdry: BoundaryDiscretization,
    space: ScalarSpaceP1,
    zspace: VectorSpaceZ,
    params: SchemeParams,
) -> None:
    n_u = space.n_dofs
    gamma_div = params.effective_gamma_div(mesh.h)

    # +∫_{Γ_h} (y·n) v and −∫_Γ (y·n) v
    gamma_h = mesh.facets.gamma_h
    zcells = zspace.zcell_of_cell[gamma_h.left]
    if np.any(zcells < 0):
        bad = int(gamma_h.left[np.flatnonzero(zcells < 0)[0]])
        raise AssemblyError(f"❌ Γ_h facet owned by non-cut cell {bad}: the flux variable is undefined there")
    for cells, zc, p0, p1, normal, sign in (
        (gamma_h.left, zcells, gamma_h.p0, gamma_h.p1, gamma_h.normal, 1.0),
        (bdry.cell, zspace.zcell_of_cell[bdry.cell], bdry.p0, bdry.p1, bdry.normal, -1.0),
    ):
        _, weights, basis, _, _ = _segment_data(space, cells, p0, p1, normal)
        mass = np.einsum("mk,mki,mkj->mij", weights, basis, basis)
        for component in (0, 1):
            blocks = sign * normal[:, component, None, None] * mass
            builder.add(space.cell_dofs[cells], n_u + zspace.cell_dofs(component)[zc], blocks)

    # grad-div and flux-matching terms on the cut cells
    cut = zspace.cells
    grads = space.grads[cut]
    zdofs = n_u + np.concatenate([zspace.cell_dofs(0), zspace.cell_dofs(1)], axis=1)
    div = np.concatenate([grads[:, :, 0], grads[:, :, 1]], axis=1)
    if gamma_div != 0.0:
        blocks = (gamma_div * space.areas[cut])[:, None, None] * div[:, :, None] * div[:, None, :]
        builder.add(zdofs, zdofs, blocks)

    corners = _cell_corners(space, cut)
    points, weights, _ = triangle_points(corners, TRIANGLE_DEGREE)
    basis = space.basis_at(cut, points)  # (m, k, 3)
    m, k, _ = basis.shape
    zero = np.zeros_like(basis)
    bx = np.concatenate([np.broadcast_to(grads[:, None, :, 0], (m, k, 3)), basis, zero], axis=2)
    by = np.concatenate([np.broadcast_to(grads[:, None, :, 1], (m, k, 3)), zero, basis], axis=2)
    blocks = params.gamma_1 * (
        np.einsum("mk,mki,mkj->mij", weights, bx, bx) + np.einsum("mk,mki,mkj->mij", weights, by, by)
    )
    dofs = np.concatenate([space.cell_dofs[cut], zdofs], axis=1)
    builder.add(dofs, dofs, blocks)

    if gamma_div != 0.0:
        f_integral = np.einsum("mk,mk->m", weights, problem.f(points[..., 0], points[..., 1]))
        builder.add_rhs(zdofs, gamma_div * f_integral[:, None] * div)

    _add_ghost(builder, space, mesh.facets.gamma_h_int, params.sigma * mesh.h)


def _cell_corners(space: ScalarSpaceP1, cells: np.ndarray) -> np.ndarray:
    return space.coords[space.cell_dofs[cells]]


def assemble_neumann(
    problem: LevelSetProblem,
    mesh: ActiveMesh,
    bg: BackgroundMesh,
    bdry: BoundaryDiscretization,
    space: ScalarSpaceP1,
    zspace: VectorSpaceZ,
    params: SchemeParams,
) -> LinearSystem:
    """Block system in (u, y, mean multiplier) with grad-div and flux-matching stabilization."""
    _require_boundary(bdry)
    if params.gamma_1 <= 0:
        raise AssemblyError(f"❌ Neumann assembly needs gamma_1 > 0, got {params.gamma_1}")
    n_u, n_y = space.n_dofs, zspace.n_dofs
    builder = TripletBuilder(n_u + n_y + 1)

    _add_stiffness(builder, space, space.areas)
    _add_volume_load(builder, space, problem.f, bg.corners(mesh.cells), np.arange(mesh.n_cells))
    _add_flux_variable_terms(builder, problem, mesh, bdry, space, zspace, params)

    data = _segment_data(space, bdry.cell, bdry.p0, bdry.p1, bdry.normal)
    g = _boundary_values(bdry, problem.boundary_flux)
    builder.add_rhs(space.cell_dofs[bdry.cell], np.einsum("mk,mkv->mv", data[1] * g, data[2]))
    _add_mean_constraint(builder, space)

    logging.debug(f"🏗️ Neumann system: {n_u} u-dofs + {n_y} y-dofs + 1 multiplier")
    return LinearSystem(
        matrix=builder.tocsr(), rhs=builder.rhs, constraint_rows=1, symmetric=False, n_u=n_u, n_y=n_y
    )


def assemble_robin(
    problem: LevelSetProblem,
    mesh: ActiveMesh,
    bg: BackgroundMesh,
    bdry: BoundaryDiscretization,
    space: ScalarSpaceP1,
    zspace: VectorSpaceZ,
    params: SchemeParams,
) -> LinearSystem:
    """Neumann block form plus (1/κ)∫_Γ u v, on the full V_h (no mean constraint)."""
    _require_boundary(bdry)
    if params.kappa <= 0:
        raise AssemblyError(f"❌ Robin assembly needs kappa > 0, got {params.kappa}")
    if not math.isclose(problem.kappa, params.kappa, rel_tol=1e-12):
        raise AssemblyError(
            f"❌ Robin data was built for kappa={problem.kappa} but the scheme uses kappa={params.kappa}"
        )
    if params.gamma_1 <= 0:
        raise AssemblyError(f"❌ Robin assembly needs gamma_1 > 0, got {params.gamma_1}")
    n_u, n_y = space.n_dofs, zspace.n_dofs
    builder = TripletBuilder(n_u + n_y)

    _add_stiffness(builder, space, space.areas)
    _add_volume_load(builder, space, problem.f, bg.corners(mesh.cells), np.arange(mesh.n_cells))
    _add_flux_variable_terms(builder, problem, mesh, bdry, space, zspace, params)

    data = _segment_data(space, bdry.cell, bdry.p0, bdry.p1, bdry.normal)
    g = _boundary_values(bdry, problem.robin_data)
    _add_nitsche(builder, space, bdry, g, flux=False, adjoint_sign=0.0, penalty=1.0 / params.kappa, data=data)

    logging.debug(f"🏗️ Robin system: {n_u} u-dofs + {n_y} y-dofs")
    return LinearSystem(matrix=builder.tocsr(), rhs=builder.rhs, constraint_rows=0, symmetric=False, n_u=n_u, n_y=n_y)


# ==========================================
# ✂️ CutFEM baselines (integrate over the clipped Ω)
# ==========================================

def assemble_cutfem(
    problem: LevelSetProblem,
    mesh: ActiveMesh,
    bg: BackgroundMesh,
    bdry: BoundaryDiscretization,
    space: ScalarSpaceP1,
    variant: str,
    params: SchemeParams,
) -> LinearSystem:
    if variant not in CUTFEM_VARIANTS:
        raise AssemblyError(f"❌ Unknown CutFEM variant '{variant}' (known: {', '.join(CUTFEM_VARIANTS)})")
    _require_boundary(bdry)
    h = mesh.h
    n_u = space.n_dofs

    corners, owners = domain_subtriangles(mesh, bg)
    d1 = corners[:, 1] - corners[:, 0]
    d2 = corners[:, 2] - corners[:, 0]
    piece_areas = 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    omega_areas = np.bincount(owners, weights=piece_areas, minlength=mesh.n_cells)

    n_mult = mesh.n_cut if variant == "lagrange_p0" else 0
    n_constraint = 1 if variant == "neumann" else 0
    builder = TripletBuilder(n_u + n_mult + n_constraint)

    _add_stiffness(builder, space, omega_areas)
    _add_volume_load(builder, space, problem.f, corners, owners)
    data = _segment_data(space, bdry.cell, bdry.p0, bdry.p1, bdry.normal)

    if variant in ("nitsche_sym", "nitsche_asym"):
        sign = -1.0 if variant == "nitsche_sym" else 1.0
        g = problem.g_dirichlet(data[0][..., 0], data[0][..., 1])
        _add_nitsche(builder, space, bdry, g, flux=True, adjoint_sign=sign, penalty=params.gamma / h, data=data)
        _add_ghost(builder, space, mesh.facets.f_gamma, params.sigma * h)
    elif variant == "neumann":
        g = _boundary_values(bdry, problem.boundary_flux)
        builder.add_rhs(space.cell_dofs[bdry.cell], np.einsum("mk,mkv->mv", data[1] * g, data[2]))
        _add_ghost(builder, space, mesh.facets.f_gamma, params.sigma * h)
        _add_mean_constraint(builder, space)
    else:
        _add_p0_multipliers(builder, problem, mesh, bdry, space, params, data)

    symmetric = variant != "nitsche_asym"
    logging.debug(f"🏗️ CutFEM {variant} system: {builder.n} unknowns")
    return LinearSystem(
        matrix=builder.tocsr(),
        rhs=builder.rhs,
        constraint_rows=n_constraint,
        symmetric=symmetric,
        n_u=n_u,
        n_multipliers=n_mult,
    )


def _add_p0_multipliers(builder, problem, mesh, bdry, space, params, data) -> None:
    """One P0 multiplier per Cut cell, ∫_Γ λ v coupling and −σh Σ ∫_E [λ][μ] on cut-cut facets."""
    n_u = space.n_dofs
    points, weights, _, integrals, _ = data
    mult_of_cell = np.full(mesh.n_cells, -1, dtype=np.int64)
    mult_of_cell[mesh.cut_cells] = n_u + np.arange(mesh.n_cut)

    udofs = space.cell_dofs[bdry.cell]
    mdofs = mult_of_cell[bdry.cell][:, None]
    builder.add(udofs, mdofs, integrals[:, :, None])
    builder.add(mdofs, udofs, integrals[:, None, :])

    g = problem.g_dirichlet(points[..., 0], points[..., 1])
    builder.add_rhs(mdofs, np.einsum("mk,mk->m", weights, g)[:, None])

    facets = mesh.facets.f_gamma_cut
    if len(facets) and params.sigma != 0.0:
        dofs = np.column_stack([mult_of_cell[facets.left], mult_of_cell[facets.right]])
        pattern = np.array([[1.0, -1.0], [-1.0, 1.0]])
        blocks = -(params.sigma * mesh.h * facets.length)[:, None, None] * pattern[None, :, :]
        builder.add(dofs, dofs, blocks)


# ==========================================
# 🔬 Standalone blocks (diagnostics)
# ==========================================

def ghost_penalty_matrix(space: ScalarSpaceP1, facets: FacetSet, coefficient: float = 1.0) -> csr_matrix:
    builder = TripletBuilder(space.n_dofs)
    _add_ghost(builder, space, facets, coefficient)
    return builder.tocsr()


def boundary_mass_matrix(space: ScalarSpaceP1, bdry: BoundaryDiscretization, n: int | None = None) -> csr_matrix:
    """∫_Γ u v on the polygonal Γ, padded to size n."""
    builder = TripletBuilder(n or space.n_dofs)
    _, weights, basis, _, _ = _segment_data(space, bdry.cell, bdry.p0, bdry.p1, bdry.normal)
    dofs = space.cell_dofs[bdry.cell]
    builder.add(dofs, dofs, np.einsum("mk,mki,mkj->mij", weights, basis, basis))
    return builder.tocsr()
