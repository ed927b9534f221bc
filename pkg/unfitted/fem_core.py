"""
🧮 FEM Core
===========
P1 scalar space V_h on all active cells (fictitious strip included) and
the auxiliary vector space Z_h living only on Cut cells.

Z_h numbering is blockwise: component c of Z-vertex k is dof
``c * n_vertices + k``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from unfitted.background_mesh import BackgroundMesh, barycentric_gradients
from unfitted.errors import AssemblyError, InvalidArgumentError
from unfitted.unfitted_mesh import ActiveMesh

# ==========================================
# 🔧 CONFIGURATION
# ==========================================
BARYCENTRIC_TOL = 1e-12


def _number_vertices(triangles: np.ndarray, n_background_vertices: int):
    used = np.unique(triangles)
    dof_of_vertex = np.full(n_background_vertices, -1, dtype=np.int64)
    dof_of_vertex[used] = np.arange(len(used))
    return used, dof_of_vertex


@dataclass(frozen=True, eq=False)
class ScalarSpaceP1:
    dof_of_vertex: np.ndarray
    vertex_of_dof: np.ndarray
    coords: np.ndarray
    cell_dofs: np.ndarray
    grads: np.ndarray
    areas: np.ndarray
    centroids: np.ndarray

    @property
    def n_dofs(self) -> int:
        return len(self.vertex_of_dof)

    def basis_at(self, cells: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Shape-function values of ``cells[i]`` at ``points[i, q]``, shape (m, k, 3)."""
        offset = points - self.centroids[cells][:, None, :]
        return 1.0 / 3.0 + np.einsum("mkd,mvd->mkv", offset, self.grads[cells])

    def cell_gradients(self, coeffs: np.ndarray) -> np.ndarray:
        """Constant gradient of the represented function on every cell, shape (n_cells, 2)."""
        return np.einsum("mv,mvd->md", coeffs[self.cell_dofs], self.grads)

    def lumped_masses(self) -> np.ndarray:
        """Exact ∫_{Ω_h} φ_i: one third of every incident cell area."""
        masses = np.zeros(self.n_dofs)
        np.add.at(masses, self.cell_dofs, np.repeat(self.areas[:, None] / 3.0, 3, axis=1))
        return masses


@dataclass(frozen=True, eq=False)
class VectorSpaceZ:
    dof_of_vertex: np.ndarray
    vertex_of_dof: np.ndarray
    coords: np.ndarray
    cells: np.ndarray
    cell_vertices: np.ndarray
    zcell_of_cell: np.ndarray

    @property
    def n_vertices(self) -> int:
        return len(self.vertex_of_dof)

    @property
    def n_dofs(self) -> int:
        return 2 * self.n_vertices

    def cell_dofs(self, component: int) -> np.ndarray:
        return self.cell_vertices + component * self.n_vertices


def build_scalar_space(mesh: ActiveMesh, bg: BackgroundMesh) -> ScalarSpaceP1:
    if mesh.n_cells == 0:
        raise InvalidArgumentError("❌ Cannot build V_h on an empty active mesh")
    triangles = bg.triangles[mesh.cells]
    vertex_of_dof, dof_of_vertex = _number_vertices(triangles, bg.n_vertices)
    corners = bg.vertices[triangles]
    d1 = corners[:, 1] - corners[:, 0]
    d2 = corners[:, 2] - corners[:, 0]
    return ScalarSpaceP1(
        dof_of_vertex=dof_of_vertex,
        vertex_of_dof=vertex_of_dof,
        coords=bg.vertices[vertex_of_dof],
        cell_dofs=dof_of_vertex[triangles],
        grads=barycentric_gradients(corners),
        areas=0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]),
        centroids=corners.mean(axis=1),
    )


def build_vector_space(mesh: ActiveMesh, bg: BackgroundMesh) -> VectorSpaceZ:
    """Z_h: P1 vector fields on the Cut cells only."""
    cut = mesh.cut_cells
    if len(cut) == 0:
        raise AssemblyError("❌ Z_h is empty: the active mesh has no Cut cell")
    triangles = bg.triangles[mesh.cells[cut]]
    vertex_of_dof, dof_of_vertex = _number_vertices(triangles, bg.n_vertices)
    zcell_of_cell = np.full(mesh.n_cells, -1, dtype=np.int64)
    zcell_of_cell[cut] = np.arange(len(cut))
    return VectorSpaceZ(
        dof_of_vertex=dof_of_vertex,
        vertex_of_dof=vertex_of_dof,
        coords=bg.vertices[vertex_of_dof],
        cells=cut,
        cell_vertices=dof_of_vertex[triangles],
        zcell_of_cell=zcell_of_cell,
    )


# ==========================================
# 📍 Interpolation and evaluation
# ==========================================

def interpolate_nodal(space: ScalarSpaceP1, field) -> np.ndarray:
    """I_h: nodal values of ``field`` at the dof vertices."""
    values = field(space.coords[:, 0], space.coords[:, 1])
    return np.broadcast_to(np.asarray(values, dtype=float), (space.n_dofs,)).copy()


def interpolate_vector(space: VectorSpaceZ, field) -> np.ndarray:
    """Nodal interpolation of a vector field (callable returning (fx, fy)) into Z_h."""
    fx, fy = field(space.coords[:, 0], space.coords[:, 1])
    shape = (space.n_vertices,)
    return np.concatenate([np.broadcast_to(fx, shape), np.broadcast_to(fy, shape)]).astype(float)


def evaluate(space: ScalarSpaceP1, coeffs: np.ndarray, cell: int, point) -> tuple[float, np.ndarray]:
    """Value and (constant) gradient of the P1 function on ``cell`` at ``point``."""
    point = np.asarray(point, dtype=float).reshape(1, 1, 2)
    bary = space.basis_at(np.array([cell]), point)[0, 0]
    if np.any(bary < -BARYCENTRIC_TOL) or np.any(bary > 1.0 + BARYCENTRIC_TOL):
        raise InvalidArgumentError(f"❌ Point {point.ravel().tolist()} lies outside active cell {cell}")
    local = coeffs[space.cell_dofs[cell]]
    return float(bary @ local), local @ space.grads[cell]
