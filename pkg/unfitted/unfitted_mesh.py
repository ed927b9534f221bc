"""
✂️ Unfitted Mesh
================
Classifies background triangles against the level set, builds the active
mesh T_h with its facet sets, extracts the polygonal surrogate of Γ and
clips cut cells for integration over Ω.

Tolerance rule (applied once, on vertex values):
- φ < −tol            → inside
- φ >  tol            → outside
- |φ| ≤ tol           → snapped to −tol (inside)
A triangle with an inside and an outside vertex is Cut; with inside
vertices and no outside vertex it is Interior; without an inside vertex it
is dropped. Every geometric computation downstream (crossings, normals,
clipping) uses the snapped values, so neighbouring cells agree bitwise on
shared crossing points.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from unfitted.background_mesh import BackgroundMesh, barycentric_gradients
from unfitted.errors import (
    DegenerateClipError,
    DegenerateCutError,
    DegenerateLevelSetError,
    EmptyDomainError,
    GeometryError,
    InvalidArgumentError,
)
from unfitted.problem_catalog import LevelSetProblem
from unfitted.quadrature import fan_triangles

# ==========================================
# 🔧 CONFIGURATION
# ==========================================
RELATIVE_TOL = 1e-12
CLIP_AREA_FLOOR = 1e-14


# ==========================================
# 📋 Data types
# ==========================================

@dataclass(frozen=True, eq=False)
class FacetSet:
    """A set of mesh edges with geometry and incident active cells.

    For facets on ∂Ω_h ``right`` is −1 and ``normal`` points away from
    Ω_h; for internal facets ``normal`` points from ``left`` to ``right``
    and jumps are taken as left − right.
    """

    edge: np.ndarray
    p0: np.ndarray
    p1: np.ndarray
    length: np.ndarray
    left: np.ndarray
    right: np.ndarray
    normal: np.ndarray

    def __len__(self) -> int:
        return len(self.edge)

    def subset(self, mask: np.ndarray) -> "FacetSet":
        return FacetSet(
            edge=self.edge[mask],
            p0=self.p0[mask],
            p1=self.p1[mask],
            length=self.length[mask],
            left=self.left[mask],
            right=self.right[mask],
            normal=self.normal[mask],
        )


@dataclass(frozen=True, eq=False)
class FacetRegistry:
    gamma_h: FacetSet
    gamma_h_int: FacetSet
    f_gamma: FacetSet
    f_gamma_cut: FacetSet


@dataclass(frozen=True, eq=False)
class ActiveMesh:
    cells: np.ndarray
    is_cut: np.ndarray
    cell_of_background: np.ndarray
    vertex_phi: np.ndarray
    snapped_phi: np.ndarray
    facets: FacetRegistry
    h: float
    tol: float

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def cut_cells(self) -> np.ndarray:
        return np.flatnonzero(self.is_cut)

    @property
    def interior_cells(self) -> np.ndarray:
        return np.flatnonzero(~self.is_cut)

    @property
    def n_cut(self) -> int:
        return int(self.is_cut.sum())


@dataclass(frozen=True, eq=False)
class BoundaryDiscretization:
    """Polygonal Γ: one segment per Cut cell, traversed with Ω on the left."""

    p0: np.ndarray
    p1: np.ndarray
    length: np.ndarray
    normal: np.ndarray
    cell: np.ndarray

    def __len__(self) -> int:
        return len(self.cell)

    @property
    def total_length(self) -> float:
        return float(self.length.sum())

    def dump(self, path) -> Path:
        """Plain-text dump, one ``s x0 y0 x1 y1 nx ny`` line per segment."""
        path = Path(path)
        with open(path, "w", encoding="utf-8") as f:
            for (x0, y0), (x1, y1), (nx, ny) in zip(self.p0, self.p1, self.normal):
                f.write(f"s {x0:.17g} {y0:.17g} {x1:.17g} {y1:.17g} {nx:.17g} {ny:.17g}\n")
        logging.info(f"✅ Saved {len(self)} boundary segments → {path}")
        return path


# ==========================================
# 🔍 Classification
# ==========================================

def classify_and_extract(bg: BackgroundMesh, problem: LevelSetProblem, tol: float | None = None) -> ActiveMesh:
    """Evaluate φ once per background vertex, classify cells, build the facet registry."""
    vertex_phi = np.asarray(problem.phi(bg.vertices[:, 0], bg.vertices[:, 1]), dtype=float)
    if tol is None:
        tol = RELATIVE_TOL * max(float(np.abs(vertex_phi).max()), np.finfo(float).tiny)
    if tol < 0:
        raise InvalidArgumentError(f"❌ Classification tolerance must be >= 0, got {tol}")

    inside = vertex_phi < -tol
    outside = vertex_phi > tol
    on_gamma = ~inside & ~outside

    flat = on_gamma[bg.triangles].all(axis=1)
    if flat.any():
        bad = int(np.flatnonzero(flat)[0])
        raise DegenerateLevelSetError(f"❌ Level set vanishes on all vertices of background triangle {bad}")

    has_inside = inside[bg.triangles].any(axis=1)
    has_outside = outside[bg.triangles].any(axis=1)
    retained = np.flatnonzero(has_inside)
    if len(retained) == 0:
        raise EmptyDomainError(f"❌ No background triangle intersects Ω for problem '{problem.name}'")

    is_cut = has_outside[retained]
    cell_of_background = np.full(bg.n_triangles, -1, dtype=np.int64)
    cell_of_background[retained] = np.arange(len(retained))
    snapped_phi = np.where(on_gamma, -tol, vertex_phi)

    facets = _build_facets(bg, cell_of_background, is_cut)
    mesh = ActiveMesh(
        cells=retained,
        is_cut=is_cut,
        cell_of_background=cell_of_background,
        vertex_phi=vertex_phi,
        snapped_phi=snapped_phi,
        facets=facets,
        h=bg.h,
        tol=tol,
    )
    logging.debug(
        f"📊 Active mesh n={bg.n}: {mesh.n_cells} cells ({mesh.n_cut} cut), "
        f"|Γ_h|={len(facets.gamma_h)}, |F_Γ|={len(facets.f_gamma)}, |Γ_h^i|={len(facets.gamma_h_int)}"
    )
    return mesh


def _build_facets(bg: BackgroundMesh, cell_of_background: np.ndarray, is_cut: np.ndarray) -> FacetRegistry:
    topo = bg.topology
    t0 = topo.edge_tris[:, 0]
    t1 = topo.edge_tris[:, 1]
    a0 = np.where(t0 >= 0, cell_of_background[np.maximum(t0, 0)], -1)
    a1 = np.where(t1 >= 0, cell_of_background[np.maximum(t1, 0)], -1)
    active0 = a0 >= 0
    active1 = a1 >= 0

    boundary = np.flatnonzero(active0 ^ active1)
    internal = np.flatnonzero(active0 & active1)

    # boundary facets: the active cell goes left
    b_left = np.where(active0[boundary], a0[boundary], a1[boundary])
    b_tri = np.where(active0[boundary], t0[boundary], t1[boundary])
    gamma_h = _facet_set(bg, boundary, b_left, np.full(len(boundary), -1, dtype=np.int64), b_tri)

    inner = _facet_set(bg, internal, a0[internal], a1[internal], t0[internal])
    cut_left = is_cut[inner.left]
    cut_right = is_cut[inner.right]
    return FacetRegistry(
        gamma_h=gamma_h,
        gamma_h_int=inner.subset(cut_left != cut_right),
        f_gamma=inner.subset(cut_left | cut_right),
        f_gamma_cut=inner.subset(cut_left & cut_right),
    )


def _facet_set(bg: BackgroundMesh, edges, left, right, left_tri) -> FacetSet:
    ends = bg.topology.edges[edges]
    p0 = bg.vertices[ends[:, 0]]
    p1 = bg.vertices[ends[:, 1]]
    tangent = p1 - p0
    length = np.linalg.norm(tangent, axis=1)
    normal = np.column_stack([tangent[:, 1], -tangent[:, 0]]) / length[:, None]
    opposite = bg.triangles[left_tri].sum(axis=1) - ends.sum(axis=1)
    towards_left = np.einsum("md,md->m", normal, bg.vertices[opposite] - p0) > 0.0
    normal[towards_left] *= -1.0
    return FacetSet(
        edge=np.asarray(edges, dtype=np.int64),
        p0=p0,
        p1=p1,
        length=length,
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        normal=normal,
    )


# ==========================================
# 〰️ Boundary segments
# ==========================================

def _crossing_points(bg: BackgroundMesh, snapped_phi: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Zero of the linear interpolant on each edge, computed from its lower-index vertex; NaN where φ keeps its sign."""
    ends = bg.topology.edges[edges]
    changes = _edge_changes_sign(bg, snapped_phi, edges)
    points = np.full((len(ends), 2), np.nan)
    ends = ends[changes]
    sa = snapped_phi[ends[:, 0]]
    sb = snapped_phi[ends[:, 1]]
    t = sa / (sa - sb)
    va = bg.vertices[ends[:, 0]]
    vb = bg.vertices[ends[:, 1]]
    points[changes] = va + t[:, None] * (vb - va)
    return points


def _edge_changes_sign(bg: BackgroundMesh, snapped_phi: np.ndarray, edges: np.ndarray) -> np.ndarray:
    ends = bg.topology.edges[edges]
    return (snapped_phi[ends[:, 0]] < 0.0) != (snapped_phi[ends[:, 1]] < 0.0)


def extract_boundary_segments(mesh: ActiveMesh, bg: BackgroundMesh) -> BoundaryDiscretization:
    """One straight segment per Cut cell from the two edge crossings of the linearized φ."""
    cut = mesh.cut_cells
    if len(cut) == 0:
        raise GeometryError("❌ Active mesh has no Cut cell, Γ cannot be discretized")

    tris = mesh.cells[cut]
    tri_edges = bg.topology.tri_edges[tris]  # (m, 3)
    crosses = _edge_changes_sign(bg, mesh.snapped_phi, tri_edges.ravel()).reshape(-1, 3)
    counts = crosses.sum(axis=1)
    if np.any(counts != 2):
        bad = int(np.flatnonzero(counts != 2)[0])
        raise DegenerateCutError(
            f"❌ Cut cell {int(cut[bad])} (background triangle {int(tris[bad])}) has {int(counts[bad])} edge crossings, expected 2"
        )

    picked = np.argsort(~crosses, axis=1, kind="stable")[:, :2]
    crossing_edges = np.take_along_axis(tri_edges, picked, axis=1)
    q0 = _crossing_points(bg, mesh.snapped_phi, crossing_edges[:, 0])
    q1 = _crossing_points(bg, mesh.snapped_phi, crossing_edges[:, 1])

    grads = barycentric_gradients(bg.corners(tris))  # (m, 3, 2)
    grad_phi = np.einsum("mv,mvd->md", mesh.snapped_phi[bg.triangles[tris]], grads)
    normal = grad_phi / np.linalg.norm(grad_phi, axis=1)[:, None]

    tangent = q1 - q0
    flip = tangent[:, 1] * normal[:, 0] - tangent[:, 0] * normal[:, 1] < 0.0
    p0 = np.where(flip[:, None], q1, q0)
    p1 = np.where(flip[:, None], q0, q1)
    length = np.linalg.norm(p1 - p0, axis=1)

    bdry = BoundaryDiscretization(p0=p0, p1=p1, length=length, normal=normal, cell=cut.copy())
    logging.debug(f"〰️ Extracted {len(bdry)} boundary segments, |Γ| = {bdry.total_length:.6f}")
    return bdry


# ==========================================
# ✂️ Clipping
# ==========================================

def _clip(mesh: ActiveMesh, bg: BackgroundMesh, cell: int, keep_inside: bool) -> np.ndarray:
    tri = int(mesh.cells[cell])
    verts = bg.triangles[tri]
    points = bg.vertices[verts]
    inside = mesh.snapped_phi[verts] < 0.0
    keep = inside if keep_inside else ~inside
    edges = bg.topology.tri_edges[tri]
    crossings = _crossing_points(bg, mesh.snapped_phi, edges)

    polygon = []
    for k in range(3):
        if keep[k]:
            polygon.append(points[k])
        if inside[k] != inside[(k + 1) % 3]:
            polygon.append(crossings[k])
    return np.array(polygon).reshape(-1, 2)


def _area(polygon: np.ndarray) -> float:
    x, y = polygon[:, 0], polygon[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def clip_cell_to_domain(cell: int, mesh: ActiveMesh, bg: BackgroundMesh) -> np.ndarray:
    """Counter-clockwise polygon of cell ∩ {linearized φ ≤ 0}: the triangle itself or a 3–4 gon."""
    if not 0 <= cell < mesh.n_cells:
        raise InvalidArgumentError(f"❌ Active cell index {cell} out of range [0, {mesh.n_cells})")
    if not mesh.is_cut[cell]:
        return bg.vertices[bg.triangles[mesh.cells[cell]]].copy()

    polygon = _clip(mesh, bg, cell, keep_inside=True)
    cell_area = _area(bg.vertices[bg.triangles[mesh.cells[cell]]])
    if len(polygon) < 3 or _area(polygon) < CLIP_AREA_FLOOR * cell_area:
        raise DegenerateClipError(f"❌ Clipped polygon of cut cell {cell} is degenerate")
    return polygon


def clip_cell_to_strip(cell: int, mesh: ActiveMesh, bg: BackgroundMesh) -> np.ndarray:
    """Part of a Cut cell outside Ω (its share of the strip B_h); empty for Interior cells."""
    if not mesh.is_cut[cell]:
        return np.zeros((0, 2))
    return _clip(mesh, bg, cell, keep_inside=False)


def domain_subtriangles(mesh: ActiveMesh, bg: BackgroundMesh):
    """Triangles tiling the polygonal Ω, shape (m, 3, 2), with their owning active cell."""
    interior = mesh.interior_cells
    pieces = [bg.corners(mesh.cells[interior])]
    owners = [interior]
    for cell in mesh.cut_cells:
        fan = fan_triangles(clip_cell_to_domain(int(cell), mesh, bg))
        pieces.append(fan)
        owners.append(np.full(len(fan), cell, dtype=np.int64))
    return np.concatenate(pieces), np.concatenate(owners)


def strip_subtriangles(mesh: ActiveMesh, bg: BackgroundMesh):
    """Triangles tiling B_h = Ω_h \\ Ω, with their owning active cell."""
    pieces = [np.zeros((0, 3, 2))]
    owners = [np.zeros(0, dtype=np.int64)]
    for cell in mesh.cut_cells:
        polygon = clip_cell_to_strip(int(cell), mesh, bg)
        if len(polygon) >= 3:
            fan = fan_triangles(polygon)
            pieces.append(fan)
            owners.append(np.full(len(fan), cell, dtype=np.int64))
    return np.concatenate(pieces), np.concatenate(owners)


def facet_strip_parts(mesh: ActiveMesh, bg: BackgroundMesh, facets: FacetSet):
    """Portion of each facet lying in B_h (linearized φ ≥ 0) as (p0, p1); zero length when none."""
    ends = bg.topology.edges[facets.edge]
    sa = mesh.snapped_phi[ends[:, 0]]
    sb = mesh.snapped_phi[ends[:, 1]]
    va = bg.vertices[ends[:, 0]]
    vb = bg.vertices[ends[:, 1]]
    crossing = _crossing_points(bg, mesh.snapped_phi, facets.edge)

    a_out = sa >= 0.0
    b_out = sb >= 0.0
    p0 = np.where(a_out[:, None], va, crossing)
    p1 = np.where(b_out[:, None], vb, crossing)
    none = ~a_out & ~b_out
    p0 = np.where(none[:, None], va, p0)
    p1 = np.where(none[:, None], va, p1)
    return p0, p1
