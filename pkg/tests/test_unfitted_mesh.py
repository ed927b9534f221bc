"""
🧪 Unit Tests - Unfitted Mesh
Classification, facet sets, boundary segments and clipping

Test Count: 17 tests (15 unit, 2 integration)
"""

import math
from collections import Counter

import numpy as np
import pytest

from conftest import discretize
from unfitted.background_mesh import barycentric_gradients, build_crisscross
from unfitted.errors import DegenerateLevelSetError, EmptyDomainError, GeometryError
from unfitted.problem_catalog import LevelSetProblem, disk_problem, flower_problem
from unfitted.unfitted_mesh import (
    classify_and_extract,
    clip_cell_to_domain,
    domain_subtriangles,
    extract_boundary_segments,
    facet_strip_parts,
    strip_subtriangles,
)


def plane(values, points):
    """Linear level set taking ``values`` at the three ``points``."""
    matrix = np.column_stack([np.ones(3), np.asarray(points, dtype=float)])
    alpha, beta, gamma = np.linalg.solve(matrix, np.asarray(values, dtype=float))
    return LevelSetProblem(
        name="plane",
        phi=lambda x, y: alpha + beta * np.asarray(x, dtype=float) + gamma * np.asarray(y, dtype=float),
        grad_phi=lambda x, y: (np.full(np.shape(x), beta), np.full(np.shape(y), gamma)),
    )


# first background triangle of the n=2 mesh: corner, next corner, cell center
FIRST_TRIANGLE = [[-0.5, -0.5], [0.0, -0.5], [-0.25, -0.25]]


# ==========================================
# ✅ Test 1-5: Classification
# ==========================================

@pytest.mark.unit
def test_all_negative_cell_is_interior():
    """Test 1: vertex φ = (−1, −1, −1) → Interior"""
    bg = build_crisscross(2)
    mesh = classify_and_extract(bg, plane([-1.0, -1.0, -1.0], FIRST_TRIANGLE))
    assert mesh.n_cells == bg.n_triangles
    assert mesh.n_cut == 0


@pytest.mark.unit
def test_sign_change_cell_is_cut():
    """Test 2: vertex φ = (−1, 1, 1) → Cut"""
    bg = build_crisscross(2)
    mesh = classify_and_extract(bg, plane([-1.0, 1.0, 1.0], FIRST_TRIANGLE))
    assert mesh.cells[0] == 0
    assert mesh.is_cut[0]


@pytest.mark.unit
def test_flower_classification_matches_recount(flower16):
    """Test 3: active and cut counts equal a per-cell sign inspection of the same vertex values"""
    bg, mesh = flower16.bg, flower16.mesh
    phi = mesh.vertex_phi
    tol = mesh.tol
    active, cut = 0, 0
    for tri in bg.triangles:
        values = phi[tri]
        if any(v < -tol for v in values):
            active += 1
            if any(v > tol for v in values):
                cut += 1
    assert mesh.n_cells == active
    assert mesh.n_cut == cut
    assert np.all(mesh.vertex_phi[bg.triangles[mesh.cells[mesh.interior_cells]]] <= mesh.tol)


@pytest.mark.unit
def test_empty_domain_rejected():
    """Test 4: φ > 0 everywhere → empty-domain error"""
    problem = LevelSetProblem(name="nothing", phi=lambda x, y: 1.0 + 0.0 * x, grad_phi=lambda x, y: (0 * x, 0 * y))
    with pytest.raises(EmptyDomainError):
        classify_and_extract(build_crisscross(4), problem)


@pytest.mark.unit
def test_vanishing_level_set_rejected():
    """Test 5: φ ≡ 0 → degenerate-levelset error"""
    problem = LevelSetProblem(name="flat", phi=lambda x, y: 0.0 * x, grad_phi=lambda x, y: (0 * x, 0 * y))
    with pytest.raises(DegenerateLevelSetError):
        classify_and_extract(build_crisscross(4), problem)


# ==========================================
# ✅ Test 6-8: Facet Registry
# ==========================================

@pytest.mark.unit
def test_facet_set_inclusions(flower16):
    """Test 6: Γ_h^i ⊆ F_Γ, F_Γ^cut ⊆ F_Γ, Γ_h^i ∩ F_Γ^cut = ∅"""
    facets = flower16.mesh.facets
    f_gamma = set(facets.f_gamma.edge)
    inner = set(facets.gamma_h_int.edge)
    cut = set(facets.f_gamma_cut.edge)
    assert inner <= f_gamma
    assert cut <= f_gamma
    assert not inner & cut
    assert len(facets.f_gamma) == len(inner) + len(cut)


@pytest.mark.unit
def test_gamma_h_length_equals_boundary_walk(flower16):
    """Test 7: Σ|Γ_h facets| equals the perimeter from edges used once by active cells"""
    bg, mesh = flower16.bg, flower16.mesh
    counts = Counter()
    for tri in bg.triangles[mesh.cells]:
        for k in range(3):
            counts[tuple(sorted((tri[k], tri[(k + 1) % 3])))] += 1
    perimeter = sum(np.linalg.norm(bg.vertices[a] - bg.vertices[b]) for (a, b), c in counts.items() if c == 1)
    assert mesh.facets.gamma_h.length.sum() == pytest.approx(perimeter, rel=1e-13)


@pytest.mark.unit
def test_gamma_h_normals_point_out_of_active_cells(flower16):
    """Test 8: outward normals and a single incident active cell"""
    bg, mesh = flower16.bg, flower16.mesh
    gamma_h = mesh.facets.gamma_h
    assert np.all(gamma_h.right == -1)
    centroids = bg.corners(mesh.cells[gamma_h.left]).mean(axis=1)
    midpoints = 0.5 * (gamma_h.p0 + gamma_h.p1)
    assert np.all(np.einsum("md,md->m", gamma_h.normal, midpoints - centroids) > 0)


# ==========================================
# ✅ Test 9-12: Boundary Segments
# ==========================================

@pytest.mark.unit
def test_crossing_at_edge_midpoint():
    """Test 9: φ(a) = −1, φ(b) = 1 → crossing at t = 0.5"""
    bg = build_crisscross(2)
    mesh = classify_and_extract(bg, plane([-1.0, 1.0, 1.0], FIRST_TRIANGLE))
    bdry = extract_boundary_segments(mesh, bg)
    first = np.flatnonzero(bdry.cell == 0)[0]
    ends = {tuple(np.round(p, 12)) for p in (bdry.p0[first], bdry.p1[first])}
    assert ends == {(-0.25, -0.5), (-0.375, -0.375)}


@pytest.mark.unit
def test_snapped_vertex_gives_one_segment():
    """Test 10: φ = (−1, tol/2, 1): the vertex is snapped and one segment is produced"""
    bg = build_crisscross(2)
    tol = 1e-3
    mesh = classify_and_extract(bg, plane([-1.0, tol / 2, 1.0], FIRST_TRIANGLE), tol=tol)
    bdry = extract_boundary_segments(mesh, bg)
    assert np.sum(bdry.cell == 0) == 1
    first = np.flatnonzero(bdry.cell == 0)[0]
    ends = np.array([bdry.p0[first], bdry.p1[first]])
    assert np.min(np.linalg.norm(ends - np.array([0.0, -0.5]), axis=1)) < 1e-3


@pytest.mark.unit
def test_segments_lie_in_parent_cells_with_outward_normals(flower16):
    """Test 11: endpoints inside the parent triangle, n·∇φ_lin > 0, one segment per Cut cell"""
    bg, mesh, bdry = flower16.bg, flower16.mesh, flower16.bdry
    assert len(bdry) == mesh.n_cut
    corners = bg.corners(mesh.cells[bdry.cell])
    grads = barycentric_gradients(corners)
    centroids = corners.mean(axis=1)
    for ends in (bdry.p0, bdry.p1):
        bary = 1.0 / 3.0 + np.einsum("md,mvd->mv", ends - centroids, grads)
        assert np.all(bary > -1e-12)
        assert np.all(np.min(np.abs(bary), axis=1) < 1e-12)
    grad_lin = np.einsum("mv,mvd->md", mesh.snapped_phi[bg.triangles[mesh.cells[bdry.cell]]], grads)
    assert np.all(np.einsum("md,md->m", bdry.normal, grad_lin) > 0)


@pytest.mark.unit
def test_no_cut_cells_cannot_discretize_boundary():
    """Test 12: Γ extraction needs a Cut cell"""
    bg = build_crisscross(2)
    mesh = classify_and_extract(bg, plane([-1.0, -1.0, -1.0], FIRST_TRIANGLE))
    with pytest.raises(GeometryError):
        extract_boundary_segments(mesh, bg)


# ==========================================
# ✅ Test 13-17: Clipping and Geometry Oracles
# ==========================================

@pytest.mark.unit
def test_clip_right_triangle_at_midpoints():
    """Test 13: φ = (−1, 1, 1) → similar triangle scaled by 1/2, a quarter of the area"""
    bg = build_crisscross(2)
    mesh = classify_and_extract(bg, plane([-1.0, 1.0, 1.0], FIRST_TRIANGLE))
    polygon = clip_cell_to_domain(0, mesh, bg)
    np.testing.assert_allclose(polygon, [[-0.5, -0.5], [-0.25, -0.5], [-0.375, -0.375]], atol=1e-14)
    x, y = polygon[:, 0], polygon[:, 1]
    area = 0.5 * (np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))
    assert area == pytest.approx(1.0 / 64.0, rel=1e-12)


@pytest.mark.unit
def test_interior_cell_clips_to_itself(flower16):
    """Test 14: Interior cells are returned unchanged and the clipped Ω is no larger than Ω_h"""
    bg, mesh = flower16.bg, flower16.mesh
    cell = int(mesh.interior_cells[0])
    np.testing.assert_array_equal(clip_cell_to_domain(cell, mesh, bg), bg.corners(mesh.cells[[cell]])[0])
    corners, _ = domain_subtriangles(mesh, bg)
    d1, d2 = corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0]
    omega = 0.5 * np.sum(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    active = bg.signed_areas()[mesh.cells].sum()
    assert 0 < omega <= active


def _clipped_area(d):
    corners, _ = domain_subtriangles(d.mesh, d.bg)
    d1, d2 = corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0]
    return 0.5 * np.sum(np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]))


@pytest.mark.integration
def test_disk_geometry_oracles(disk64):
    """Test 15: disk r=0.25, n=64: |Ω| within 1.5e-4 of π/16 (chords cut inside), |Γ| within 5e-3 of π/2"""
    deficit = math.pi / 16 - _clipped_area(disk64)
    assert 0 < deficit < 1.5e-4
    assert abs(disk64.bdry.total_length - math.pi / 2) < 5e-3

    fine = discretize(disk_problem(), 128)
    assert 3.0 < deficit / (math.pi / 16 - _clipped_area(fine)) < 5.5


@pytest.mark.integration
def test_cut_band_grows_linearly():
    """Test 16: cut_count(2n)/cut_count(n) ∈ [1.5, 2.5] for n ∈ {16, 32, 64}"""
    problem = flower_problem()
    counts = [classify_and_extract(build_crisscross(n), problem).n_cut for n in (16, 32, 64, 128)]
    for coarse, fine in zip(counts, counts[1:]):
        assert 1.5 <= fine / coarse <= 2.5


@pytest.mark.unit
@pytest.mark.filterwarnings("error::RuntimeWarning")
def test_clipping_stays_quiet_on_uncut_edges(flower16):
    """Test 17: clipping and strip parts never evaluate a crossing on an edge without a sign change"""
    d = flower16
    domain_subtriangles(d.mesh, d.bg)
    strip_subtriangles(d.mesh, d.bg)
    p0, p1 = facet_strip_parts(d.mesh, d.bg, d.mesh.facets.f_gamma)
    assert np.all(np.isfinite(p0)) and np.all(np.isfinite(p1))
    assert np.all(np.linalg.norm(p1 - p0, axis=1) <= d.mesh.facets.f_gamma.length * (1 + 1e-12))


# ==========================================
# 📊 Test Summary
# ==========================================
"""
✅ UNFITTED MESH TESTS SUMMARY (17 tests):

1. test_all_negative_cell_is_interior - Interior classification
2. test_sign_change_cell_is_cut - Cut classification
3. test_flower_classification_matches_recount - brute-force oracle
4. test_empty_domain_rejected - φ > 0 everywhere
5. test_vanishing_level_set_rejected - φ ≡ 0
6. test_facet_set_inclusions - registry invariants
7. test_gamma_h_length_equals_boundary_walk - perimeter of ∂Ω_h
8. test_gamma_h_normals_point_out_of_active_cells - Γ_h orientation
9. test_crossing_at_edge_midpoint - linear interpolation
10. test_snapped_vertex_gives_one_segment - tolerance snapping
11. test_segments_lie_in_parent_cells_with_outward_normals - segment invariants
12. test_no_cut_cells_cannot_discretize_boundary - error path
13. test_clip_right_triangle_at_midpoints - clipped sub-triangle
14. test_interior_cell_clips_to_itself - no-op clip, area monotonicity
15. test_disk_geometry_oracles - analytic area and perimeter, O(h²) area deficit
16. test_cut_band_grows_linearly - refinement consistency
17. test_clipping_stays_quiet_on_uncut_edges - no NaN arithmetic on uncut edges
"""
