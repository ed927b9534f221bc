"""
🎯 Quadrature
=============
Fixed-order rules on segments (Gauss–Legendre), triangles (centroid,
3-point, 6-point) and convex clipped polygons (fan of triangle rules).
Weights are absolute: they sum to the length / area of the domain.

The batched helpers (``segment_points``, ``triangle_points``) are what the
assembly and error code use; the single-domain rules wrap them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from unfitted.errors import QuadratureError

# ==========================================
# 🔧 CONFIGURATION
# ==========================================
SEGMENT_ORDERS = (1, 2, 3)
TRIANGLE_DEGREES = (1, 2, 4)

# Default orders used across the package
SEGMENT_ORDER = 2
TRIANGLE_DEGREE = 2
ERROR_DEGREE = 4

_DUNAVANT4_A1 = 0.445948490915964886318329253883
_DUNAVANT4_W1 = 0.223381589678011465944691361182
_DUNAVANT4_A2 = 0.091576213509770743459571463402
_DUNAVANT4_W2 = 0.109951743655321867388641971818


def _triangle_table(degree: int):
    """Barycentric nodes (k, 3) and weights summing to 1."""
    if degree == 1:
        return np.full((1, 3), 1.0 / 3.0), np.array([1.0])
    if degree == 2:
        a, b = 1.0 / 6.0, 2.0 / 3.0
        bary = np.array([[b, a, a], [a, b, a], [a, a, b]])
        return bary, np.full(3, 1.0 / 3.0)
    if degree == 4:
        a1, a2 = _DUNAVANT4_A1, _DUNAVANT4_A2
        b1, b2 = 1.0 - 2.0 * a1, 1.0 - 2.0 * a2
        bary = np.array(
            [
                [b1, a1, a1],
                [a1, b1, a1],
                [a1, a1, b1],
                [b2, a2, a2],
                [a2, b2, a2],
                [a2, a2, b2],
            ]
        )
        return bary, np.array([_DUNAVANT4_W1] * 3 + [_DUNAVANT4_W2] * 3)
    raise QuadratureError(f"❌ Unsupported triangle degree {degree} (supported: {TRIANGLE_DEGREES})")


def _segment_table(order: int):
    """Parameters t ∈ [0, 1] and weights summing to 1."""
    if order not in SEGMENT_ORDERS:
        raise QuadratureError(f"❌ Unsupported segment order {order} (supported: {SEGMENT_ORDERS})")
    nodes, weights = leggauss(order)
    return 0.5 * (nodes + 1.0), 0.5 * weights


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray

    def integrate(self, integrand) -> float:
        values = integrand(self.points[:, 0], self.points[:, 1])
        return float(np.dot(self.weights, values))

    @property
    def measure(self) -> float:
        return float(self.weights.sum())


# ==========================================
# 📦 Batched rules
# ==========================================

def segment_points(p0: np.ndarray, p1: np.ndarray, order: int = SEGMENT_ORDER):
    """Points (m, k, 2), weights (m, k) and parameters t (k,) on m segments."""
    t, w = _segment_table(order)
    p0 = np.asarray(p0, dtype=float).reshape(-1, 2)
    p1 = np.asarray(p1, dtype=float).reshape(-1, 2)
    points = p0[:, None, :] + t[None, :, None] * (p1 - p0)[:, None, :]
    lengths = np.linalg.norm(p1 - p0, axis=1)
    return points, lengths[:, None] * w[None, :], t


def triangle_points(corners: np.ndarray, degree: int = TRIANGLE_DEGREE):
    """Points (m, k, 2), weights (m, k) and barycentric nodes (k, 3) on m triangles.

    Weights carry the unsigned area, so clockwise input integrates correctly.
    """
    bary, w = _triangle_table(degree)
    corners = np.asarray(corners, dtype=float).reshape(-1, 3, 2)
    points = np.einsum("kv,mvd->mkd", bary, corners)
    d1 = corners[:, 1] - corners[:, 0]
    d2 = corners[:, 2] - corners[:, 0]
    areas = 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    return points, areas[:, None] * w[None, :], bary


def fan_triangles(polygon: np.ndarray) -> np.ndarray:
    """Fan triangulation from vertex 0, shape (len(polygon) − 2, 3, 2)."""
    polygon = np.asarray(polygon, dtype=float)
    idx = np.arange(1, len(polygon) - 1)
    return np.stack([np.repeat(polygon[:1], len(idx), axis=0), polygon[idx], polygon[idx + 1]], axis=1)


# ==========================================
# 📏 Single-domain rules
# ==========================================

def segment_rule(p0, p1, order: int = SEGMENT_ORDER) -> QuadratureRule:
    """Gauss–Legendre with ``order`` points, exact for degree 2·order − 1."""
    points, weights, _ = segment_points(p0, p1, order)
    return QuadratureRule(points=points[0], weights=weights[0])


def triangle_rule(vertices, degree: int = TRIANGLE_DEGREE) -> QuadratureRule:
    corners = np.asarray(vertices, dtype=float).reshape(1, 3, 2)
    points, weights, _ = triangle_points(corners, degree)
    scale = np.abs(corners).max() if np.abs(corners).max() > 0 else 1.0
    if weights.sum() <= 1e-14 * scale * scale:
        raise QuadratureError("❌ Zero-area triangle has no quadrature rule")
    return QuadratureRule(points=points[0], weights=weights[0])


def polygon_rule(polygon, degree: int = ERROR_DEGREE) -> QuadratureRule:
    """Fan triangulation from vertex 0 with ``triangle_rule`` on each piece.

    Input must be a simple convex counter-clockwise polygon (the output of
    clipping); a fan triangle with nonpositive orientation means the input
    is not, and is rejected.
    """
    polygon = np.asarray(polygon, dtype=float)
    if polygon.ndim != 2 or polygon.shape[1] != 2 or len(polygon) < 3:
        raise QuadratureError(f"❌ Polygon needs at least 3 points in the plane, got shape {polygon.shape}")
    fan = fan_triangles(polygon)
    d1 = fan[:, 1] - fan[:, 0]
    d2 = fan[:, 2] - fan[:, 0]
    signed = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    if np.any(signed <= 0.0):
        raise QuadratureError("❌ Polygon is self-intersecting or not counter-clockwise convex")
    points, weights, _ = triangle_points(fan, degree)
    return QuadratureRule(points=points.reshape(-1, 2), weights=weights.reshape(-1))
