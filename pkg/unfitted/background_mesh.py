"""
🕸️ Background Mesh
==================
Uniform criss-cross triangulation of the square O = (−0.5, 0.5)²: every
one of the n×n square cells gets a center vertex and is split into four
counter-clockwise triangles (bottom, right, top, left).

Vertex numbering:
- lattice corner (i, j) → j·(n+1) + i
- cell center (i, j)    → (n+1)² + j·n + i
Triangle numbering: 4·(j·n + i) + k, k = 0 bottom, 1 right, 2 top, 3 left.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from unfitted.errors import InvalidArgumentError

# ==========================================
# 🔧 CONFIGURATION
# ==========================================
SQUARE_MIN = -0.5
SQUARE_SIZE = 1.0


@dataclass(frozen=True, eq=False)
class EdgeTopology:
    """Unique edges of a triangulation.

    ``edges[e]`` holds the two vertex indices in increasing order,
    ``tri_edges[t, k]`` the edge joining local vertices k and k+1 of
    triangle t, ``edge_tris[e]`` the (up to) two incident triangles,
    −1 where absent.
    """

    edges: np.ndarray
    tri_edges: np.ndarray
    edge_tris: np.ndarray


@dataclass(frozen=True, eq=False)
class BackgroundMesh:
    n: int
    vertices: np.ndarray
    triangles: np.ndarray
    h: float

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def corners(self, triangles=None) -> np.ndarray:
        """Vertex coordinates per triangle, shape (m, 3, 2)."""
        tris = self.triangles if triangles is None else self.triangles[triangles]
        return self.vertices[tris]

    def signed_areas(self) -> np.ndarray:
        p = self.corners()
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def diameters(self) -> np.ndarray:
        p = self.corners()
        lengths = np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2)
        return lengths.max(axis=1)

    @cached_property
    def topology(self) -> EdgeTopology:
        local = np.stack([self.triangles, np.roll(self.triangles, -1, axis=1)], axis=2)  # (nt, 3, 2)
        pairs = np.sort(local.reshape(-1, 2), axis=1)
        edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        tri_edges = inverse.reshape(-1, 3)

        owners = np.repeat(np.arange(self.n_triangles), 3)
        order = np.argsort(inverse, kind="stable")
        sorted_edges = inverse[order]
        sorted_owners = owners[order]
        edge_tris = np.full((len(edges), 2), -1, dtype=np.int64)
        first = np.ones(len(sorted_edges), dtype=bool)
        first[1:] = sorted_edges[1:] != sorted_edges[:-1]
        edge_tris[sorted_edges[first], 0] = sorted_owners[first]
        edge_tris[sorted_edges[~first], 1] = sorted_owners[~first]
        return EdgeTopology(edges=edges, tri_edges=tri_edges, edge_tris=edge_tris)

    def locate(self, points: np.ndarray) -> np.ndarray:
        """Index of the triangle containing each point (points outside O → −1)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        scaled = (points - SQUARE_MIN) * self.n / SQUARE_SIZE
        inside = np.all((scaled >= 0.0) & (scaled <= self.n), axis=1)
        cell = np.clip(np.floor(scaled).astype(np.int64), 0, self.n - 1)
        u = scaled[:, 0] - cell[:, 0]
        v = scaled[:, 1] - cell[:, 1]
        below_diag = v <= u
        below_anti = v <= 1.0 - u
        k = np.where(below_diag & below_anti, 0, np.where(below_diag, 1, np.where(below_anti, 3, 2)))
        index = 4 * (cell[:, 1] * self.n + cell[:, 0]) + k
        return np.where(inside, index, -1)

    def dump(self, path) -> Path:
        """Plain-text dump: ``v x y`` per vertex, ``t i j k`` per triangle (0-based)."""
        path = Path(path)
        with open(path, "w", encoding="utf-8") as f:
            for x, y in self.vertices:
                f.write(f"v {x:.17g} {y:.17g}\n")
            for i, j, k in self.triangles:
                f.write(f"t {i} {j} {k}\n")
        logging.info(f"✅ Saved background mesh ({self.n_triangles} triangles) → {path}")
        return path


def build_crisscross(n: int) -> BackgroundMesh:
    """Criss-cross mesh with n cells per side: (n+1)² + n² vertices, 4n² triangles."""
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise InvalidArgumentError(f"❌ Criss-cross mesh needs n >= 2 cells per side, got {n}")
    n = int(n)
    step = SQUARE_SIZE / n

    ii, jj = np.meshgrid(np.arange(n + 1), np.arange(n + 1))
    lattice = np.column_stack([SQUARE_MIN + ii.ravel() * step, SQUARE_MIN + jj.ravel() * step])
    ci, cj = np.meshgrid(np.arange(n), np.arange(n))
    ci = ci.ravel()
    cj = cj.ravel()
    centers = np.column_stack([SQUARE_MIN + (ci + 0.5) * step, SQUARE_MIN + (cj + 0.5) * step])
    vertices = np.vstack([lattice, centers])

    a = cj * (n + 1) + ci
    b = a + 1
    c = a + n + 2
    d = a + n + 1
    m = (n + 1) ** 2 + cj * n + ci
    triangles = np.stack(
        [
            np.column_stack([a, b, m]),
            np.column_stack([b, c, m]),
            np.column_stack([c, d, m]),
            np.column_stack([d, a, m]),
        ],
        axis=1,
    ).reshape(-1, 3)

    mesh = BackgroundMesh(n=n, vertices=vertices, triangles=triangles.astype(np.int64), h=step * math.sqrt(2.0) / 2.0)
    logging.debug(f"🕸️ Criss-cross mesh n={n}: {mesh.n_vertices} vertices, {mesh.n_triangles} triangles")
    return mesh


def barycentric_gradients(corners: np.ndarray) -> np.ndarray:
    """Constant gradients of the three barycentric coordinates, shape (m, 3, 2)."""
    corners = np.asarray(corners, dtype=float).reshape(-1, 3, 2)
    x = corners[:, :, 0]
    y = corners[:, :, 1]
    det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    grads = np.empty_like(corners)
    grads[:, 0, 0] = y[:, 1] - y[:, 2]
    grads[:, 0, 1] = x[:, 2] - x[:, 1]
    grads[:, 1, 0] = y[:, 2] - y[:, 0]
    grads[:, 1, 1] = x[:, 0] - x[:, 2]
    grads[:, 2, 0] = y[:, 0] - y[:, 1]
    grads[:, 2, 1] = x[:, 1] - x[:, 0]
    return grads / det[:, None, None]
