"""Simplicial meshes: skeleton, incidence, frames, boundary classification.

Orientation convention: every subsimplex is identified by its ascending
global vertex-index tuple, and edge tangents point from the lower to the
higher index.  Meshes are immutable after construction; all queries are pure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np

from .forms import Simplex

COLLINEAR_TOL = 1e-12


def _exact_volume(vertices):
    """Exact signed volume of a full-dimensional simplex (Fraction)."""
    vf = [[Fraction(float(x)) for x in row] for row in vertices]
    n = len(vf) - 1
    edges = [[vf[i + 1][j] - vf[0][j] for j in range(n)] for i in range(n)]
    return Simplex._det(edges) / Fraction(math.factorial(n))


@dataclass
class Frame:
    """Orthonormal tangent/normal vectors attached to an edge or face."""
    tangents: np.ndarray   # (t, n): one row per tangent direction
    normals: np.ndarray    # (m, n): one row per normal direction


@dataclass
class BoundaryClassification:
    corner_vertices: set = field(default_factory=set)
    noncorner_boundary_vertices: set = field(default_factory=set)
    corner_edges: set = field(default_factory=set)
    noncorner_boundary_edges: set = field(default_factory=set)
    has_boundary: bool = True

    @property
    def v0(self):
        return len(self.corner_vertices) + len(self.noncorner_boundary_vertices)

    @property
    def v0s(self):
        return len(self.noncorner_boundary_vertices)

    @property
    def e0(self):
        return len(self.corner_edges) + len(self.noncorner_boundary_edges)


class SimplicialMesh:
    """A conforming simplicial complex in dimension 1, 2 or 3."""

    def __init__(self, vertices, cells):
        self.vertices = np.asarray(vertices, dtype=float)
        if self.vertices.ndim != 2:
            raise ValueError("vertices must be a 2D coordinate array")
        self.dim = self.vertices.shape[1]
        if self.dim not in (1, 2, 3):
            raise ValueError("only dimensions 1..3 are supported")
        cells = [tuple(sorted(int(i) for i in c)) for c in cells]
        if not cells:
            raise ValueError("mesh needs at least one cell")
        seen = set()
        for c in cells:
            if len(c) != self.dim + 1 or len(set(c)) != self.dim + 1:
                raise ValueError(f"cell {c} is not a {self.dim}-simplex")
            if any(i < 0 or i >= len(self.vertices) for i in c):
                raise ValueError(f"cell {c} references an unknown vertex")
            if c in seen:
                raise ValueError(f"duplicate cell {c}")
            seen.add(c)
            if _exact_volume(self.vertices[list(c)]) == 0:
                raise ValueError(f"degenerate cell {c} (zero volume)")
        self.cells = np.array(cells, dtype=int)

        # skeleton[d]: sorted list of ascending vertex tuples; ids are indices
        self.skeleton = {}
        self._ids = {}
        for d in range(self.dim + 1):
            simplices = set()
            for c in cells:
                simplices.update(combinations(c, d + 1))
            ordered = sorted(simplices)
            self.skeleton[d] = ordered
            self._ids[d] = {s: i for i, s in enumerate(ordered)}

        # cofaces: for each simplex, the cells containing it
        self.cofaces = {d: [[] for _ in self.skeleton[d]] for d in range(self.dim)}
        for ci, c in enumerate(cells):
            for d in range(self.dim):
                for s in combinations(c, d + 1):
                    self.cofaces[d][self._ids[d][s]].append(ci)

        facets = self.skeleton[self.dim - 1]
        for fi, f in enumerate(facets):
            if len(self.cofaces[self.dim - 1][fi]) > 2:
                raise ValueError(f"facet {f} has more than two cofaces")

        # boundary flags propagate down from boundary facets
        self.boundary = {d: [False] * len(self.skeleton[d]) for d in range(self.dim + 1)}
        for fi, f in enumerate(facets):
            if len(self.cofaces[self.dim - 1][fi]) == 1:
                for d in range(self.dim):
                    for s in combinations(f, d + 1):
                        self.boundary[d][self._ids[d][s]] = True

        self._frames = {}
        self._sub_cache = {}
        self._edge_normal_seed = None

    # -- basic queries ---------------------------------------------------------
    def simplex_id(self, verts):
        verts = tuple(sorted(verts))
        return self._ids[len(verts) - 1][verts]

    def count(self, d):
        return len(self.skeleton[d])

    @property
    def counts(self):
        """(V, E, F, T) with zeros above the mesh dimension."""
        out = [0, 0, 0, 0]
        for d in range(self.dim + 1):
            out[d] = len(self.skeleton[d])
        return tuple(out)

    def boundary_simplices(self, d):
        return [i for i, b in enumerate(self.boundary[d]) if b]

    def subsimplices(self, d):
        return self.skeleton[d]

    def euler_characteristic(self):
        return sum((-1) ** d * len(self.skeleton[d]) for d in range(self.dim + 1))

    # -- frames ------------------------------------------------------------------
    def frame(self, d, idx):
        """Deterministic orthonormal frame of an edge (d=1) or face (d=2)."""
        key = (d, idx)
        if key in self._frames:
            return self._frames[key]
        verts = self.skeleton[d][idx]
        pts = self.vertices[list(verts)]
        if d == 1:
            tau = pts[1] - pts[0]
            tau = tau / np.linalg.norm(tau)
            if self.dim == 1:
                fr = Frame(tangents=tau[None, :], normals=np.zeros((0, 1)))
            elif self.dim == 2:
                nu = np.array([tau[1], -tau[0]])
                fr = Frame(tangents=tau[None, :], normals=nu[None, :])
            else:
                fr = Frame(tangents=tau[None, :], normals=self._edge_normals(idx, tau))
        elif d == 2 and self.dim == 3:
            t1 = pts[1] - pts[0]
            nu = np.cross(t1, pts[2] - pts[0])
            nu = nu / np.linalg.norm(nu)
            t1 = t1 / np.linalg.norm(t1)
            t2 = np.cross(nu, t1)
            fr = Frame(tangents=np.vstack([t1, t2]), normals=nu[None, :])
        else:
            raise ValueError("frames exist for edges and (in 3D) faces only")
        self._frames[key] = fr
        return fr

    def _edge_normals(self, idx, tau):
        if self._edge_normal_seed is not None:
            rng = np.random.default_rng(self._edge_normal_seed + idx)
            ref = rng.normal(size=3)
            while np.linalg.norm(ref - (ref @ tau) * tau) < 1e-8:
                ref = rng.normal(size=3)
        else:
            axis = 0
            while abs(tau[axis]) > 0.9:
                axis += 1
            ref = np.zeros(3)
            ref[axis] = 1.0
        n1 = ref - (ref @ tau) * tau
        n1 = n1 / np.linalg.norm(n1)
        n2 = np.cross(tau, n1)
        return np.vstack([n1, n2])

    def with_rotated_edge_normals(self, seed):
        """Copy of the mesh whose 3D edge-normal pairs are re-randomized."""
        other = SimplicialMesh(self.vertices, [tuple(c) for c in self.cells])
        other._edge_normal_seed = int(seed)
        return other

    # -- geometry for elements ---------------------------------------------------
    def cell_simplex(self, ci):
        key = (self.dim, int(ci), "cell")
        if key not in self._sub_cache:
            self._sub_cache[key] = Simplex(self.vertices[list(self.cells[ci])])
        return self._sub_cache[key]

    def sub_simplex(self, d, idx):
        """Intrinsic simplex of a subsimplex, charted by its global frame."""
        key = (d, int(idx))
        if key in self._sub_cache:
            return self._sub_cache[key]
        verts = self.skeleton[d][idx]
        pts = self.vertices[list(verts)]
        if d == self.dim:
            s = Simplex(pts, chart_origin=pts[0],
                        chart_tangents=np.eye(self.dim))
        else:
            fr = self.frame(d, idx)
            s = Simplex.embedded(pts, fr.tangents)
        self._sub_cache[key] = s
        return s

    # -- boundary classification ---------------------------------------------------
    def classify_boundary(self, tol=COLLINEAR_TOL):
        """Corner/non-corner split of boundary vertices (and 3D edges)."""
        cls = BoundaryClassification()
        bverts = self.boundary_simplices(0)
        if not bverts:
            cls.has_boundary = False
            return cls
        if self.dim == 1:
            cls.corner_vertices = set(bverts)
            return cls
        # directions of adjacent boundary edges per boundary vertex
        for vi in bverts:
            dirs = []
            for ei, everts in enumerate(self.skeleton[1]):
                if self.boundary[1][ei] and vi in everts:
                    d = self.vertices[everts[1]] - self.vertices[everts[0]]
                    dirs.append(d / np.linalg.norm(d))
            dirs = np.array(dirs)
            if self.dim == 2:
                flat = all(abs(dirs[0][0] * d[1] - dirs[0][1] * d[0]) <= tol
                           for d in dirs[1:])
            else:
                sv = np.linalg.svd(dirs, compute_uv=False)
                flat = sv.size < 3 or sv[2] <= tol * sv[0]
            if flat:
                cls.noncorner_boundary_vertices.add(vi)
            else:
                cls.corner_vertices.add(vi)
        if self.dim == 3:
            face_normals = {}
            for fi in self.boundary_simplices(2):
                face_normals[fi] = self.frame(2, fi).normals[0]
            for ei in self.boundary_simplices(1):
                everts = self.skeleton[1][ei]
                normals = [face_normals[fi] for fi in self.boundary_simplices(2)
                           if set(everts) <= set(self.skeleton[2][fi])]
                flat = all(np.linalg.norm(np.cross(normals[0], nu)) <= tol
                           for nu in normals[1:])
                if flat:
                    cls.noncorner_boundary_edges.add(ei)
                else:
                    cls.corner_edges.add(ei)
        return cls

    # -- file format -----------------------------------------------------------
    def to_json(self):
        return json.dumps({
            "dim": self.dim,
            "vertices": [[float(x) for x in row] for row in self.vertices],
            "cells": [[int(i) for i in c] for c in self.cells],
        })

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        verts = np.array(data["vertices"], dtype=float)
        if verts.shape[1] != data["dim"]:
            raise ValueError("vertex coordinates do not match declared dimension")
        return cls(verts, data["cells"])

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())


def build_mesh(vertices, cells):
    """Construct a mesh; rejects degenerate and duplicate cells by name."""
    return SimplicialMesh(vertices, cells)


def euler_characteristic(mesh):
    return mesh.euler_characteristic()


def classify_boundary(mesh, tol=COLLINEAR_TOL):
    return mesh.classify_boundary(tol)


def simplex_frame(mesh, d, idx):
    return mesh.frame(d, idx)


# ---------------------------------------------------------------------------
# mesh generators used throughout the test and verification suites
# ---------------------------------------------------------------------------

def interval_mesh(ncells, length=1.0):
    verts = [[length * i / ncells] for i in range(ncells + 1)]
    cells = [(i, i + 1) for i in range(ncells)]
    return SimplicialMesh(verts, cells)


def reference_triangle():
    return SimplicialMesh([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], [(0, 1, 2)])


def reference_tet():
    return SimplicialMesh([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0],
                           [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
                          [(0, 1, 2, 3)])


def two_triangle_square():
    return SimplicialMesh([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
                          [(0, 1, 2), (0, 2, 3)])


def split_edge_square():
    """Unit square with the bottom edge split at its midpoint.

    The midpoint is a boundary vertex that is not a corner.
    """
    verts = [[0.0, 0.0], [0.5, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
    cells = [(0, 1, 4), (1, 3, 4), (1, 2, 3)]
    return SimplicialMesh(verts, cells)


def three_triangle_mesh():
    """Contractible three-cell 2D mesh."""
    verts = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.8, 0.5]]
    cells = [(0, 1, 2), (0, 2, 3), (1, 4, 2)]
    return SimplicialMesh(verts, cells)


def triangle_grid(n):
    """Unit square split into a structured n-by-n grid of triangle pairs."""
    verts = [[i / n, j / n] for j in range(n + 1) for i in range(n + 1)]
    cells = []
    for j in range(n):
        for i in range(n):
            a = j * (n + 1) + i
            b, c, d = a + 1, a + n + 1, a + n + 2
            cells.append((a, b, d))
            cells.append((a, d, c))
    return SimplicialMesh(verts, cells)


def annulus_mesh():
    """Square with a square hole, eight triangles; first Betti number 1."""
    outer = [[0.0, 0.0], [3.0, 0.0], [3.0, 3.0], [0.0, 3.0]]
    inner = [[1.0, 1.0], [2.0, 1.0], [2.0, 2.0], [1.0, 2.0]]
    verts = outer + inner
    cells = [(0, 1, 5), (0, 5, 4), (1, 2, 6), (1, 6, 5),
             (2, 3, 7), (2, 7, 6), (3, 0, 4), (3, 4, 7)]
    return SimplicialMesh(verts, cells)


def two_tet_mesh():
    verts = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0],
             [0.0, 0.0, 1.0], [1.0, 1.0, 1.0]]
    cells = [(0, 1, 2, 3), (1, 2, 3, 4)]
    return SimplicialMesh(verts, cells)


def three_tet_fan():
    """Three tetrahedra sharing the edge (0, 1); contractible."""
    verts = [[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.2],
             [0.7, 0.7, 0.4], [0.0, 1.0, 0.6]]
    cells = [(0, 1, 2, 3), (0, 1, 3, 4), (0, 1, 2, 4)]
    return SimplicialMesh(verts, cells)


def cube_center_fan_grid(nx, ny, nz):
    """Structured box mesh: each unit cube is fanned from its center.

    Vertices are the lattice corners, the cube centers, and the face centers;
    each cube face is split into four triangles around its face center and
    coned from the cube center, giving 24 tetrahedra per cube.  Face centers
    are shared between neighbouring cubes, so the mesh is conforming.
    """
    if min(nx, ny, nz) < 1:
        raise ValueError("grid sizes must be positive")
    verts = []
    index = {}

    def vid(p):
        key = (round(p[0] * 2) / 2, round(p[1] * 2) / 2, round(p[2] * 2) / 2)
        if key not in index:
            index[key] = len(verts)
            verts.append(list(key))
        return index[key]

    cells = []
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                c = vid((i + 0.5, j + 0.5, k + 0.5))
                corners = {}
                for di in (0, 1):
                    for dj in (0, 1):
                        for dk in (0, 1):
                            corners[(di, dj, dk)] = vid((i + di, j + dj, k + dk))
                faces = [
                    ((i, j + 0.5, k + 0.5), [(0, a, b) for a, b in ((0, 0), (1, 0), (1, 1), (0, 1))]),
                    ((i + 1, j + 0.5, k + 0.5), [(1, a, b) for a, b in ((0, 0), (1, 0), (1, 1), (0, 1))]),
                    ((i + 0.5, j, k + 0.5), [(a, 0, b) for a, b in ((0, 0), (1, 0), (1, 1), (0, 1))]),
                    ((i + 0.5, j + 1, k + 0.5), [(a, 1, b) for a, b in ((0, 0), (1, 0), (1, 1), (0, 1))]),
                    ((i + 0.5, j + 0.5, k), [(a, b, 0) for a, b in ((0, 0), (1, 0), (1, 1), (0, 1))]),
                    ((i + 0.5, j + 0.5, k + 1), [(a, b, 1) for a, b in ((0, 0), (1, 0), (1, 1), (0, 1))]),
                ]
                for fc_pt, loop in faces:
                    fc = vid(fc_pt)
                    for a in range(4):
                        v1 = corners[loop[a]]
                        v2 = corners[loop[(a + 1) % 4]]
                        cells.append((c, fc, v1, v2))
    return SimplicialMesh(verts, cells)
