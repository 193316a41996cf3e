"""Simplicial meshes carrying sampled continuous fields."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation


@dataclass(frozen=True, eq=False)
class SimplicialMesh:
    vertices: np.ndarray  # (V, 2)
    edges: np.ndarray  # (E, 2) int, i < j
    edge_lengths: np.ndarray  # (E,)
    triangles: np.ndarray  # (T, 3) int, possibly empty
    boundary_cycle: tuple = ()
    name: str = field(default="mesh", compare=False)

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def dimension(self) -> int:
        return 2 if len(self.triangles) else 1

    @property
    def cells(self) -> np.ndarray:
        """Top-dimensional simplices: triangles, or edges for a 1-D mesh."""
        return self.triangles if len(self.triangles) else self.edges

    @property
    def max_edge_length(self) -> float:
        return float(self.edge_lengths.max(initial=0.0))

    @property
    def interpolation_constant(self) -> float:
        """Constant ``c`` with ``|B(u,w)(p) - interp| <= c max_e |du_e||dw_e|``.

        For a simplex with ``d`` vertices the bilinear interpolation defect
        is at most ``(1 - 1/d) / 2`` times the largest product of edge jumps.
        """
        d = self.cells.shape[1]
        return 0.5 * (1.0 - 1.0 / d)

    def boundary_edges(self) -> set:
        if not len(self.triangles):
            return set()
        count: dict = {}
        for tri in self.triangles:
            for i, j in ((0, 1), (1, 2), (0, 2)):
                e = tuple(sorted((int(tri[i]), int(tri[j]))))
                count[e] = count.get(e, 0) + 1
        return {e for e, c in count.items() if c == 1}

    def validate(self) -> None:
        v = self.n_vertices
        if v < 2:
            raise ContractViolation("mesh needs at least two vertices", "mesh size")
        edge_set = {tuple(e) for e in self.edges.tolist()}
        for tri in self.triangles.tolist():
            for i, j in ((0, 1), (1, 2), (0, 2)):
                if tuple(sorted((tri[i], tri[j]))) not in edge_set:
                    raise ContractViolation(
                        f"triangle edge {(tri[i], tri[j])} missing from edge list",
                        "every triangle edge appears in edges",
                    )
        if not _connected(v, self.edges):
            raise ContractViolation("mesh is not connected", "connected mesh")
        if self.dimension == 2:
            cyc = list(self.boundary_cycle)
            if len(cyc) < 3 or len(set(cyc)) != len(cyc):
                raise ContractViolation("boundary cycle is not simple", "simple boundary cycle")
            bnd = self.boundary_edges()
            for a, b in zip(cyc, cyc[1:] + cyc[:1]):
                if tuple(sorted((a, b))) not in bnd:
                    raise ContractViolation(
                        f"boundary cycle step {(a, b)} is not a boundary edge",
                        "boundary cycle of boundary edges",
                    )

    # serialisation -------------------------------------------------------
    def to_doc(self) -> dict:
        return {
            "vertices": self.vertices.tolist(),
            "triangles": self.triangles.tolist(),
            "edges": self.edges.tolist(),
            "boundary_cycle": list(self.boundary_cycle),
            "name": self.name,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "SimplicialMesh":
        verts = np.asarray(doc["vertices"], dtype=float).reshape(-1, 2)
        tris = np.asarray(doc.get("triangles", []), dtype=np.int64).reshape(-1, 3)
        if "edges" in doc and doc["edges"]:
            edges = np.asarray(doc["edges"], dtype=np.int64).reshape(-1, 2)
        else:
            edges = _edges_from_triangles(tris)
        return build_mesh(verts, edges, tris, tuple(doc.get("boundary_cycle", [])), doc.get("name", "mesh"))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_doc(), fh)

    @classmethod
    def load(cls, path) -> "SimplicialMesh":
        with open(path) as fh:
            return cls.from_doc(json.load(fh))


def _connected(nv: int, edges: np.ndarray) -> bool:
    parent = list(range(nv))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in edges.tolist():
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    return len({find(i) for i in range(nv)}) == 1


def _edges_from_triangles(tris: np.ndarray) -> np.ndarray:
    es = set()
    for tri in tris.tolist():
        for i, j in ((0, 1), (1, 2), (0, 2)):
            es.add(tuple(sorted((tri[i], tri[j]))))
    return np.asarray(sorted(es), dtype=np.int64).reshape(-1, 2)


def build_mesh(vertices, edges, triangles, boundary_cycle=(), name="mesh") -> SimplicialMesh:
    vertices = np.asarray(vertices, dtype=float)
    edges = np.sort(np.asarray(edges, dtype=np.int64).reshape(-1, 2), axis=1)
    edges = np.unique(edges, axis=0)
    lengths = np.linalg.norm(vertices[edges[:, 1]] - vertices[edges[:, 0]], axis=1)
    mesh = SimplicialMesh(
        vertices,
        edges,
        lengths,
        np.asarray(triangles, dtype=np.int64).reshape(-1, 3),
        tuple(int(i) for i in boundary_cycle),
        name,
    )
    mesh.validate()
    return mesh


def interval_mesh(resolution: int) -> SimplicialMesh:
    """Uniform partition of [0, 1] into ``resolution`` segments."""
    if resolution < 1:
        raise ContractViolation("resolution must be positive", "resolution >= 1")
    xs = np.linspace(0.0, 1.0, resolution + 1)
    verts = np.stack([xs, np.zeros_like(xs)], axis=1)
    edges = np.stack([np.arange(resolution), np.arange(1, resolution + 1)], axis=1)
    return build_mesh(verts, edges, np.zeros((0, 3), dtype=np.int64), (), f"interval-{resolution}")


def disk_mesh(resolution: int) -> SimplicialMesh:
    """Triangulated closed unit disk with ``resolution`` concentric rings.

    Ring ``j`` holds ``6 j`` vertices at radius ``j / resolution``; the
    outermost ring is the boundary cycle, listed counter-clockwise.
    """
    if resolution < 1:
        raise ContractViolation("resolution must be positive", "resolution >= 1")
    verts = [(0.0, 0.0)]
    rings = [[0]]
    for j in range(1, resolution + 1):
        r = j / resolution
        m = 6 * j
        ring = []
        for i in range(m):
            ang = 2.0 * math.pi * i / m
            ring.append(len(verts))
            verts.append((r * math.cos(ang), r * math.sin(ang)))
        rings.append(ring)
    tris = []
    for j in range(1, resolution + 1):
        inner, outer = rings[j - 1], rings[j]
        na, nb = len(inner), len(outer)
        if na == 1:
            for i in range(nb):
                tris.append((inner[0], outer[i], outer[(i + 1) % nb]))
            continue
        ia = ib = 0
        while ia < na or ib < nb:
            # advance along whichever ring has the next vertex at the smaller angle
            if ib >= nb or (ia < na and (ia + 1) * nb < (ib + 1) * na):
                tris.append((inner[ia % na], inner[(ia + 1) % na], outer[ib % nb]))
                ia += 1
            else:
                tris.append((inner[ia % na], outer[ib % nb], outer[(ib + 1) % nb]))
                ib += 1
    tris = np.asarray(tris, dtype=np.int64)
    return build_mesh(
        np.asarray(verts), _edges_from_triangles(tris), tris, tuple(rings[-1]), f"disk-{resolution}"
    )
