"""Closed oriented triangulated surfaces and the mesh builders used in tests.

A surface carries its combinatorics explicitly (edges and the edge id of
every triangle side) so that structured tori with repeated vertex pairs
(e.g. the 2x2 grid torus, where n1 = 12 > C(4,2)) are representable.  The
metric is intrinsic: per-edge lengths, defaulting to Euclidean distances of
the vertex positions.  Flat-torus meshes override the lengths with the
minimum-image convention, since a flat torus has no isometric embedding in
R^3.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTriangle, NonManifoldEdge
from .lattice import TWO_PI, FlatTorus


@dataclass(frozen=True)
class TriangulatedSurface:
    """Closed oriented surface: positions, triangles, edges, intrinsic metric.

    ``triangle_edges[t, k]`` is the edge id of side k of triangle t, where the
    sides of triangle (a, b, c) are (a,b), (b,c), (c,a) in order.
    """

    vertex_positions: np.ndarray   # (n0, 3)
    triangles: np.ndarray          # (n2, 3) int
    edges: np.ndarray              # (n1, 2) int
    triangle_edges: np.ndarray     # (n2, 3) int
    edge_lengths: np.ndarray       # (n1,)

    @property
    def n_vertices(self) -> int:
        return self.vertex_positions.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_triangles

    @property
    def genus(self) -> int:
        chi = self.euler_characteristic
        if chi % 2 != 0 or chi > 2:
            raise NonManifoldEdge(f"Euler characteristic {chi} is not that of a closed surface")
        return (2 - chi) // 2

    def side_lengths(self) -> np.ndarray:
        """Per-triangle side lengths, aligned with ``triangle_edges``; shape (n2, 3)."""
        return self.edge_lengths[self.triangle_edges]

    def validate(self, tol: float = 1e-12):
        """Check closedness, orientability and metric nondegeneracy."""
        counts = np.zeros(self.n_edges, dtype=int)
        senses: dict[tuple[int, int], int] = {}
        tris = self.triangles
        for t in range(self.n_triangles):
            a, b, c = tris[t]
            for k, (u, v) in enumerate(((a, b), (b, c), (c, a))):
                e = int(self.triangle_edges[t, k])
                counts[e] += 1
                eu, ev = self.edges[e]
                if (int(u), int(v)) == (int(eu), int(ev)):
                    sense = 1
                elif (int(u), int(v)) == (int(ev), int(eu)):
                    sense = -1
                else:
                    raise NonManifoldEdge(
                        f"triangle {t} side {k} does not match endpoints of edge {e}")
                senses[(e, counts[e])] = sense
        if not np.all(counts == 2):
            bad = int(np.flatnonzero(counts != 2)[0])
            raise NonManifoldEdge(
                f"edge {bad} belongs to {counts[bad]} triangles (expected 2)")
        for e in range(self.n_edges):
            if senses[(e, 1)] * senses[(e, 2)] != -1:
                raise NonManifoldEdge(
                    f"edge {e} is traversed twice in the same direction (orientation clash)")
        s = self.side_lengths()
        a, b, c = s[:, 0], s[:, 1], s[:, 2]
        # Heron in stable form
        sp = 0.5 * (a + b + c)
        area_sq = sp * (sp - a) * (sp - b) * (sp - c)
        if np.any(area_sq <= tol * np.maximum(1.0, sp**4)):
            raise DegenerateTriangle(
                f"triangle {int(np.argmin(area_sq))} has (near) zero area")


def surface_from_triangles(positions, triangles, edge_lengths=None) -> TriangulatedSurface:
    """Build a surface from bare triangles, deriving edges by manifold matching.

    Requires every directed side (u, v) to occur exactly once, with its reverse
    (v, u) occurring exactly once in another triangle; meshes with doubled
    vertex pairs must supply explicit combinatorics instead.
    """
    positions = np.asarray(positions, dtype=float).reshape(-1, 3)
    triangles = np.asarray(triangles, dtype=int).reshape(-1, 3)
    directed: dict[tuple[int, int], tuple[int, int]] = {}
    for t, (a, b, c) in enumerate(triangles):
        for k, (u, v) in enumerate(((a, b), (b, c), (c, a))):
            key = (int(u), int(v))
            if key in directed:
                raise NonManifoldEdge(f"directed side {key} occurs twice")
            directed[key] = (t, k)
    edge_index: dict[tuple[int, int], int] = {}
    edges = []
    tri_edges = np.full((triangles.shape[0], 3), -1, dtype=int)
    for (u, v), (t, k) in directed.items():
        if (v, u) not in directed:
            raise NonManifoldEdge(f"side ({u}, {v}) has no oppositely oriented partner")
        key = (min(u, v), max(u, v))
        if key not in edge_index:
            edge_index[key] = len(edges)
            edges.append(key)
        tri_edges[t, k] = edge_index[key]
    edges = np.asarray(edges, dtype=int)
    if edge_lengths is None:
        d = positions[edges[:, 0]] - positions[edges[:, 1]]
        edge_lengths = np.sqrt(np.einsum("ij,ij->i", d, d))
    surf = TriangulatedSurface(positions, triangles, edges,
                               tri_edges, np.asarray(edge_lengths, dtype=float))
    surf.validate()
    return surf


# ---------------------------------------------------------------------------
# structured flat-torus mesh (offset rows; all triangles acute for square tori)

def triangulated_torus_mesh(torus: FlatTorus, n: int, m: int | None = None) -> TriangulatedSurface:
    """Offset-row triangulation of a flat torus with n columns and m rows.

    Odd rows are shifted by half a column, which makes every triangle acute on
    square tori (circumcentric Hodge stars stay positive).  Edge lengths come
    from the minimum-image convention in lattice coordinates; vertex positions
    are the unrolled fundamental domain at z=0 and are for reference only.
    """
    if m is None:
        m = n
    if n < 2 or m < 2 or m % 2 != 0:
        raise ValueError("need n >= 2 and even m >= 2 for a closed offset-row torus mesh")

    def vid(i, j):
        return (j % m) * n + (i % n)

    frac = np.empty((n * m, 2))
    for j in range(m):
        for i in range(n):
            frac[vid(i, j)] = ((i + 0.5 * (j % 2)) / n, j / m)
    positions = np.zeros((n * m, 3))
    positions[:, :2] = frac @ torus.basis.T

    # edge ids: H (in-row), F (forward diagonal), B (backward diagonal)
    nm = n * m
    H = lambda i, j: (j % m) * n + (i % n)
    F = lambda i, j: nm + (j % m) * n + (i % n)
    B = lambda i, j: 2 * nm + (j % m) * n + (i % n)

    edges = np.empty((3 * nm, 2), dtype=int)
    dfrac = np.empty((3 * nm, 2))
    for j in range(m):
        for i in range(n):
            edges[H(i, j)] = (vid(i, j), vid(i + 1, j))
            dfrac[H(i, j)] = (1.0 / n, 0.0)
            if j % 2 == 0:
                # row j at offset 0, row j+1 at offset 1/2
                edges[F(i, j)] = (vid(i, j), vid(i, j + 1))
                dfrac[F(i, j)] = (0.5 / n, 1.0 / m)
                edges[B(i, j)] = (vid(i + 1, j), vid(i, j + 1))
                dfrac[B(i, j)] = (-0.5 / n, 1.0 / m)
            else:
                edges[F(i, j)] = (vid(i, j), vid(i, j + 1))
                dfrac[F(i, j)] = (-0.5 / n, 1.0 / m)
                edges[B(i, j)] = (vid(i, j), vid(i + 1, j + 1))
                dfrac[B(i, j)] = (0.5 / n, 1.0 / m)

    vecs = dfrac @ torus.basis.T
    edge_lengths = np.sqrt(np.einsum("ij,ij->i", vecs, vecs))

    triangles = np.empty((2 * nm, 3), dtype=int)
    tri_edges = np.empty((2 * nm, 3), dtype=int)
    t = 0
    for j in range(m):
        for i in range(n):
            if j % 2 == 0:
                # down: (v(i,j), v(i+1,j), v(i,j+1)); up: (v(i+1,j), v(i+1,j+1), v(i,j+1))
                triangles[t] = (vid(i, j), vid(i + 1, j), vid(i, j + 1))
                tri_edges[t] = (H(i, j), B(i, j), F(i, j))
                t += 1
                triangles[t] = (vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1))
                tri_edges[t] = (F(i + 1, j), H(i, j + 1), B(i, j))
                t += 1
            else:
                # down: (v(i,j), v(i+1,j), v(i+1,j+1)); up: (v(i,j), v(i+1,j+1), v(i,j+1))
                triangles[t] = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1))
                tri_edges[t] = (H(i, j), F(i + 1, j), B(i, j))
                t += 1
                triangles[t] = (vid(i, j), vid(i + 1, j + 1), vid(i, j + 1))
                tri_edges[t] = (B(i, j), H(i, j + 1), F(i, j))
                t += 1

    surf = TriangulatedSurface(positions, triangles, edges, tri_edges, edge_lengths)
    surf.validate()
    return surf


# ---------------------------------------------------------------------------
# embedded donut (for the OFF path; geometry is the induced round metric)

def parametric_torus_mesh(n: int = 24, m: int = 16, big_radius: float = 2.0,
                          small_radius: float = 0.7) -> TriangulatedSurface:
    """Genus-1 surface embedded in R^3 as a standard donut, split into triangles."""
    if n < 3 or m < 3:
        raise ValueError("need n, m >= 3 so vertex pairs identify edges uniquely")
    positions = np.empty((n * m, 3))
    for j in range(m):
        phi = TWO_PI * j / m
        for i in range(n):
            theta = TWO_PI * i / n
            rho = big_radius + small_radius * np.cos(phi)
            positions[j * n + i] = (rho * np.cos(theta), rho * np.sin(theta),
                                    small_radius * np.sin(phi))
    tris = []
    for j in range(m):
        for i in range(n):
            v00 = (j % m) * n + i % n
            v10 = (j % m) * n + (i + 1) % n
            v01 = ((j + 1) % m) * n + i % n
            v11 = ((j + 1) % m) * n + (i + 1) % n
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    return surface_from_triangles(positions, np.asarray(tris, dtype=int))


# ---------------------------------------------------------------------------
# genus-2 voxel surface (boundary of a 5x3x1 slab with two through-holes)

_GENUS2_SOLID = {(x, y) for x in range(5) for y in range(3)} - {(1, 1), (3, 1)}


def _genus2_quads() -> tuple[np.ndarray, np.ndarray]:
    """Outward-oriented boundary quads of the two-hole voxel slab; genus 2."""
    vindex: dict[tuple[int, int, int], int] = {}
    verts: list[tuple[int, int, int]] = []

    def vid(p):
        p = tuple(int(q) for q in p)
        if p not in vindex:
            vindex[p] = len(verts)
            verts.append(p)
        return vindex[p]

    quads = []
    for (x, y) in _GENUS2_SOLID:
        if (x, y - 1) not in _GENUS2_SOLID:   # -y
            quads.append(((x, y, 0), (x + 1, y, 0), (x + 1, y, 1), (x, y, 1)))
        if (x, y + 1) not in _GENUS2_SOLID:   # +y
            quads.append(((x, y + 1, 0), (x, y + 1, 1), (x + 1, y + 1, 1), (x + 1, y + 1, 0)))
        if (x - 1, y) not in _GENUS2_SOLID:   # -x
            quads.append(((x, y, 0), (x, y, 1), (x, y + 1, 1), (x, y + 1, 0)))
        if (x + 1, y) not in _GENUS2_SOLID:   # +x
            quads.append(((x + 1, y, 0), (x + 1, y + 1, 0), (x + 1, y + 1, 1), (x + 1, y, 1)))
        # slab is one cell thick: top and bottom always exposed
        quads.append(((x, y, 1), (x + 1, y, 1), (x + 1, y + 1, 1), (x, y + 1, 1)))
        quads.append(((x, y, 0), (x, y + 1, 0), (x + 1, y + 1, 0), (x + 1, y, 0)))

    quad_ids = np.asarray([[vid(p) for p in q] for q in quads], dtype=int)
    return np.asarray(verts, dtype=float), quad_ids


def genus2_mesh() -> TriangulatedSurface:
    """Triangulated closed genus-2 surface (each boundary quad split in two)."""
    positions, quads = _genus2_quads()
    tris = []
    for (a, b, c, d) in quads:
        tris.append((a, b, c))
        tris.append((a, c, d))
    surf = surface_from_triangles(positions, np.asarray(tris, dtype=int))
    if surf.genus != 2:
        raise NonManifoldEdge(f"voxel surface has genus {surf.genus}, expected 2")
    return surf


# ---------------------------------------------------------------------------
# OFF io

def read_off(path) -> TriangulatedSurface:
    """Read an ASCII OFF file (triangles only) into a surface."""
    with open(path, "r", encoding="ascii") as fh:
        tokens = []
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                tokens.extend(line.split())
    if not tokens or tokens[0] != "OFF":
        raise ValueError("not an OFF file (missing OFF header)")
    pos = 1
    nv, nf = int(tokens[pos]), int(tokens[pos + 1])
    pos += 3  # skip edge count
    verts = np.asarray(tokens[pos:pos + 3 * nv], dtype=float).reshape(nv, 3)
    pos += 3 * nv
    tris = np.empty((nf, 3), dtype=int)
    for f in range(nf):
        cnt = int(tokens[pos])
        if cnt != 3:
            raise ValueError(f"face {f} has {cnt} vertices; only triangles are supported")
        tris[f] = [int(t) for t in tokens[pos + 1:pos + 4]]
        pos += 4
    return surface_from_triangles(verts, tris)


def write_off(path, surface: TriangulatedSurface):
    with open(path, "w", encoding="ascii") as fh:
        fh.write("OFF\n")
        fh.write(f"{surface.n_vertices} {surface.n_triangles} {surface.n_edges}\n")
        for p in surface.vertex_positions:
            fh.write(f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
        for t in surface.triangles:
            fh.write(f"3 {t[0]} {t[1]} {t[2]}\n")
