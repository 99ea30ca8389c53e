"""Discrete immersions of closed oriented surfaces into the 3-sphere.

A ParamMesh holds the combinatorics of the parameter surface. A
DiscreteImmersion pairs it with unit vertex coordinates in R^4 and caches
per-face metric data. Both are immutable after construction and safe to
share read-only.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

from .errors import BadParam, DegenerateFace, ParseError, ValidationError
from .util import row_norms

RANK_TOL = 1e-6
UNIT_TOL = 1e-12
TANGENT_TOL = 1e-10


class ParamMesh:
    """Triangulation of a closed, connected, oriented surface.

    Faces are triples of vertex indices, counter-clockwise. Every directed
    edge must occur exactly once, which encodes both closedness and
    consistent orientation.
    """

    def __init__(self, vertex_count: int, faces):
        faces = np.ascontiguousarray(faces, dtype=np.int64)
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise ValidationError("faces must be an (F, 3) index array")
        if faces.size and (faces.min() < 0 or faces.max() >= vertex_count):
            raise ValidationError("face indices out of range")
        self.vertex_count = int(vertex_count)
        self.faces = faces
        self.faces.setflags(write=False)
        self._validate()

    def _validate(self):
        f = self.faces
        if len(f) == 0:
            raise ValidationError("mesh has no faces")
        if np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])):
            raise ValidationError("face with repeated vertex")
        # Each directed edge exactly once <=> closed and consistently oriented.
        directed = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        keys = directed[:, 0] * self.vertex_count + directed[:, 1]
        if len(np.unique(keys)) != len(keys):
            raise ValidationError("mesh is not consistently oriented (duplicate directed edge)")
        rev = directed[:, 1] * self.vertex_count + directed[:, 0]
        if not np.all(np.isin(keys, rev)):
            raise ValidationError("mesh is not closed (open edge found)")
        # Connectivity by BFS over the edge graph.
        seen = np.zeros(self.vertex_count, dtype=bool)
        adj_i = np.concatenate([directed[:, 0], directed[:, 1]])
        adj_j = np.concatenate([directed[:, 1], directed[:, 0]])
        order = np.argsort(adj_i, kind="stable")
        adj_i, adj_j = adj_i[order], adj_j[order]
        starts = np.searchsorted(adj_i, np.arange(self.vertex_count + 1))
        stack = [int(f[0, 0])]
        seen[f[0, 0]] = True
        while stack:
            v = stack.pop()
            for w in adj_j[starts[v]:starts[v + 1]]:
                if not seen[w]:
                    seen[w] = True
                    stack.append(int(w))
        if not seen.all():
            raise ValidationError("mesh is not connected")

    @cached_property
    def edges(self) -> np.ndarray:
        """Undirected edges as sorted index pairs, lexicographically ordered."""
        f = self.faces
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        e = np.sort(e, axis=1)
        e = np.unique(e, axis=0)
        e.setflags(write=False)
        return e

    @property
    def face_count(self) -> int:
        return len(self.faces)

    @property
    def euler_characteristic(self) -> int:
        return self.vertex_count - len(self.edges) + len(self.faces)

    @property
    def genus(self) -> int:
        return (2 - self.euler_characteristic) // 2

    def same_combinatorics(self, other: "ParamMesh") -> bool:
        return self.vertex_count == other.vertex_count and np.array_equal(self.faces, other.faces)


class DiscreteImmersion:
    """Vertex map into S^3 over a ParamMesh, with cached face metrics."""

    def __init__(self, mesh: ParamMesh, coords, _skip_validation: bool = False):
        coords = np.ascontiguousarray(coords, dtype=np.float64)
        if coords.shape != (mesh.vertex_count, 4):
            raise ValidationError(f"coords must have shape ({mesh.vertex_count}, 4)")
        self.mesh = mesh
        self.coords = coords
        self.coords.setflags(write=False)
        if not _skip_validation:
            if np.any(np.abs(row_norms(coords) - 1.0) > UNIT_TOL):
                raise ValidationError("vertex coordinates are not on the unit sphere")
        self._compute_face_data()

    def _compute_face_data(self):
        f = self.mesh.faces
        a = self.coords[f[:, 0]]
        self.edge1 = self.coords[f[:, 1]] - a
        self.edge2 = self.coords[f[:, 2]] - a
        self.g11 = np.sum(self.edge1 * self.edge1, axis=1)
        self.g12 = np.sum(self.edge1 * self.edge2, axis=1)
        self.g22 = np.sum(self.edge2 * self.edge2, axis=1)
        self.detg = self.g11 * self.g22 - self.g12 ** 2
        # Rank condition on the 4x2 face Jacobian via the metric eigenvalues.
        tr = self.g11 + self.g22
        disc = np.sqrt(np.maximum(tr ** 2 - 4.0 * self.detg, 0.0))
        lam_min = 0.5 * (tr - disc)
        lam_max = 0.5 * (tr + disc)
        bad = (lam_max <= 0.0) | (lam_min < (RANK_TOL ** 2) * lam_max) | (self.detg <= 0.0)
        if np.any(bad):
            idx = int(np.nonzero(bad)[0][0])
            raise DegenerateFace(f"face {idx} fails the rank tolerance {RANK_TOL}")
        self.dvol = 0.5 * np.sqrt(self.detg)
        for arr in (self.edge1, self.edge2, self.g11, self.g12, self.g22, self.detg, self.dvol):
            arr.setflags(write=False)

    @property
    def vertex_count(self) -> int:
        return self.mesh.vertex_count

    @property
    def face_count(self) -> int:
        return self.mesh.face_count

    @cached_property
    def area(self) -> float:
        from .util import tree_sum

        return tree_sum(self.dvol)

    @cached_property
    def median_edge_length(self) -> float:
        e = self.mesh.edges
        return float(np.median(row_norms(self.coords[e[:, 1]] - self.coords[e[:, 0]])))

    @cached_property
    def dual_areas(self) -> np.ndarray:
        """Barycentric dual area per vertex (one third of incident faces)."""
        out = np.zeros(self.vertex_count)
        share = self.dvol / 3.0
        for k in range(3):
            np.add.at(out, self.mesh.faces[:, k], share)
        out.setflags(write=False)
        return out

    def with_coords(self, coords) -> "DiscreteImmersion":
        return DiscreteImmersion(self.mesh, coords)

    def extrinsic_diameter(self) -> float:
        """Max pairwise vertex distance in R^4, exact over vertices."""
        c = self.coords
        # Exact O(V^2) scan in blocks; fine at desk scale.
        best = 0.0
        block = 512
        for i in range(0, len(c), block):
            d = np.linalg.norm(c[i:i + block, None, :] - c[None, :, :], axis=2)
            best = max(best, float(d.max()))
        return best


def validate_tangent(imm: DiscreteImmersion, w) -> np.ndarray:
    """Check per-vertex tangency of a field; returns it as a float array."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != imm.coords.shape:
        raise ValidationError("tangent field shape mismatch")
    if np.any(np.abs(np.sum(w * imm.coords, axis=1)) > TANGENT_TOL * np.maximum(row_norms(w), 1.0)):
        raise ValidationError("field is not tangent to the sphere at every vertex")
    return w


def tangent_field(imm: DiscreteImmersion, w) -> np.ndarray:
    """Project an arbitrary per-vertex field to the sphere tangent spaces."""
    w = np.asarray(w, dtype=np.float64)
    return w - np.sum(w * imm.coords, axis=1)[:, None] * imm.coords


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

def _icosahedron():
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    v = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    v /= np.linalg.norm(v, axis=1)[:, None]
    f = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    # Enforce outward orientation regardless of the table's chirality.
    a, b, c = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    n = np.cross(b - a, c - a)
    flip = np.sum(n * (a + b + c), axis=1) < 0
    f[flip] = f[flip][:, [0, 2, 1]]
    return v, f


def _subdivide_sphere(verts, faces):
    """One 4-to-1 midpoint split with reprojection to the unit 2-sphere."""
    edge_mid = {}
    verts = list(map(np.asarray, verts))

    def midpoint(i, j):
        key = (min(i, j), max(i, j))
        if key not in edge_mid:
            m = verts[i] + verts[j]
            m = m / np.linalg.norm(m)
            edge_mid[key] = len(verts)
            verts.append(m)
        return edge_mid[key]

    new_faces = []
    for i, j, k in faces:
        a = midpoint(i, j)
        b = midpoint(j, k)
        c = midpoint(k, i)
        new_faces.extend([(i, a, c), (j, b, a), (k, c, b), (a, b, c)])
    return np.array(verts), np.array(new_faces, dtype=np.int64)


def _icosphere(level: int):
    v, f = _icosahedron()
    for _ in range(level):
        v, f = _subdivide_sphere(v, f)
    return v, f


def generate(shape: str, *params) -> DiscreteImmersion:
    """Build a test-fixture immersion.

    Shapes:
      - ``equator``, params (level,): icosphere of {x4 = 0} on S^3.
      - ``clifford``, params (nu, nv): grid torus on the Clifford torus.
      - ``latitude_sphere``, params (t, level): round sphere {x4 = t} on S^3.
    """
    if shape == "equator":
        (level,) = params
        level = int(level)
        if level < 0:
            raise BadParam("subdivision level must be >= 0")
        v3, f = _icosphere(level)
        coords = np.zeros((len(v3), 4))
        coords[:, :3] = v3
        return DiscreteImmersion(ParamMesh(len(coords), f), coords)

    if shape == "clifford":
        nu, nv = (int(p) for p in params)
        if nu < 8 or nv < 8:
            raise BadParam("clifford grid must be at least 8 x 8")
        iu, iv = np.meshgrid(np.arange(nu), np.arange(nv), indexing="ij")
        u = 2.0 * np.pi * iu.ravel() / nu
        v = 2.0 * np.pi * iv.ravel() / nv
        coords = np.stack([np.cos(u), np.sin(u), np.cos(v), np.sin(v)], axis=1) / np.sqrt(2.0)

        def vid(i, j):
            return (i % nu) * nv + (j % nv)

        faces = []
        for i in range(nu):
            for j in range(nv):
                a = vid(i, j)
                b = vid(i + 1, j)
                c = vid(i + 1, j + 1)
                d = vid(i, j + 1)
                faces.append((a, b, c))
                faces.append((a, c, d))
        return DiscreteImmersion(ParamMesh(nu * nv, np.array(faces, dtype=np.int64)), coords)

    if shape == "latitude_sphere":
        t, level = params
        t = float(t)
        level = int(level)
        if not (-1.0 < t < 1.0):
            raise BadParam("latitude parameter must lie in (-1, 1)")
        if level < 0:
            raise BadParam("subdivision level must be >= 0")
        v3, f = _icosphere(level)
        rho = np.sqrt(1.0 - t * t)
        coords = np.empty((len(v3), 4))
        coords[:, :3] = rho * v3
        coords[:, 3] = t
        return DiscreteImmersion(ParamMesh(len(coords), f), coords)

    raise BadParam(f"unknown shape {shape!r}")


def refine(imm: DiscreteImmersion) -> DiscreteImmersion:
    """4-to-1 midpoint refinement with reprojection to S^3.

    Deterministic: identical input bits give identical output bits.
    """
    mesh = imm.mesh
    coords = list(imm.coords)
    edge_mid = {}

    def midpoint(i, j):
        key = (min(i, j), max(i, j))
        if key not in edge_mid:
            m = coords[i] + coords[j]
            n = np.linalg.norm(m)
            m = m / n
            edge_mid[key] = len(coords)
            coords.append(m)
        return edge_mid[key]

    new_faces = []
    for i, j, k in mesh.faces:
        a = midpoint(i, j)
        b = midpoint(j, k)
        c = midpoint(k, i)
        new_faces.extend([(i, a, c), (j, b, a), (k, c, b), (a, b, c)])
    new_mesh = ParamMesh(len(coords), np.array(new_faces, dtype=np.int64))
    return DiscreteImmersion(new_mesh, np.array(coords))


# ---------------------------------------------------------------------------
# IMM4 text format
# ---------------------------------------------------------------------------

def save(imm: DiscreteImmersion, path, header_comments=()) -> None:
    """Write the IMM4 text format, floats at 17 significant digits."""
    lines = [f"# {c}" for c in header_comments]
    lines.append(f"IMM4 4 {imm.vertex_count} {imm.face_count}")
    for row in imm.coords:
        lines.append(" ".join(f"{x:.17g}" for x in row))
    for i, j, k in imm.mesh.faces:
        lines.append(f"{i} {j} {k}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load(path) -> DiscreteImmersion:
    """Read the IMM4 text format; raises ParseError with the failing line."""
    with open(path) as fh:
        raw = fh.readlines()
    content = [(ln + 1, line.strip()) for ln, line in enumerate(raw)
               if line.strip() and not line.lstrip().startswith("#")]
    if not content:
        raise ParseError("empty file", line=1)
    pos = 0

    def take():
        nonlocal pos
        if pos >= len(content):
            last = content[-1][0] if content else 0
            raise ParseError("unexpected end of file", line=last + 1)
        item = content[pos]
        pos += 1
        return item

    ln, header = take()
    parts = header.split()
    if len(parts) != 4 or parts[0] != "IMM4":
        raise ParseError("expected header 'IMM4 <m> <nv> <nf>'", line=ln)
    try:
        m, nv, nf = int(parts[1]), int(parts[2]), int(parts[3])
    except ValueError:
        raise ParseError("header counts must be integers", line=ln) from None
    if m != 4:
        raise ParseError(f"only ambient dimension 4 is supported, got {m}", line=ln)

    coords = np.empty((nv, 4))
    for row in range(nv):
        ln, line = take()
        toks = line.split()
        if len(toks) != m:
            raise ParseError(f"expected {m} floats for vertex {row}", line=ln)
        try:
            coords[row] = [float(t) for t in toks]
        except ValueError:
            raise ParseError(f"bad float in vertex {row}", line=ln) from None

    faces = np.empty((nf, 3), dtype=np.int64)
    for row in range(nf):
        ln, line = take()
        toks = line.split()
        if len(toks) != 3:
            raise ParseError(f"expected 3 vertex indices for face {row}", line=ln)
        try:
            faces[row] = [int(t) for t in toks]
        except ValueError:
            raise ParseError(f"bad index in face {row}", line=ln) from None

    if pos != len(content):
        raise ParseError("trailing content after face table", line=content[pos][0])
    return DiscreteImmersion(ParamMesh(nv, faces), coords)
