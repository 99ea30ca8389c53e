"""Pointwise geometry and energy integrals of a discrete immersion.

The bending density |II|^2 is recovered from the interpolated Gauss map:
for a surface inside S^3 the differential of the unit normal lies in the
surface tangent plane, so |dn|^2_g equals the squared second fundamental
form. Energies are accumulated with an order-canonicalized pairwise sum,
which makes every total bit-identical under any relabeling of vertices or
faces and under any thread count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadParam, DegenerateFace, OrientationError, UnsupportedAmbient
from .mesh import DiscreteImmersion
from .util import cross4, row_norms, tree_sum

# Reference metric of the parameter triangle: equilateral with unit side.
# g_ref = [[1, 1/2], [1/2, 1]], inverse trace gives the conformal energy.
_REF_DVOL = np.sqrt(3.0) / 4.0


@dataclass(frozen=True)
class EnergyBreakdown:
    """All energies of one immersion at parameters (p, sigma)."""

    area: float
    f_p: float
    relaxed: float
    dirichlet: float
    conf_defect: float
    max_ii_sq: float


@dataclass(frozen=True)
class GaussField:
    """Per-face unit normals and renormalized area-weighted vertex normals."""

    face_normals: np.ndarray   # (F, 4)
    vertex_normals: np.ndarray  # (V, 4)


def face_metric(imm: DiscreteImmersion, face: int):
    """First fundamental form and area element of one face."""
    g = np.array([[imm.g11[face], imm.g12[face]], [imm.g12[face], imm.g22[face]]])
    return g, float(imm.dvol[face])


def face_metrics_raw(coords, faces):
    """Metric entries and area elements from raw arrays (no validation).

    Exposed for tests that exercise the kernel on triangles that are not
    legal immersions (flat reference configurations, flipped faces).
    """
    a = coords[faces[:, 0]]
    e1 = coords[faces[:, 1]] - a
    e2 = coords[faces[:, 2]] - a
    g11 = np.sum(e1 * e1, axis=1)
    g12 = np.sum(e1 * e2, axis=1)
    g22 = np.sum(e2 * e2, axis=1)
    det = g11 * g22 - g12 ** 2
    return g11, g12, g22, 0.5 * np.sqrt(np.maximum(det, 0.0))


def face_normals_raw(coords, faces):
    """Unit face normals: Hodge dual of centroid ^ e1 ^ e2, no validation."""
    a = coords[faces[:, 0]]
    b = coords[faces[:, 1]]
    c = coords[faces[:, 2]]
    n = cross4((a + b + c) / 3.0, b - a, c - a)
    nn = row_norms(n)
    if np.any(nn <= 0.0):
        raise DegenerateFace("zero face normal")
    return n / nn[:, None]


def gauss_map(imm: DiscreteImmersion, check_orientation: bool = True) -> GaussField:
    """Face Gauss map and area-weighted vertex normals.

    Raises OrientationError when a face normal disagrees in sign with the
    averaged normals at all three of its corners, the signature of a
    flipped face; diagnostics on deliberately folded surfaces pass
    ``check_orientation=False``.
    """
    if imm.coords.shape[1] != 4:
        raise UnsupportedAmbient("the Gauss map needs ambient dimension 4")
    faces = imm.mesh.faces
    fn = face_normals_raw(imm.coords, faces)
    vsum = np.zeros((imm.vertex_count, 4))
    w = imm.dvol[:, None] * fn
    for k in range(3):
        np.add.at(vsum, faces[:, k], w)
    norms = row_norms(vsum)
    if np.any(norms <= 1e-12):
        raise DegenerateFace("vertex normal cancels out; surface folds back on itself")
    vn = vsum / norms[:, None]
    if check_orientation:
        # A flipped face points against the vertex average at every corner;
        # perturbation noise never does that at all three corners at once.
        dots = np.sum(fn[:, None, :] * vn[faces], axis=2)
        if np.any(np.all(dots < -0.6, axis=1)):
            raise OrientationError("sign-inconsistent normal field at a vertex")
    fn.setflags(write=False)
    vn.setflags(write=False)
    return GaussField(face_normals=fn, vertex_normals=vn)


def ii_squared(imm: DiscreteImmersion, gauss: GaussField) -> np.ndarray:
    """Per-face |II|^2 as trace(g^-1 (grad n)^T (grad n)).

    grad n is the per-face linear interpolant of the vertex normals, so an
    immersion with a constant Gauss field gets exactly zero.
    """
    faces = imm.mesh.faces
    vn = gauss.vertex_normals
    d1 = vn[faces[:, 1]] - vn[faces[:, 0]]
    d2 = vn[faces[:, 2]] - vn[faces[:, 0]]
    n11 = np.sum(d1 * d1, axis=1)
    n12 = np.sum(d1 * d2, axis=1)
    n22 = np.sum(d2 * d2, axis=1)
    return (imm.g22 * n11 - 2.0 * imm.g12 * n12 + imm.g11 * n22) / imm.detg


def cotan_stiffness_entries(imm: DiscreteImmersion):
    """COO entries of the cotangent stiffness matrix (positive semidefinite)."""
    faces = imm.mesh.faces
    c = imm.coords
    rows, cols, vals = [], [], []
    for k in range(3):
        i = faces[:, k]
        j = faces[:, (k + 1) % 3]
        o = faces[:, (k + 2) % 3]
        u = c[i] - c[o]
        v = c[j] - c[o]
        cross_sq = np.sum(u * u, axis=1) * np.sum(v * v, axis=1) - np.sum(u * v, axis=1) ** 2
        cot = np.sum(u * v, axis=1) / np.sqrt(np.maximum(cross_sq, 1e-300))
        w = 0.5 * cot
        rows.extend([i, j, i, j])
        cols.extend([j, i, i, j])
        vals.extend([-w, -w, w, w])
    return (np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))


def laplace_beltrami(imm: DiscreteImmersion, field: np.ndarray) -> np.ndarray:
    """Positive-spectrum Laplace-Beltrami of a per-vertex field.

    Area-normalized cotangent formula; on the unit 2-sphere applied to the
    coordinates this returns approximately +2 coords.
    """
    from scipy.sparse import coo_matrix

    rows, cols, vals = cotan_stiffness_entries(imm)
    n = imm.vertex_count
    s = coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    return (s @ field) / imm.dual_areas[:, None]


def mean_curvature(imm: DiscreteImmersion) -> np.ndarray:
    """Per-vertex mean curvature vector of the immersed surface inside S^3.

    2H = Lap(Phi) - |dPhi|^2 Phi with the positive-spectrum Laplacian and
    the sphere term |dPhi|^2 = 2 of the induced metric.
    """
    lap = laplace_beltrami(imm, imm.coords)
    return 0.5 * (lap - 2.0 * imm.coords)


def _dirichlet_per_face(imm: DiscreteImmersion) -> np.ndarray:
    # (1/2) tr(g_ref^{-1} g) dvol_ref with the equilateral reference triangle.
    return (np.sqrt(3.0) / 6.0) * (imm.g11 + imm.g22 - imm.g12)


def dirichlet_per_face(imm: DiscreteImmersion) -> np.ndarray:
    """Conformally invariant Dirichlet density per face (reference metric)."""
    return _dirichlet_per_face(imm)


def energies(imm: DiscreteImmersion, p: float, sigma: float) -> EnergyBreakdown:
    """Area, bending energy F_p, relaxed energy, Dirichlet, conformality defect.

    Folded configurations carry a well-defined (large) bending energy, so
    the Gauss map is taken without the orientation gate; descent rejects
    such states through the energy value itself.
    """
    if p <= 1.0:
        raise BadParam("the exponent p must exceed 1")
    if sigma < 0.0:
        raise BadParam("sigma must be nonnegative")
    ii = ii_squared(imm, gauss_map(imm, check_orientation=False))
    area = tree_sum(imm.dvol)
    f_p = tree_sum((1.0 + ii) ** p * imm.dvol)
    dir_faces = _dirichlet_per_face(imm)
    dirichlet = tree_sum(dir_faces)
    conf_defect = tree_sum(dir_faces - imm.dvol)
    return EnergyBreakdown(
        area=area,
        f_p=f_p,
        relaxed=area + sigma ** 2 * f_p,
        dirichlet=dirichlet,
        conf_defect=conf_defect,
        max_ii_sq=float(ii.max()),
    )
