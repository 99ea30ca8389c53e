"""Measure-theoretic diagnostics of an immersion seen as a varifold.

Push-forward area measures against extrinsic balls of R^4, density
profiles with a fitted monotonicity constant, stationarity and target-
harmonic residuals, collapse and quantization checks, dyadic neck scans,
oscillation and vanishing indicators, and integer density estimation.

Ball masses are exact for the piecewise-flat surface: each face is clipped
against the ball in its own plane (the ball cuts the plane in a disk) with
circular segments included. The area the straight-chord polygon alone
would miss is returned alongside as a conservative error bound.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import BadParam, MeshMismatch, SupportViolation
from .geometry import dirichlet_per_face, energies, gauss_map, ii_squared
from .mesh import DiscreteImmersion
from .util import row_norms, tree_sum

DEFAULT_EPS0 = 0.5        # stand-in for the annulus bending constant; heuristic
DEFAULT_ETA = math.pi / 3  # low-density threshold of the quantization lemma


# ---------------------------------------------------------------------------
# Push-forward masses by exact triangle-ball clipping
# ---------------------------------------------------------------------------

def _clip_face_disk(p0, p1, p2, center2, rho):
    """Area of a 2D triangle intersected with a disk, and the chord bound.

    Returns (area, segment_area): the exact intersection area and the part
    of it contributed by circular segments beyond the straight chords.
    """
    tri = [np.asarray(p0), np.asarray(p1), np.asarray(p2)]
    # Ensure counter-clockwise orientation.
    cross = (tri[1][0] - tri[0][0]) * (tri[2][1] - tri[0][1]) - \
            (tri[1][1] - tri[0][1]) * (tri[2][0] - tri[0][0])
    if cross < 0.0:
        tri = [tri[0], tri[2], tri[1]]
    c = np.asarray(center2)
    rho2 = rho * rho

    def inside(pt):
        d = pt - c
        return d[0] * d[0] + d[1] * d[1] <= rho2

    boundary = []  # (point, on_circle flag)
    any_inside = False
    for k in range(3):
        a, b = tri[k], tri[(k + 1) % 3]
        if inside(a):
            any_inside = True
            boundary.append((a, False))
        d = b - a
        f = a - c
        qa = d @ d
        qb = 2.0 * (f @ d)
        qc = f @ f - rho2
        disc = qb * qb - 4.0 * qa * qc
        if disc > 0.0 and qa > 0.0:
            sq = math.sqrt(disc)
            for t in ((-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)):
                if 1e-12 < t < 1.0 - 1e-12:
                    boundary.append((a + t * d, True))
    if not boundary:
        if any_inside:
            return _triangle_area(tri), 0.0
        # Either disjoint or the disk lies inside the triangle.
        if _point_in_triangle(c, tri):
            return math.pi * rho2, 0.0
        return 0.0, 0.0

    pts = [p for p, _ in boundary]
    flags = [f for _, f in boundary]
    poly = np.array(pts)
    area = 0.0
    n = len(poly)
    for k in range(n):
        x1, y1 = poly[k]
        x2, y2 = poly[(k + 1) % n]
        area += x1 * y2 - x2 * y1
    area = 0.5 * area

    # Circular segments: where consecutive boundary points both lie on the
    # circle and the triangle edge between them leaves the disk.
    seg_area = 0.0
    for k in range(n):
        if flags[k] and flags[(k + 1) % n]:
            p, q = poly[k], poly[(k + 1) % n]
            mid = 0.5 * (p + q) - c
            if mid @ mid >= rho2 * (1.0 - 1e-12):
                continue  # chord through the interior: not an outer arc
            u = (p - c) / rho
            v = (q - c) / rho
            dot = float(np.clip(u @ v, -1.0, 1.0))
            crossz = u[0] * v[1] - u[1] * v[0]
            theta = math.atan2(crossz, dot)
            if theta < 0.0:
                theta += 2.0 * math.pi
            seg_area += 0.5 * rho2 * (theta - math.sin(theta))
    return area + seg_area, seg_area


def _triangle_area(tri):
    a, b, c = tri
    return 0.5 * abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))


def _point_in_triangle(pt, tri):
    def side(p, a, b):
        return (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])

    d1 = side(pt, tri[0], tri[1])
    d2 = side(pt, tri[1], tri[2])
    d3 = side(pt, tri[2], tri[0])
    has_neg = (d1 < 0) or (d2 < 0) or (d3 < 0)
    has_pos = (d1 > 0) or (d2 > 0) or (d3 > 0)
    return not (has_neg and has_pos)


class _MassCalculator:
    """Caches per-immersion data for repeated ball-mass queries."""

    def __init__(self, imm: DiscreteImmersion):
        self.imm = imm
        f = imm.mesh.faces
        self.p0 = imm.coords[f[:, 0]]
        self.p1 = imm.coords[f[:, 1]]
        self.p2 = imm.coords[f[:, 2]]
        self.centroids = (self.p0 + self.p1 + self.p2) / 3.0
        edge_len = np.maximum(row_norms(self.p1 - self.p0),
                              np.maximum(row_norms(self.p2 - self.p1),
                                         row_norms(self.p0 - self.p2)))
        self.reach = float(edge_len.max())
        self.tree = cKDTree(self.centroids)

    def mass(self, q, r: float):
        """Exact surface mass inside B^4_r(q) plus the chord error bound."""
        if r <= 0.0:
            raise BadParam("ball radius must be positive")
        q = np.asarray(q, dtype=np.float64)
        if r >= 2.0 + self.reach:
            return float(self.imm.area), 0.0
        cand = self.tree.query_ball_point(q, r + self.reach)
        if not cand:
            return 0.0, 0.0
        cand = np.sort(np.asarray(cand, dtype=np.int64))
        d0 = row_norms(self.p0[cand] - q)
        d1 = row_norms(self.p1[cand] - q)
        d2 = row_norms(self.p2[cand] - q)
        dmax = np.maximum(d0, np.maximum(d1, d2))
        dmin = np.minimum(d0, np.minimum(d1, d2))
        full = dmax <= r
        total = float(np.sum(self.imm.dvol[cand[full]]))
        bound = 0.0
        partial = cand[~full & (dmin < r + self.reach)]
        for fi in partial:
            a4 = self.p0[fi]
            e1 = self.p1[fi] - a4
            e2 = self.p2[fi] - a4
            u1 = e1 / np.linalg.norm(e1)
            u2r = e2 - (e2 @ u1) * u1
            n2 = np.linalg.norm(u2r)
            if n2 <= 0.0:
                continue
            u2 = u2r / n2
            w = q - a4
            cx, cy = w @ u1, w @ u2
            off_sq = w @ w - cx * cx - cy * cy
            if off_sq >= r * r:
                continue
            rho = math.sqrt(max(r * r - off_sq, 0.0))
            tri0 = np.array([0.0, 0.0])
            tri1 = np.array([e1 @ u1, 0.0])
            tri2 = np.array([e2 @ u1, e2 @ u2])
            a, seg = _clip_face_disk(tri0, tri1, tri2, np.array([cx, cy]), rho)
            total += a
            bound += seg
        return total, bound


def pushforward_mass(imm: DiscreteImmersion, q, r: float,
                     calc: _MassCalculator | None = None) -> float:
    """Area of the immersed surface inside the extrinsic ball B^4_r(q)."""
    calc = calc or _MassCalculator(imm)
    return calc.mass(q, r)[0]


@dataclass(frozen=True)
class DensityProfile:
    center: np.ndarray
    radii: np.ndarray
    masses: np.ndarray
    ratios: np.ndarray           # masses / (pi r^2)
    fitted_c: float              # minimal C >= 0 making e^{Cr} mass/r^2 monotone
    chord_error_bounds: np.ndarray


def density_profile(imm: DiscreteImmersion, q, radii,
                    slack: float = 0.01,
                    calc: _MassCalculator | None = None) -> DensityProfile:
    """Ball masses over increasing radii and the fitted monotonicity constant.

    The fitted constant is the smallest C >= 0 such that e^{Cr} mass / r^2
    is nondecreasing across the sampled radii within the given relative
    slack.
    """
    radii = np.asarray(sorted(float(r) for r in radii))
    if len(radii) == 0 or radii[0] <= 0.0 or radii[-1] > 1.0:
        raise BadParam("radii must be increasing in (0, 1]")
    calc = calc or _MassCalculator(imm)
    out = [calc.mass(q, r) for r in radii]
    masses = np.array([m for m, _ in out])
    bounds = np.array([b for _, b in out])
    ratios = masses / (np.pi * radii ** 2)
    c_fit = 0.0
    for (r1, m1), (r2, m2) in zip(zip(radii, masses), zip(radii[1:], masses[1:])):
        if m2 <= 0.0 or m1 <= 0.0:
            continue
        # need e^{C r1} m1/r1^2 <= (1 + slack) e^{C r2} m2/r2^2
        need = (math.log(m1 * r2 ** 2 / (m2 * r1 ** 2)) - math.log1p(slack)) / (r2 - r1)
        c_fit = max(c_fit, need)
    return DensityProfile(center=np.asarray(q, dtype=np.float64), radii=radii,
                          masses=masses, ratios=ratios, fitted_c=max(c_fit, 0.0),
                          chord_error_bounds=bounds)


# ---------------------------------------------------------------------------
# Test vector fields on the ambient sphere
# ---------------------------------------------------------------------------

class RotationField:
    """Generator of the rotation in the (i, j) coordinate plane."""

    def __init__(self, i: int, j: int):
        if not (0 <= i < 4 and 0 <= j < 4 and i != j):
            raise BadParam("rotation plane indices must be distinct in 0..3")
        self.i, self.j = i, j

    def value(self, y):
        y = np.asarray(y, dtype=np.float64)
        out = np.zeros_like(y)
        out[..., self.i] = y[..., self.j]
        out[..., self.j] = -y[..., self.i]
        return out

    def jacobian(self, y):
        y = np.asarray(y, dtype=np.float64)
        jac = np.zeros(y.shape[:-1] + (4, 4))
        jac[..., self.i, self.j] = 1.0
        jac[..., self.j, self.i] = -1.0
        return jac


class CoordinateField:
    """Coordinate direction e_i projected tangent to the sphere."""

    def __init__(self, i: int):
        if not 0 <= i < 4:
            raise BadParam("coordinate index must be in 0..3")
        self.i = i

    def value(self, y):
        y = np.asarray(y, dtype=np.float64)
        out = -y[..., self.i][..., None] * y
        out[..., self.i] += 1.0
        return out

    def jacobian(self, y):
        y = np.asarray(y, dtype=np.float64)
        jac = np.zeros(y.shape[:-1] + (4, 4))
        eye = np.eye(4)
        # d/dy_m (delta_li - y_i y_l) = -delta_im y_l - y_i delta_lm
        jac -= y[..., :, None] * eye[self.i][None, :]
        jac -= y[..., self.i][..., None, None] * eye
        return jac


class BumpField:
    """A base field windowed by the C^1 bump (1 - s^2)^2, s = |y - c| / radius."""

    def __init__(self, base, center, radius: float):
        if radius <= 0.0:
            raise BadParam("bump radius must be positive")
        self.base = base
        self.center = np.asarray(center, dtype=np.float64)
        self.radius = float(radius)

    def _window(self, y):
        d = y - self.center
        s2 = np.sum(d * d, axis=-1) / self.radius ** 2
        w = np.where(s2 < 1.0, (1.0 - s2) ** 2, 0.0)
        dw = np.where(s2 < 1.0, -4.0 * (1.0 - s2), 0.0)[..., None] * d / self.radius ** 2
        return w, dw

    def value(self, y):
        y = np.asarray(y, dtype=np.float64)
        w, _ = self._window(y)
        return w[..., None] * self.base.value(y)

    def jacobian(self, y):
        y = np.asarray(y, dtype=np.float64)
        w, dw = self._window(y)
        base_v = self.base.value(y)
        base_j = self.base.jacobian(y)
        return w[..., None, None] * base_j + base_v[..., :, None] * dw[..., None, :]


def standard_field_basis():
    """The 10-field basis: 6 rotation generators plus 4 projected coordinates."""
    fields = [RotationField(i, j) for i in range(4) for j in range(i + 1, 4)]
    fields += [CoordinateField(i) for i in range(4)]
    return fields


def stationarity_residual(imm: DiscreteImmersion, field) -> float:
    """First-variation pairing of the varifold with an ambient vector field.

    Quadrature of sum_i <dX_i(Phi) dPhi^i, dPhi>_g - 2 X(Phi).Phi over the
    faces, with X and its Jacobian evaluated at face centroids. Vanishes,
    up to discretization, exactly when the surface is stationary.
    """
    cen = (imm.coords[imm.mesh.faces[:, 0]] + imm.coords[imm.mesh.faces[:, 1]]
           + imm.coords[imm.mesh.faces[:, 2]]) / 3.0
    jac = field.jacobian(cen)
    val = field.value(cen)
    e1, e2 = imm.edge1, imm.edge2
    j_e1 = np.einsum("flm,fm->fl", jac, e1)
    j_e2 = np.einsum("flm,fm->fl", jac, e2)
    t11 = np.sum(e1 * j_e1, axis=1)
    t12 = np.sum(e1 * j_e2, axis=1)
    t21 = np.sum(e2 * j_e1, axis=1)
    t22 = np.sum(e2 * j_e2, axis=1)
    # <J dPhi, dPhi>_g = g^{ab} (J e_a) . e_b
    term1 = (imm.g22 * t11 - imm.g12 * (t12 + t21) + imm.g11 * t22) / imm.detg
    term2 = 2.0 * np.sum(val * cen, axis=1)
    return tree_sum((term1 - term2) * imm.dvol)


def target_harmonic_residual(imm: DiscreteImmersion, n_weights=None, func=None,
                             face_subset=None) -> float:
    """Weak harmonic-map residual against a scalar test function.

    Evaluates | integral of N <d(F(Phi)), dPhi>_g - N F(Phi) A(dPhi, dPhi) |
    over the face subset, with the sphere identity A(dPhi, dPhi) = |dPhi|^2
    Phi arranged so the expression vanishes on smooth minimal surfaces. The
    integrand is vector-valued; the Euclidean norm of the total is returned.
    """
    if func is None:
        raise BadParam("a scalar test function with value() and grad() is required")
    faces = imm.mesh.faces
    n_faces = len(faces)
    if face_subset is None:
        subset = np.arange(n_faces)
    else:
        subset = np.asarray(sorted(face_subset), dtype=np.int64)
    if n_weights is None:
        weights = np.ones(len(subset))
    else:
        weights = np.asarray(n_weights, dtype=np.float64)
        if weights.shape == (n_faces,):
            weights = weights[subset]
        if weights.shape != (len(subset),):
            raise BadParam("weights must align with the face subset")
        if np.any(weights <= 0):
            raise BadParam("multiplicities must be positive")

    # Support check on the boundary of the subset.
    if len(subset) != n_faces:
        in_subset = np.zeros(n_faces, dtype=bool)
        in_subset[subset] = True
        f = faces
        directed = {}
        for fi in range(n_faces):
            if not in_subset[fi]:
                continue
            for k in range(3):
                i, j = f[fi, k], f[fi, (k + 1) % 3]
                directed[(int(i), int(j))] = fi
        boundary_vertices = set()
        for (i, j), fi in directed.items():
            if (j, i) not in directed:
                boundary_vertices.update((i, j))
        if boundary_vertices:
            pts = imm.coords[sorted(boundary_vertices)]
            if np.any(np.abs(func.value(pts)) > 1e-9):
                raise SupportViolation("test function does not vanish near the boundary image")

    f = faces[subset]
    a, b, c = imm.coords[f[:, 0]], imm.coords[f[:, 1]], imm.coords[f[:, 2]]
    cen = (a + b + c) / 3.0
    fv = func.value
    fa, fb, fc = fv(a), fv(b), fv(c)
    d1 = fb - fa
    d2 = fc - fa
    e1 = imm.edge1[subset]
    e2 = imm.edge2[subset]
    g11, g12, g22, det = imm.g11[subset], imm.g12[subset], imm.g22[subset], imm.detg[subset]
    dvol = imm.dvol[subset]
    # <d(F Phi), dPhi>_g = g^{ab} (dF)_a (dPhi)_b, vector-valued
    coef1 = (g22 * d1 - g12 * d2) / det
    coef2 = (g11 * d2 - g12 * d1) / det
    term1 = coef1[:, None] * e1 + coef2[:, None] * e2
    # A(Phi)(dPhi, dPhi)_g = |dPhi|^2_g Phi = 2 Phi on the induced metric
    term2 = 2.0 * fv(cen)[:, None] * cen
    contrib = weights[:, None] * (term1 - term2) * dvol[:, None]
    total = np.array([tree_sum(contrib[:, k]) for k in range(4)])
    return float(np.linalg.norm(total))


class ScalarBump:
    """C^1 scalar bump (1 - s^2)^2 with s = |y - c| / radius, else zero."""

    def __init__(self, center, radius: float):
        if radius <= 0.0:
            raise BadParam("bump radius must be positive")
        self.center = np.asarray(center, dtype=np.float64)
        self.radius = float(radius)

    def value(self, y):
        y = np.asarray(y, dtype=np.float64)
        d = y - self.center
        s2 = np.sum(d * d, axis=-1) / self.radius ** 2
        return np.where(s2 < 1.0, (1.0 - s2) ** 2, 0.0)

    def grad(self, y):
        y = np.asarray(y, dtype=np.float64)
        d = y - self.center
        s2 = np.sum(d * d, axis=-1) / self.radius ** 2
        coef = np.where(s2 < 1.0, -4.0 * (1.0 - s2), 0.0) / self.radius ** 2
        return coef[..., None] * d


# ---------------------------------------------------------------------------
# Collapse, quantization, necks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CollapseReport:
    collapsed: bool
    diameter: float
    premise_holds: bool
    sigma_sq_fp: float
    area: float


def collapse_check(imm: DiscreteImmersion, p: float, sigma: float,
                   eps: float, delta: float) -> CollapseReport:
    """Flag the state the non-collapsing statement forbids for critical points:

    small bending ratio (sigma^2 F_p <= eps Area) together with extrinsic
    diameter <= delta.
    """
    if eps <= 0.0 or delta < 0.0:
        raise BadParam("need eps > 0 and delta >= 0")
    e = energies(imm, p, sigma)
    diam = imm.extrinsic_diameter()
    premise = sigma ** 2 * e.f_p <= eps * e.area
    return CollapseReport(collapsed=bool(premise and diam <= delta and delta > 0.0),
                          diameter=diam, premise_holds=bool(premise),
                          sigma_sq_fp=sigma ** 2 * e.f_p, area=e.area)


@dataclass(frozen=True)
class QuantizationReport:
    premise_holds: bool
    area: float
    q0: float
    area_above_q0: bool
    low_density_fraction: float
    low_density_count: int
    sigma: float
    eta: float


def quantization_check(imm: DiscreteImmersion, p: float, sigma: float,
                       lam: float, eta: float = DEFAULT_ETA,
                       q0: float = 1.0) -> QuantizationReport:
    """Premise and low-density set of the global energy quantization lemma.

    The low-density set collects vertices q whose ball mass at radius sigma
    is below eta sigma^2; its dual-area fraction is reported.
    """
    if not (0.0 < sigma < 1.0):
        raise BadParam("sigma must lie in (0, 1)")
    if lam <= 0.0 or eta <= 0.0:
        raise BadParam("lam and eta must be positive")
    e = energies(imm, p, sigma)
    premise = sigma ** 2 * e.f_p <= lam / math.log(1.0 / sigma) * e.area
    calc = _MassCalculator(imm)
    low = np.zeros(imm.vertex_count, dtype=bool)
    for v in range(imm.vertex_count):
        m, _ = calc.mass(imm.coords[v], sigma)
        if m / sigma ** 2 < eta:
            low[v] = True
    frac = float(np.sum(imm.dual_areas[low]) / e.area)
    return QuantizationReport(premise_holds=bool(premise), area=e.area, q0=q0,
                              area_above_q0=bool(e.area >= q0),
                              low_density_fraction=frac,
                              low_density_count=int(low.sum()),
                              sigma=sigma, eta=eta)


def _graph_distances(imm: DiscreteImmersion, source: int, weighted: bool) -> np.ndarray:
    """Dijkstra distances from a vertex over the edge graph.

    weighted=True uses immersed edge lengths, False counts hops.
    """
    edges = imm.mesh.edges
    if weighted:
        lengths = row_norms(imm.coords[edges[:, 1]] - imm.coords[edges[:, 0]])
    else:
        lengths = np.ones(len(edges))
    adj = [[] for _ in range(imm.vertex_count)]
    for (i, j), l in zip(edges, lengths):
        adj[i].append((int(j), float(l)))
        adj[j].append((int(i), float(l)))
    dist = np.full(imm.vertex_count, np.inf)
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist[v]:
            continue
        for w, l in adj[v]:
            nd = d + l
            if nd < dist[w]:
                dist[w] = nd
                heapq.heappush(heap, (nd, w))
    return dist


@dataclass(frozen=True)
class NeckScanReport:
    center: int
    delta: float
    annuli_energies: np.ndarray   # index j = 1..J
    max_annulus_energy: float
    total_energy: float
    flagged: bool


def neck_scan(imm: DiscreteImmersion, x: int, delta: float, j_max: int,
              eps0: float = DEFAULT_EPS0, neck_tol: float | None = None) -> NeckScanReport:
    """Dirichlet mass over dyadic annuli around a parameter vertex.

    Annulus j spans graph distances [2^j delta, 2^{j+1} delta), j = 1..J,
    measured in hops on the parameter mesh. Flags a neck candidate when
    every annulus is quiet while the union still carries at least eps0.
    """
    if j_max < 1:
        raise BadParam("need at least one annulus")
    if delta <= 0.0:
        raise BadParam("delta must be positive")
    if not 0 <= x < imm.vertex_count:
        raise BadParam("center vertex out of range")
    if neck_tol is None:
        neck_tol = eps0 / 4.0
    dist = _graph_distances(imm, x, weighted=False)
    eccentricity = float(dist.max())
    if 2.0 ** (j_max + 1) * delta > eccentricity:
        raise BadParam("annuli exceed the parameter-domain injectivity scale")
    faces = imm.mesh.faces
    face_dist = (dist[faces[:, 0]] + dist[faces[:, 1]] + dist[faces[:, 2]]) / 3.0
    dir_faces = dirichlet_per_face(imm)
    energies_j = []
    for j in range(1, j_max + 1):
        lo, hi = 2.0 ** j * delta, 2.0 ** (j + 1) * delta
        sel = (face_dist >= lo) & (face_dist < hi)
        energies_j.append(tree_sum(dir_faces[sel]))
    energies_j = np.array(energies_j)
    total = float(energies_j.sum())
    flagged = bool(energies_j.max() < neck_tol and total >= eps0)
    return NeckScanReport(center=x, delta=delta, annuli_energies=energies_j,
                          max_annulus_energy=float(energies_j.max()),
                          total_energy=total, flagged=flagged)


# ---------------------------------------------------------------------------
# Oscillation / vanishing indicators over a sigma-sequence
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConcentrationReport:
    sigmas: np.ndarray
    oscillation: np.ndarray   # small values flag oscillation candidates
    vanishing: np.ndarray     # small values flag vanishing candidates
    oscillation_trend: float  # last / first
    vanishing_trend: float


def oscillation_vanishing_estimate(imms, sigmas, x: int, r: float) -> ConcentrationReport:
    """Concentration indicators around a vertex across a sigma-sequence.

    The oscillation indicator compares the area measure on B_2r with the
    parametric Dirichlet measure on B_r: it drops when the map carries
    energy without area, the discrete signature of oscillation. The
    vanishing indicator is the measure-to-bending ratio of the vanishing
    set definition; it drops where curvature concentrates faster than area.
    """
    imms = list(imms)
    sigmas = [float(s) for s in sigmas]
    if len(imms) < 2 or len(imms) != len(sigmas):
        raise BadParam("need >= 2 immersions with matching sigmas")
    if any(b >= a for a, b in zip(sigmas, sigmas[1:])):
        raise BadParam("sigmas must be strictly decreasing")
    mesh0 = imms[0].mesh
    for im in imms[1:]:
        if not mesh0.same_combinatorics(im.mesh):
            raise MeshMismatch("immersions do not share mesh combinatorics")
    h = imms[-1].median_edge_length
    if r < 4.0 * h:
        raise BadParam(f"radius {r} below the resolvable scale 4h = {4*h:.4g}")
    dist = _graph_distances(imms[-1], x, weighted=True)
    faces = mesh0.faces
    face_dist = (dist[faces[:, 0]] + dist[faces[:, 1]] + dist[faces[:, 2]]) / 3.0
    in_r = face_dist < r
    in_2r = face_dist < 2.0 * r
    p = 2.0
    osc, van = [], []
    for im, sigma in zip(imms, sigmas):
        dir_faces = dirichlet_per_face(im)
        area_2r = tree_sum(im.dvol[in_2r])
        dirich_r = tree_sum(dir_faces[in_r])
        osc.append(2.0 * area_2r / (2.0 * dirich_r + 1e-14))
        ii = ii_squared(im, gauss_map(im, check_orientation=False))
        fp_r = tree_sum((1.0 + ii[in_r]) ** p * im.dvol[in_r])
        fp_tot = tree_sum((1.0 + ii) ** p * im.dvol)
        f_sigma = sigma ** 2 * fp_tot / tree_sum(im.dvol)
        area_r = tree_sum(im.dvol[in_r])
        van.append(f_sigma * area_r / (sigma ** 2 * fp_r + 1e-14))
    osc = np.array(osc)
    van = np.array(van)
    return ConcentrationReport(sigmas=np.array(sigmas), oscillation=osc, vanishing=van,
                               oscillation_trend=float(osc[-1] / (osc[0] + 1e-14)),
                               vanishing_trend=float(van[-1] / (van[0] + 1e-14)))


# ---------------------------------------------------------------------------
# Integer density and degenerate-rank measure
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntegerDensity:
    n_hat: float
    n_rounded: int
    confidence: float
    ratios: np.ndarray


def integer_density(imm: DiscreteImmersion, q, radii_window) -> IntegerDensity:
    """Median density over a radius window, rounded to the nearest integer.

    Confidence is 1 - 2 |n_hat - round(n_hat)| clipped to [0, 1].
    """
    radii = np.asarray(sorted(float(r) for r in radii_window))
    if len(radii) == 0 or radii[0] <= 0.0:
        raise BadParam("radius window must contain positive radii")
    calc = _MassCalculator(imm)
    ratios = np.array([calc.mass(q, r)[0] / (math.pi * r * r) for r in radii])
    n_hat = float(np.median(ratios))
    n_rounded = int(round(n_hat))
    confidence = float(np.clip(1.0 - 2.0 * abs(n_hat - n_rounded), 0.0, 1.0))
    return IntegerDensity(n_hat=n_hat, n_rounded=n_rounded,
                          confidence=confidence, ratios=ratios)


def degenerate_rank_measure(imm: DiscreteImmersion, rank_ratio_tol: float) -> float:
    """Fraction of Dirichlet mass on faces with near-degenerate Jacobians."""
    if not (0.0 < rank_ratio_tol < 1.0):
        raise BadParam("rank_ratio_tol must lie in (0, 1)")
    tr = imm.g11 + imm.g22
    disc = np.sqrt(np.maximum(tr ** 2 - 4.0 * imm.detg, 0.0))
    lam_min = 0.5 * (tr - disc)
    lam_max = 0.5 * (tr + disc)
    ratio = np.sqrt(np.maximum(lam_min, 0.0) / lam_max)
    dir_faces = dirichlet_per_face(imm)
    bad = ratio < rank_ratio_tol
    total = tree_sum(dir_faces)
    return float(tree_sum(dir_faces[bad]) / total) if total > 0 else 0.0


def farthest_point_sample(imm: DiscreteImmersion, k: int, start: int = 0) -> np.ndarray:
    """Deterministic farthest-point sampling of vertex indices."""
    if k < 1:
        raise BadParam("need k >= 1 sample points")
    chosen = [start]
    d = row_norms(imm.coords - imm.coords[start])
    while len(chosen) < k:
        nxt = int(np.argmax(d))
        chosen.append(nxt)
        d = np.minimum(d, row_norms(imm.coords - imm.coords[nxt]))
    return np.array(chosen, dtype=np.int64)
