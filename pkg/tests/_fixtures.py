"""Specialized test surfaces that the library's generators do not cover."""

import numpy as np

from viscosurf.mesh import DiscreteImmersion, ParamMesh, generate


def branched_double_cover(level=4):
    """Connected immersion covering the equatorial 2-sphere twice.

    Doubles the longitude around the x3 axis, the discrete version of the
    squaring map; every image point away from the two branch points is
    covered by two sheets, so ball masses and densities double.
    """
    eq = generate("equator", level)
    c = eq.coords
    r2 = c[:, 0] ** 2 + c[:, 1] ** 2
    safe = np.maximum(r2, 1e-300)
    cos2 = np.where(r2 > 1e-24, (c[:, 0] ** 2 - c[:, 1] ** 2) / safe, 1.0)
    sin2 = np.where(r2 > 1e-24, 2.0 * c[:, 0] * c[:, 1] / safe, 0.0)
    r = np.sqrt(r2)
    doubled = np.stack([r * cos2, r * sin2, c[:, 2], c[:, 3]], axis=1)
    return eq, DiscreteImmersion(eq.mesh, doubled)


def _lathe(profile_rho, profile_z, m):
    """Closed surface of revolution around the z axis in R^3.

    profile_rho[0] and profile_rho[-1] must be positive; the ends close
    with vertex fans at the poles. Returns (verts3, faces).
    """
    n = len(profile_rho)
    verts = []
    for k in range(n):
        for j in range(m):
            ang = 2.0 * np.pi * j / m
            verts.append((profile_rho[k] * np.cos(ang),
                          profile_rho[k] * np.sin(ang), profile_z[k]))
    south = len(verts)
    verts.append((0.0, 0.0, profile_z[0] - 0.75 * abs(profile_rho[0]) - 1e-3))
    north = len(verts)
    verts.append((0.0, 0.0, profile_z[-1] + 0.75 * abs(profile_rho[-1]) + 1e-3))

    def vid(k, j):
        return k * m + (j % m)

    faces = []
    for k in range(n - 1):
        for j in range(m):
            a, b = vid(k, j), vid(k, j + 1)
            c_, d = vid(k + 1, j), vid(k + 1, j + 1)
            faces.append((a, b, d))
            faces.append((a, d, c_))
    for j in range(m):
        faces.append((vid(0, j + 1), vid(0, j), south))
        faces.append((vid(n - 1, j), vid(n - 1, j + 1), north))
    return np.array(verts), np.array(faces, dtype=np.int64)


def inverse_stereographic(x3):
    """Conformal map R^3 -> S^3 \\ {north pole}; exactly unit norm."""
    x3 = np.asarray(x3, dtype=np.float64)
    s = np.sum(x3 * x3, axis=-1)
    out = np.empty(x3.shape[:-1] + (4,))
    out[..., :3] = 2.0 * x3 / (s + 1.0)[..., None]
    out[..., 3] = (s - 1.0) / (s + 1.0)
    return out


def dumbbell_with_neck(rings_per_side=260, m=8, r0=0.05, sphere_r=0.35):
    """Two spheres joined by a long thin tube; the neck-scan fixture.

    The tube radius falls off as 1 / sqrt(ring index from the center), which
    spreads the Dirichlet energy almost uniformly over dyadic hop-annuli:
    the signature the neck scan looks for. Returns (immersion,
    center_vertex_index).
    """
    k = np.arange(1, rings_per_side + 1)
    rho_half = r0 / np.sqrt(k)
    dz_half = np.cumsum(2.0 * np.pi * rho_half / m)
    rho = np.concatenate([rho_half[::-1], [r0 * 1.02], rho_half])
    z = np.concatenate([-dz_half[::-1], [0.0], dz_half])

    # Fat spheres at both ends, attached where the tube is thinnest. The
    # first cap ring duplicates the tube tip, so it is dropped.
    tip_rho = rho_half[-1]
    n_cap = 25
    phi = np.linspace(np.arcsin(min(tip_rho / sphere_r, 1.0)), np.pi - 0.18, n_cap)[1:]
    cap_rho = sphere_r * np.sin(phi)
    zc = z[-1]
    phi0 = np.arcsin(min(tip_rho / sphere_r, 1.0))
    cap_z = zc + sphere_r * (np.cos(phi0) - np.cos(phi))
    rho = np.concatenate([cap_rho[::-1], rho, cap_rho])
    z = np.concatenate([-(cap_z[::-1]), z, cap_z])

    verts3, faces = _lathe(rho, z, m)
    coords = inverse_stereographic(0.35 * verts3)  # scale into a tame chart
    imm = DiscreteImmersion(ParamMesh(len(coords), faces), coords)
    center_ring = n_cap + rings_per_side  # index of the middle ring
    return imm, center_ring * m


def transverse_spheres(level=3):
    """Two great 2-spheres crossing transversally, bridged far from the
    crossing circle so the mesh stays connected.

    Returns (immersion, q) with q a point on the intersection circle
    {x3 = x4 = 0} where both sheets pass.
    """
    a = generate("equator", level)           # {x4 = 0}
    rot = np.array([[1.0, 0, 0, 0],
                    [0, 1.0, 0, 0],
                    [0, 0, 0, -1.0],
                    [0, 0, 1.0, 0]])        # proper rotation: {x4=0} -> {x3=0}
    coords_b = a.coords @ rot.T

    va, fa = a.coords, a.mesh.faces
    nb = len(coords_b)

    # Remove one face near the pole of each sphere, far from the circle.
    pole_a = int(np.argmax(va[:, 2]))        # near (0,0,1,0)
    pole_b = int(np.argmax(coords_b[:, 3]))  # near (0,0,0,1)
    fa_drop = int(np.nonzero((fa == pole_a).any(axis=1))[0][0])
    fb_drop = int(np.nonzero((fa == pole_b).any(axis=1))[0][0])

    tri_a = fa[fa_drop]
    tri_b = fa[fb_drop] + len(va)
    keep_a = np.delete(fa, fa_drop, axis=0)
    keep_b = np.delete(fa, fb_drop, axis=0) + len(va)

    a0, a1, a2 = (int(v) for v in tri_a)
    b0, b1, b2 = (int(v) for v in tri_b)
    # Stitch the two triangular holes with a prism of six faces, walking
    # loop B backwards so every directed edge appears exactly once.
    bridge = np.array([
        (a0, a1, b2), (a0, b2, b0), (a1, a2, b1),
        (a1, b1, b2), (a2, a0, b0), (a2, b0, b1),
    ], dtype=np.int64)
    faces = np.concatenate([keep_a, keep_b, bridge])
    coords = np.concatenate([va, coords_b])
    imm = DiscreteImmersion(ParamMesh(len(coords), faces), coords)
    q = np.array([1.0, 0.0, 0.0, 0.0])      # on the crossing circle
    return imm, q


def pinched_band(nu=32, nv=32, squeeze=1e-4):
    """Clifford-style torus with one band of near-rank-1 faces.

    Vertices in a narrow u-band collapse their v angle toward a single
    value, producing slivers whose Jacobian singular-value ratio sits far
    below any reasonable rank threshold while staying a legal immersion.
    """
    iu, iv = np.meshgrid(np.arange(nu), np.arange(nv), indexing="ij")
    u = 2.0 * np.pi * iu.astype(float) / nu
    v = 2.0 * np.pi * iv.astype(float) / nv
    band = np.abs(u - np.pi) < (2.0 * np.pi / nu) * 1.5
    v = np.where(band, np.pi + (v - np.pi) * squeeze, v)
    coords = np.stack([np.cos(u).ravel(), np.sin(u).ravel(),
                       np.cos(v).ravel(), np.sin(v).ravel()], axis=1) / np.sqrt(2.0)

    def vid(i, j):
        return (i % nu) * nv + (j % nv)

    faces = []
    for i in range(nu):
        for j in range(nv):
            faces.append((vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)))
            faces.append((vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)))
    return DiscreteImmersion(ParamMesh(nu * nv, np.array(faces, dtype=np.int64)), coords)


def squeezed_torus_sequence(nu=32, nv=32, squeezes=(0.5, 0.1)):
    """Tori with a progressively squeezed band: the oscillation fixture.

    Squeezing one parameter direction turns band faces into slivers whose
    area vanishes while their parametric Dirichlet energy survives, which
    is the discrete signature of an oscillating parametrization. Returns
    (immersions, center_vertex) with the center inside the band.
    """
    seq = [pinched_band(nu, nv, squeeze=s) for s in squeezes]
    center = (nu // 2) * nv + nv // 2
    return seq, center


def sheared_equator_sequence(level=3, amplitudes=(0.05, 0.12), radius_hops=6):
    """Immersions with growing anisotropic shear localized at one vertex.

    The shear displaces alternating rings tangentially, inflating the
    parametric Dirichlet energy much faster than the area: the discrete
    oscillation signature. Returns (immersions, center_vertex).
    """
    from viscosurf.ambient import S3
    from viscosurf.varifold import _graph_distances

    eq = generate("equator", level)
    x = 0
    hops = _graph_distances(eq, x, weighted=False)
    window = np.clip(1.0 - hops / radius_hops, 0.0, 1.0)
    sign = np.where(hops.astype(int) % 2 == 0, 1.0, -1.0)

    tangent_dir = np.zeros_like(eq.coords)
    ref = np.array([0.0, 0.0, 0.0, 1.0])
    t = np.cross(eq.coords[:, :3], ref[None, :3])
    nrm = np.linalg.norm(t, axis=1)
    ok = nrm > 1e-8
    t[ok] /= nrm[ok][:, None]
    t[~ok] = np.array([1.0, 0.0, 0.0])
    tangent_dir[:, :3] = t

    seq = []
    for amp in amplitudes:
        disp = (amp * window * sign)[:, None] * tangent_dir
        disp -= np.sum(disp * eq.coords, axis=1)[:, None] * eq.coords
        seq.append(eq.with_coords(S3.retract(eq.coords, disp)))
    return seq, x
