import math

import numpy as np
import pytest

import _fixtures as fx
from viscosurf import mesh
from viscosurf.errors import BadParam, MeshMismatch, SupportViolation
from viscosurf.varifold import (BumpField, CoordinateField, RotationField,
                                ScalarBump, collapse_check, degenerate_rank_measure,
                                density_profile, farthest_point_sample,
                                integer_density, neck_scan,
                                oscillation_vanishing_estimate, pushforward_mass,
                                quantization_check, standard_field_basis,
                                stationarity_residual, target_harmonic_residual)

FOUR_PI = 4.0 * np.pi


# -- push-forward masses ----------------------------------------------------

def test_mass_total_for_large_radius(equator4):
    q = equator4.coords[0]
    assert pushforward_mass(equator4, q, 2.5) == pytest.approx(equator4.area)


def test_mass_zero_far_away(equator4):
    q = np.array([0.0, 0.0, 0.0, 1.0])  # distance 1 from the equator sphere
    assert pushforward_mass(equator4, q, 0.3) == 0.0


def test_density_ratio_one_at_smooth_point(equator5):
    h = equator5.median_edge_length
    q = equator5.coords[17]
    for r in np.linspace(4 * h, 0.2, 4):
        ratio = pushforward_mass(equator5, q, r) / (math.pi * r * r)
        assert 0.97 < ratio < 1.03


def test_mass_monotone_in_radius(equator4):
    q = equator4.coords[5]
    radii = np.linspace(0.05, 1.0, 25)
    masses = [pushforward_mass(equator4, q, r) for r in radii]
    assert all(b >= a - 1e-12 for a, b in zip(masses, masses[1:]))


def test_density_profile_equator(equator5):
    h = equator5.median_edge_length
    prof = density_profile(equator5, equator5.coords[3], np.geomspace(4 * h, 0.3, 8))
    assert np.all(np.diff(prof.masses) >= 0)
    assert np.all(prof.ratios > 0.9) and np.all(prof.ratios < 1.1)
    assert prof.fitted_c <= 2.0


def test_density_profile_single_radius(equator4):
    prof = density_profile(equator4, equator4.coords[0], [0.2])
    assert prof.fitted_c == 0.0


def test_density_profile_transverse_crossing():
    imm, q = fx.transverse_spheres(3)
    h = imm.median_edge_length
    prof = density_profile(imm, q, np.geomspace(4 * h, 0.25, 6))
    assert abs(prof.ratios[0] - 2.0) < 0.15  # two sheets through q


def test_density_profile_radius_guard(equator4):
    with pytest.raises(BadParam):
        density_profile(equator4, equator4.coords[0], [0.5, 1.5])


# -- stationarity -----------------------------------------------------------

def test_stationarity_zero_field(equator4):
    class ZeroField:
        def value(self, y):
            return np.zeros_like(y)

        def jacobian(self, y):
            return np.zeros(y.shape[:-1] + (4, 4))

    assert stationarity_residual(equator4, ZeroField()) == 0.0


def test_stationarity_equator_small(equator5):
    for field in standard_field_basis():
        assert abs(stationarity_residual(equator5, field)) <= 1e-2 * equator5.area


def test_stationarity_contrast_latitude(equator5):
    lat = mesh.generate("latitude_sphere", 0.3, 5)
    fields = standard_field_basis()
    eq_stat = np.mean([abs(stationarity_residual(equator5, f)) for f in fields])
    lat_stat = np.mean([abs(stationarity_residual(lat, f)) for f in fields])
    assert lat_stat >= 10.0 * max(eq_stat, 1e-12)


def test_stationarity_linear_in_field(equator3, rng):
    fx_ = RotationField(0, 3)
    fy = CoordinateField(2)

    class Combo:
        def __init__(self, a, b):
            self.a, self.b = a, b

        def value(self, y):
            return self.a * fx_.value(y) + self.b * fy.value(y)

        def jacobian(self, y):
            return self.a * fx_.jacobian(y) + self.b * fy.jacobian(y)

    a, b = 2.5, -1.25
    lhs = stationarity_residual(equator3, Combo(a, b))
    rhs = a * stationarity_residual(equator3, fx_) + b * stationarity_residual(equator3, fy)
    assert abs(lhs - rhs) < 1e-10


def test_stationarity_bump_field_decreases_under_refinement():
    # The bump-windowed coordinate field breaks every symmetry, exposing
    # the pure discretization error of the quadrature on the minimal fixture.
    center = mesh.generate("equator", 3).coords[10]
    vals = []
    for level in (3, 4):
        eq = mesh.generate("equator", level)
        fld = BumpField(CoordinateField(2), center, 0.6)
        vals.append(abs(stationarity_residual(eq, fld)))
    assert vals[1] <= 0.5 * vals[0]


# -- target harmonic --------------------------------------------------------

def test_target_harmonic_zero_function(equator4):
    class ZeroFunc:
        def value(self, y):
            return np.zeros(y.shape[:-1])

        def grad(self, y):
            return np.zeros_like(y)

    assert target_harmonic_residual(equator4, func=ZeroFunc()) == 0.0


def test_target_harmonic_refinement_decrease():
    center = mesh.generate("equator", 3).coords[10]
    vals = []
    for level in (3, 4):
        eq = mesh.generate("equator", level)
        vals.append(target_harmonic_residual(eq, func=ScalarBump(center, 0.5)))
    assert vals[1] <= 0.5 * vals[0]


def test_target_harmonic_linear_in_multiplicity(equator4):
    bump = ScalarBump(equator4.coords[10], 0.5)
    r1 = target_harmonic_residual(equator4, func=bump)
    n2 = 2 * np.ones(equator4.face_count)
    r2 = target_harmonic_residual(equator4, n_weights=n2, func=bump)
    assert r2 == pytest.approx(2.0 * r1, rel=1e-12)


def test_target_harmonic_scaling_in_function(equator4):
    bump = ScalarBump(equator4.coords[10], 0.5)

    class Scaled:
        def __init__(self, base, a):
            self.base, self.a = base, a

        def value(self, y):
            return self.a * self.base.value(y)

        def grad(self, y):
            return self.a * self.base.grad(y)

    r1 = target_harmonic_residual(equator4, func=bump)
    r3 = target_harmonic_residual(equator4, func=Scaled(bump, 3.0))
    assert r3 == pytest.approx(3.0 * r1, rel=1e-12)


def test_target_harmonic_support_violation(equator4):
    # restrict to half the faces; a wide bump reaches the cut boundary
    f = equator4.mesh.faces
    cen_x = equator4.coords[f].mean(axis=1)[:, 0]
    subset = np.nonzero(cen_x > 0)[0]
    wide = ScalarBump(np.array([1.0, 0, 0, 0]), 2.5)
    with pytest.raises(SupportViolation):
        target_harmonic_residual(equator4, func=wide, face_subset=subset)


def test_target_harmonic_local_bump_on_subset(equator4):
    f = equator4.mesh.faces
    cen_x = equator4.coords[f].mean(axis=1)[:, 0]
    subset = np.nonzero(cen_x > 0)[0]
    local = ScalarBump(np.array([1.0, 0, 0, 0]), 0.4)
    val = target_harmonic_residual(equator4, func=local, face_subset=subset)
    assert np.isfinite(val)


# -- collapse / quantization ------------------------------------------------

def test_collapse_equator_ok(equator5):
    rep = collapse_check(equator5, 2.0, 0.1, eps=0.1, delta=0.1)
    assert not rep.collapsed
    assert rep.diameter == pytest.approx(2.0, abs=1e-9)


def test_collapse_tiny_cap_flagged():
    tiny = mesh.generate("latitude_sphere", 0.99969, 2)
    assert tiny.extrinsic_diameter() < 0.05
    rep = collapse_check(tiny, 2.0, sigma=1e-5, eps=0.1, delta=0.1)
    assert rep.premise_holds
    assert rep.collapsed


def test_collapse_delta_zero_always_ok(equator3):
    rep = collapse_check(equator3, 2.0, 0.1, eps=0.5, delta=0.0)
    assert not rep.collapsed


def test_quantization_equator(equator4):
    rep = quantization_check(equator4, 2.0, sigma=0.05, lam=1.0, q0=1.0)
    assert rep.premise_holds
    assert rep.area_above_q0
    assert rep.low_density_fraction <= 0.05


def test_quantization_large_q0(equator4):
    rep = quantization_check(equator4, 2.0, sigma=0.05, lam=1.0, q0=100.0)
    assert not rep.area_above_q0


def test_quantization_sigma_guard(equator4):
    with pytest.raises(BadParam):
        quantization_check(equator4, 2.0, sigma=1.0, lam=1.0)


# -- necks ------------------------------------------------------------------

def test_neck_scan_equator_no_flag(equator5):
    rep = neck_scan(equator5, 0, 2.0, 3)
    assert not rep.flagged
    assert np.all(rep.annuli_energies >= 0.0)


def test_neck_scan_dumbbell_flagged():
    imm, center = fx.dumbbell_with_neck()
    rep = neck_scan(imm, center, 8.0, 4, eps0=0.03, neck_tol=0.0105)
    assert rep.flagged
    assert rep.max_annulus_energy < 0.0105
    assert rep.total_energy >= 0.03


def test_neck_scan_guards(equator4):
    with pytest.raises(BadParam):
        neck_scan(equator4, 0, 2.0, 0)
    with pytest.raises(BadParam):
        neck_scan(equator4, 0, 50.0, 6)  # annuli exceed the mesh scale


# -- oscillation / vanishing ------------------------------------------------

def test_oscillation_vanishing_flat_sequence(equator3):
    h = equator3.median_edge_length
    rep = oscillation_vanishing_estimate([equator3, equator3], [0.2, 0.1], 0, 5 * h)
    assert np.all(rep.oscillation > 0.5)
    assert np.all(rep.vanishing > 0.5)


def test_oscillation_squeezed_sequence_drops():
    seq, x = fx.squeezed_torus_sequence(32, 32, (0.5, 0.1))
    h = seq[-1].median_edge_length
    rep = oscillation_vanishing_estimate(seq, [0.2, 0.1], x, max(5 * h, 0.3))
    plain = mesh.generate("clifford", 32, 32)
    base = oscillation_vanishing_estimate([plain, plain], [0.2, 0.1], x, max(5 * h, 0.3))
    assert rep.oscillation[-1] < 0.5 * base.oscillation[-1]
    assert rep.oscillation_trend < 1.0
    assert rep.vanishing[-1] < 0.5 * base.vanishing[-1]


def test_oscillation_radius_guard(equator3):
    h = equator3.median_edge_length
    with pytest.raises(BadParam):
        oscillation_vanishing_estimate([equator3, equator3], [0.2, 0.1], 0, 2 * h)


def test_oscillation_mesh_mismatch(equator3, equator4):
    with pytest.raises(MeshMismatch):
        oscillation_vanishing_estimate([equator3, equator4], [0.2, 0.1], 0, 1.0)


# -- integer density --------------------------------------------------------

def test_integer_density_equator(equator5):
    h = equator5.median_edge_length
    est = integer_density(equator5, equator5.coords[0], np.geomspace(4 * h, 0.3, 6))
    assert est.n_rounded == 1
    assert est.confidence >= 0.8


def test_integer_density_doubled_cover():
    single, doubled = fx.branched_double_cover(4)
    h = single.median_edge_length
    window = np.geomspace(4 * h, 0.3, 6)
    q = doubled.coords[0]
    est = integer_density(doubled, q, window)
    assert est.n_rounded == 2
    assert est.confidence >= 0.8
    base = integer_density(single, single.coords[0], window)
    assert abs(est.n_hat - 2.0 * base.n_hat) < 0.05


def test_integer_density_off_surface(equator4):
    q = np.array([0.0, 0.0, 0.0, 1.0])
    est = integer_density(equator4, q, [0.1, 0.2, 0.3])
    assert est.n_hat == 0.0
    assert est.n_rounded == 0


# -- degenerate rank --------------------------------------------------------

def test_degenerate_rank_equator(equator4):
    assert degenerate_rank_measure(equator4, 0.05) == 0.0


def test_degenerate_rank_pinched_band():
    pb = fx.pinched_band()
    frac = degenerate_rank_measure(pb, 0.05)
    assert frac > 0.05


def test_degenerate_rank_guard(equator3):
    with pytest.raises(BadParam):
        degenerate_rank_measure(equator3, 1.0)


def test_farthest_point_sample(equator4):
    pts = farthest_point_sample(equator4, 8)
    assert len(np.unique(pts)) == 8
