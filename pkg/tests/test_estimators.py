import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from energydensity.curves import RationalCurve, constant_curve, curve_energy_field, identity_curve
from energydensity.estimators import (
    PER_OCTAVE,
    adaptive_simpson,
    characteristic_profile,
    geometric_t_grid,
    monotonicity_flags,
    nsa_characteristic,
    ow_average,
    region_surface,
    rho_estimate,
    rho_family_estimate,
    rho_nsa_estimate,
    rho_tilde_estimate,
    translate_orbit_experiment,
)
from energydensity.field import (
    QuadratureConfig,
    TranslateSearchConfig,
    constant_field,
    disk_lattice,
    stripe_field,
    translate,
)
from energydensity.geometry import Ball, BoxRegion
from energydensity.reports import ConvergenceTable, TableRow

Q = QuadratureConfig(abs_tol=1e-6)
LOOSE = QuadratureConfig(abs_tol=1e-4, rel_tol=5e-3, max_levels=4, strict=False)
CURVE_Q = QuadratureConfig(abs_tol=1e-9, mass_rel_tol=1e-5)


def T_identity(r):
    return math.pi / 2 * math.log((1 + r * r) / 2)


# -- t-grids and Simpson


def test_geometric_t_grid_density():
    anchors = [1.0, 2.0, 5.0, 40.0]
    g = geometric_t_grid(anchors)
    assert np.all(np.diff(g) > 0)
    assert all(a in g for a in anchors)
    ratio = np.diff(np.log2(g)).max()
    assert ratio <= 1 / PER_OCTAVE + 1e-12


def test_geometric_t_grid_rejects_nonpositive():
    with pytest.raises(ValueError):
        geometric_t_grid([0.0, 1.0])


def test_adaptive_simpson_known_integrals():
    assert adaptive_simpson(np.sin, 0.0, math.pi, 1e-10) == pytest.approx(2.0, abs=1e-9)
    assert adaptive_simpson(lambda t: 1 / t, 1.0, math.e, 1e-10) == pytest.approx(1.0, abs=1e-9)
    assert adaptive_simpson(np.sin, 1.0, 1.0, 1e-10) == 0.0


# -- rho


def test_rho_constant_fields():
    s = TranslateSearchConfig(h=0.5)
    one = rho_estimate(constant_field(1.0), [2.0, 4.0], s, Q)
    assert one.table.estimates == pytest.approx([1.0, 1.0], abs=1e-12)
    assert one.value == pytest.approx(1.0, abs=1e-12)
    zero = rho_estimate(constant_field(0.0), [2.0, 4.0], s, Q)
    assert zero.value == 0.0


def test_rho_identity_curve_bounded_by_total_energy():
    phi = curve_energy_field(identity_curve())
    rep = rho_estimate(phi, [5.0, 10.0, 40.0], TranslateSearchConfig(h=0.5, refine_passes=1, top_k=1), CURVE_Q)
    # total energy is pi, so every ball average is at most 1/R^2
    for row in rep.table.rows:
        assert row.estimate <= 1 / row.R**2 * (1 + 1e-6)
    assert rep.value <= 1e-3
    assert rep.table.trend == "non-increasing"


def test_rho_orbit_inequality_for_translates():
    # rho rows of a translate g = a.f stay below those of f when f's search box covers g's
    phi = curve_energy_field(identity_curve())
    g = translate(phi, (1.5, 0.0))
    sf = TranslateSearchConfig(box=BoxRegion((-3.0, -3.0), (3.0, 3.0)), h=0.5, refine_passes=1, top_k=1)
    sg = TranslateSearchConfig(box=BoxRegion((-1.0, -1.0), (1.0, 1.0)), h=0.5, refine_passes=1, top_k=1)
    rf = rho_estimate(phi, [2.0, 4.0], sf, CURVE_Q)
    rg = rho_estimate(g, [2.0, 4.0], sg, CURVE_Q)
    for a, b in zip(rg.table.rows, rf.table.rows):
        assert a.estimate <= b.estimate + a.error_bound + b.error_bound


# -- rho tilde


def test_rho_tilde_constant():
    rep = rho_tilde_estimate(constant_field(0.3), [1.0, 2.0], [4.0, 8.0], TranslateSearchConfig(h=0.5), Q)
    assert rep.table.estimates == pytest.approx([0.3] * 4, abs=1e-12)
    assert rep.table.flags["nonincreasing_in_R"] and rep.table.flags["nondecreasing_in_r"]


def test_rho_tilde_needs_pairs():
    with pytest.raises(ValueError):
        rho_tilde_estimate(constant_field(0.3), [5.0], [4.0], TranslateSearchConfig(h=0.5), Q)


@pytest.fixture(scope="module")
def lattice_pair():
    s = TranslateSearchConfig(h=0.25, refine_passes=1, top_k=1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rho = rho_estimate(disk_lattice(), [4.0, 8.0], s, LOOSE)
        tilde = rho_tilde_estimate(disk_lattice(), [1.0, 2.0], [4.0, 8.0], s, LOOSE)
    return rho, tilde


def test_rho_tilde_exactly_monotone(lattice_pair):
    _, tilde = lattice_pair
    by_r = {}
    for row in tilde.table.rows:
        by_r.setdefault(row.r, []).append(row)
    for rows in by_r.values():
        est = [r.estimate for r in sorted(rows, key=lambda x: x.R)]
        assert all(b <= a for a, b in zip(est, est[1:]))
    assert tilde.table.flags["nonincreasing_in_R"] and tilde.table.flags["nondecreasing_in_r"]


def test_rho_tilde_below_rho(lattice_pair):
    rho, tilde = lattice_pair
    rho_at = {row.R: row for row in rho.table.rows}
    for row in tilde.table.rows:
        ref = rho_at[row.R]
        assert row.estimate <= ref.estimate + ref.error_bound + row.error_bound


def test_rho_tilde_close_to_lattice_fraction(lattice_pair):
    _, tilde = lattice_pair
    assert abs(tilde.value - math.pi / 16) <= 0.03


def test_monotonicity_flags_detect_violation():
    rows = [TableRow(1.0, 4.0, 0.5, 0.01), TableRow(1.0, 8.0, 0.6, 0.01), TableRow(2.0, 8.0, 0.4, 0.01)]
    flags = monotonicity_flags(ConvergenceTable.from_rows(rows))
    assert not flags["nonincreasing_in_R"]
    assert flags["worst_excess_R"] == pytest.approx(0.08)
    assert not flags["nondecreasing_in_r"]
    ok = monotonicity_flags(ConvergenceTable.from_rows([TableRow(1.0, 4.0, 0.5, 0.06), TableRow(1.0, 8.0, 0.6, 0.06)]))
    assert ok["nonincreasing_in_R"]


# -- NSA


def test_T_at_one_is_zero():
    assert nsa_characteristic(curve_energy_field(identity_curve()), 1.0, CURVE_Q) == 0.0


def test_T_identity_closed_form():
    phi = curve_energy_field(identity_curve())
    for r in (2.0, math.e, 10.0, 40.0):
        assert nsa_characteristic(phi, r, CURVE_Q) == pytest.approx(T_identity(r), rel=1e-4)


def test_T_without_richardson_still_close():
    phi = curve_energy_field(identity_curve())
    prof = characteristic_profile(phi, [2.0, 10.0], QuadratureConfig(abs_tol=1e-7, mass_rel_tol=1e-5), richardson=False)
    assert prof.values == pytest.approx([T_identity(2.0), T_identity(10.0)], rel=1e-3)


def test_T_constant_curve_zero():
    phi = curve_energy_field(constant_curve(2.0))
    assert nsa_characteristic(phi, 5.0, CURVE_Q) == 0.0


def test_T_rejects_small_radius():
    with pytest.raises(ValueError):
        nsa_characteristic(constant_field(1.0), 0.5)


@settings(max_examples=10, deadline=None)
@given(
    coeffs=st.lists(st.floats(-0.5, 0.5), min_size=2, max_size=3),
    r=st.floats(1.0, 20.0),
)
def test_T_bounded_for_clipped_polynomials(coeffs, r):
    # the field clips |df|^2 at 1, so the bound holds for any polynomial
    f = RationalCurve(coeffs)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        T = nsa_characteristic(curve_energy_field(f), r, QuadratureConfig(abs_tol=1e-6, mass_rel_tol=1e-4, strict=False))
    assert 0.0 <= T <= math.pi * r * r / 2 + 1e-6


def test_nsa_rows_identity():
    phi = curve_energy_field(identity_curve())
    sched = [2.0, 5.0, 10.0, 20.0, 40.0]
    up, lo = rho_nsa_estimate(phi, sched, CURVE_Q)
    expected = [math.log((1 + r * r) / 2) / r**2 for r in sched]
    assert up.table.estimates == pytest.approx(expected, rel=1e-4)
    assert all(b < a for a, b in zip(expected[1:], expected[2:]))
    assert lo.value == pytest.approx(expected[-1], rel=1e-4) and lo.value < 0.01
    # limsup over the trailing half is the row at r = 10
    assert up.value == pytest.approx(expected[2], rel=1e-4)
    assert up.table.flags["window"] == [10.0, 40.0]


def test_nsa_constant_curve():
    up, lo = rho_nsa_estimate(curve_energy_field(constant_curve()), [1.0, 2.0, 4.0], CURVE_Q)
    assert up.value == 0.0 and lo.value == 0.0


# -- families and Ornstein-Weiss


def test_family_singleton_constant():
    rep = rho_family_estimate([constant_field(1.0)], [2.0, 4.0], Q)
    assert rep.value == pytest.approx(1.0, abs=1e-12)


def test_family_zero_member_is_ignored():
    phi = disk_lattice()
    q = QuadratureConfig(abs_tol=1e-3, max_levels=5, strict=False)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = rho_family_estimate([phi], [3.0], q)
        b = rho_family_estimate([constant_field(0.0), phi], [3.0], q)
    assert a.table.estimates == b.table.estimates


def test_region_surface():
    assert region_surface(Ball((0.0, 0.0), 2.0)) == pytest.approx(4 * math.pi)
    assert region_surface(BoxRegion((0.0, 0.0, 0.0), (1.0, 2.0, 3.0))) == pytest.approx(22.0)
    assert region_surface(BoxRegion((0.0,), (5.0,))) == 2.0


def test_ow_constant():
    s = TranslateSearchConfig(h=0.5)
    seq = [Ball((0.0, 0.0), 2.0), BoxRegion.cube(2, 3.0)]
    rep = ow_average(constant_field(0.7), seq, True, s, Q)
    assert rep.table.estimates == pytest.approx([0.7, 0.7], abs=1e-9)


def test_ow_nested_monotone():
    phi = stripe_field()
    q = QuadratureConfig(abs_tol=1e-3, max_levels=5, strict=False)
    boxes = [BoxRegion((0.0, 0.0), (n, n)) for n in (2.3, 3.7, 5.1)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = ow_average(phi, boxes, False, TranslateSearchConfig(h=0.5), q)
    masses = [row.estimate * b.volume for row, b in zip(rep.table.rows, boxes)]
    assert all(m1 <= m2 for m1, m2 in zip(masses, masses[1:]))


# -- orbit profiles


def test_orbit_constant_curve_profiles_zero():
    res = translate_orbit_experiment(constant_curve(), [0j, 3 + 1j], [1.0, 2.0], 4.0, CURVE_Q)
    assert all(np.all(p == 0) for p in res.profiles)
    assert res.best_inf == 0.0


def test_orbit_identity_profile_closed_form():
    res = translate_orbit_experiment(identity_curve(), [0j], [1.0, 2.0, 5.0], 10.0, CURVE_Q)
    t = res.t_grids[0]
    assert res.profiles[0] == pytest.approx(1 / (1 + t * t), rel=1e-5)
    assert np.all(np.diff(res.profiles[0]) < 0)
    assert res.best_inf == pytest.approx(1 / 101, rel=1e-5)
    assert res.report.functional == "orbit_profile"


def test_orbit_per_centre_radius():
    res = translate_orbit_experiment(identity_curve(), [0j, 2j], [1.0], [3.0, 5.0], CURVE_Q)
    assert res.t_grids[0][-1] == 3.0 and res.t_grids[1][-1] == 5.0
