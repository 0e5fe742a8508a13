import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from energydensity.field import (
    QuadratureConfig,
    QuadratureError,
    TranslateSearchConfig,
    ball_indicator,
    ball_mass,
    box_mass,
    constant_field,
    disk_lattice,
    function_field,
    grid_field,
    half_space_indicator,
    lipschitz_bound,
    load_grid_csv,
    mass_profile,
    search_grid,
    stripe_field,
    sup_translate_ball_mass,
    translate,
    write_grid_csv,
)
from energydensity.field import _shell_edges
from energydensity.geometry import BoxRegion, ball_volume

Q = QuadratureConfig(abs_tol=1e-6)
LOOSE = QuadratureConfig(abs_tol=1e-4, rel_tol=2e-3, max_levels=5, strict=False)


def test_translate_constant_is_identity():
    phi = constant_field(0.3)
    assert translate(phi, (1.0, -2.0)) is phi


def test_translate_inverse_pointwise():
    phi = disk_lattice()
    back = translate(translate(phi, (0.37, -1.2)), (-0.37, 1.2))
    pts = np.random.default_rng(0).uniform(-3, 3, size=(500, 2))
    # offsets cancel exactly up to float rounding, so compare away from disk edges
    frac = pts - np.floor(pts + 0.5)
    away = np.abs(np.hypot(frac[:, 0], frac[:, 1]) - 0.25) > 1e-9
    assert np.array_equal(back(pts)[away], phi(pts)[away])


def test_translate_moves_mass_to_minus_a():
    phi = translate(ball_indicator((0.0, 0.0), 1.0), (3.0, 0.0))
    assert phi([[-3.0, 0.0]])[0] == 1.0
    assert phi([[0.0, 0.0]])[0] == 0.0


def test_translate_dimension_mismatch():
    with pytest.raises(ValueError):
        translate(disk_lattice(), (1.0, 2.0, 3.0))


def test_ball_mass_full_disk():
    assert ball_mass(constant_field(1.0), (0.0, 0.0), 2.0, Q) == pytest.approx(4 * math.pi, abs=1e-9)


def test_ball_mass_half_plane():
    assert ball_mass(half_space_indicator(), (0.0, 0.0), 1.0, Q) == pytest.approx(math.pi / 2, abs=1e-6)


def test_ball_mass_smooth_radial():
    phi = function_field(lambda p: 1.0 / (1.0 + np.sum(p * p, axis=1)) ** 2)
    # 2 pi int_0^t s / (1 + s^2)^2 ds = pi t^2 / (1 + t^2)
    q = QuadratureConfig(abs_tol=1e-5)
    for t in (0.5, 1.0, 3.0):
        assert ball_mass(phi, (0.0, 0.0), t, q) == pytest.approx(math.pi * t * t / (1 + t * t), abs=1e-4)
    assert ball_mass(phi, (0.0, 0.0), 1.0, Q) == pytest.approx(math.pi / 2, abs=1e-5)


@pytest.mark.parametrize("D", [1, 3])
def test_ball_mass_other_dimensions(D):
    phi = constant_field(1.0, D)
    assert ball_mass(phi, (0.0,) * D, 1.5, Q) == pytest.approx(ball_volume(D, 1.5), rel=1e-9)


def test_ball_mass_3d_half_space():
    phi = half_space_indicator(3)
    q = QuadratureConfig(abs_tol=1e-3)
    assert ball_mass(phi, (0.0, 0.0, 0.0), 1.0, q) == pytest.approx(2 * math.pi / 3, abs=2e-3)


def test_ball_mass_rejects_bad_radius():
    with pytest.raises(ValueError):
        ball_mass(constant_field(1.0), (0.0, 0.0), 0.0, Q)


def test_nonconvergence_is_reported():
    tight = QuadratureConfig(abs_tol=1e-14, max_levels=1)
    with pytest.raises(QuadratureError):
        ball_mass(disk_lattice(), (0.1, 0.2), 3.0, tight)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        prof = mass_profile(disk_lattice(), (0.1, 0.2), [3.0], QuadratureConfig(abs_tol=1e-14, max_levels=1, strict=False))
    assert not prof.converged


def test_quadrature_config_validation():
    with pytest.raises(ValueError):
        QuadratureConfig(n_radial=3)
    with pytest.raises(ValueError):
        QuadratureConfig(abs_tol=0.0)
    with pytest.raises(ValueError):
        TranslateSearchConfig(h=0.0)


def test_box_mass_lattice_fraction():
    # odd cell counts keep the rule from aliasing with the unit period
    m = box_mass(disk_lattice(), BoxRegion((0.0, 0.0), (4.0, 4.0)), QuadratureConfig(abs_tol=1e-3, max_levels=6, strict=False))
    assert m / 16 == pytest.approx(math.pi / 16, abs=2e-3)


def test_sup_translate_constant():
    s = TranslateSearchConfig(h=0.5)
    res = sup_translate_ball_mass(constant_field(0.4), 2.0, s, Q)
    assert res.value == pytest.approx(0.4 * 4 * math.pi, abs=1e-9)
    assert res.error_bound == pytest.approx(lipschitz_bound(2, 2.0, 0.5, 0.4) + res.quadrature_error)
    assert lipschitz_bound(2, 2.0, 0.5, 1.0) == pytest.approx(2 * 2 * math.pi * 2.0 * 0.5)


def test_sup_translate_finds_ball():
    s = TranslateSearchConfig(box=BoxRegion((-1.0, -1.0), (1.0, 1.0)), h=0.25)
    res = sup_translate_ball_mass(ball_indicator((0.0, 0.0), 1.0), 1.0, s, QuadratureConfig(abs_tol=1e-3))
    assert res.value == pytest.approx(math.pi, abs=1e-3)
    assert np.hypot(*res.argmax) < 0.1


def test_sup_translate_lattice_large_ball():
    s = TranslateSearchConfig(h=0.25, refine_passes=1, top_k=1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = sup_translate_ball_mass(disk_lattice(), 20.0, s, LOOSE)
    assert abs(res.value / (math.pi * 400) - math.pi / 16) <= 0.02


def test_search_grid_covers_box():
    box = BoxRegion((0.0, 0.0), (1.0, 2.0))
    g = search_grid(box, 0.3)
    assert g.min(axis=0).tolist() > [0.0, 0.0]
    assert np.all(g < [1.0, 2.0])
    # every box point lies within h of a grid node along each axis
    assert len(np.unique(g[:, 0])) == 4 and len(np.unique(g[:, 1])) == 7


def test_grid_field_roundtrip(tmp_path):
    vals = np.array([[0.0, 0.5, 1.0], [0.25, 0.75, 0.125]])
    write_grid_csv(tmp_path / "g.csv", vals, -1.0, 0.0, 0.5, 2.0)
    phi = load_grid_csv(tmp_path / "g.csv")
    ref = grid_field(vals, -1.0, 0.0, 0.5, 2.0)
    pts = np.random.default_rng(1).uniform(-2, 5, size=(200, 2))
    assert np.array_equal(phi(pts), ref(pts))
    assert phi([[-0.25, 1.0]])[0] == 0.5
    assert phi([[0.1, 3.0]])[0] == 0.125


def test_grid_field_rejects_out_of_range():
    with pytest.raises(ValueError):
        grid_field(np.array([[1.5]]), 0, 0, 1, 1)


def test_parallel_workers_bit_identical():
    q = QuadratureConfig(abs_tol=1e-3)
    a = sup_translate_ball_mass(disk_lattice(), 2.0, TranslateSearchConfig(h=0.5, workers=1), q)
    b = sup_translate_ball_mass(disk_lattice(), 2.0, TranslateSearchConfig(h=0.5, workers=3), q)
    assert a == b


FIELDS = {
    "lattice": disk_lattice(),
    "stripe": stripe_field(),
    "smooth": function_field(lambda p: 0.5 + 0.5 * np.sin(p[:, 0]) * np.cos(0.7 * p[:, 1])),
}


PROP_Q = QuadratureConfig(abs_tol=1e-4, rel_tol=1e-4, max_levels=5, strict=False)


def _bound(prof):
    return np.maximum(PROP_Q.tolerance(np.pi * prof.radii**2, prof.masses), prof.error_estimate)


@settings(max_examples=20, deadline=None)
@given(
    name=st.sampled_from(sorted(FIELDS)),
    a=st.tuples(st.floats(-3, 3), st.floats(-3, 3)),
    b=st.tuples(st.floats(-3, 3), st.floats(-3, 3)),
    t=st.floats(0.5, 3.0),
)
def test_translation_equivariance(name, a, b, t):
    phi = FIELDS[name]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lhs = mass_profile(translate(phi, a), b, [t], PROP_Q)
        rhs = mass_profile(phi, np.add(a, b), [t], PROP_Q)
    assert abs(lhs.masses[0] - rhs.masses[0]) <= 2 * max(_bound(lhs)[0], _bound(rhs)[0])


@settings(max_examples=20, deadline=None)
@given(
    name=st.sampled_from(sorted(FIELDS)),
    a=st.tuples(st.floats(-3, 3), st.floats(-3, 3)),
    t1=st.floats(0.2, 3.0),
    t2=st.floats(0.2, 3.0),
)
def test_monotone_and_bounded_in_radius(name, a, t1, t2):
    phi = FIELDS[name]
    lo, hi = sorted((t1, t2))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        prof = mass_profile(phi, a, [lo, hi], PROP_Q)
    m1, m2 = prof.masses
    tol = _bound(prof).max()
    assert m1 <= m2 + tol
    assert 0.0 <= m2 <= ball_volume(2, hi) + tol


@settings(max_examples=10, deadline=None)
@given(t=st.floats(0.5, 2.0))
def test_sup_dominates_origin(t):
    phi = FIELDS["smooth"]
    q = QuadratureConfig(abs_tol=1e-5)
    res = sup_translate_ball_mass(phi, t, TranslateSearchConfig(h=0.5, refine_passes=1), q)
    assert res.value >= ball_mass(phi, (0.0, 0.0), t, q) - q.abs_tol



def test_shell_edges_hit_requested_radii():
    # lo + (hi - lo) * n / n rounds above hi for this pair at 77 shells
    radii = np.array([1.125, 2.810541915132711])
    edges, idx = _shell_edges(radii, 0.021957358711974306)
    assert idx.max() < edges.size
    assert np.array_equal(edges[idx], radii)
