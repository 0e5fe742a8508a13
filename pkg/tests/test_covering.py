import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from energydensity.covering import (
    BallFamily,
    random_family,
    read_family_csv,
    verify_cover,
    vitali_select,
    write_family_csv,
)
from energydensity.geometry import Ball, ball_volume


def fam(*balls):
    return BallFamily.from_balls([Ball(c, r) for c, r in balls])


def naive_greedy(centers, radii):
    # plain loops: largest radius first, ties to lower index
    order = sorted(range(len(radii)), key=lambda j: (-radii[j], j))
    kept = []
    for j in order:
        if all(math.dist(centers[j], centers[i]) > radii[i] + radii[j] + 1e-12 for i in kept):
            kept.append(j)
    return [j + 1 for j in kept]


def test_single_ball():
    assert vitali_select(fam(((0.0, 0.0), 1.0))) == [1]


def test_overlapping_pair_keeps_larger():
    f = fam(((0.0, 0.0), 2.0), ((1.0, 0.0), 1.0))
    sel = vitali_select(f)
    assert sel == [1]
    rep = verify_cover(f, sel)
    assert rep.ok and rep.witnesses == {1: 1, 2: 1}


def test_disjoint_pair_keeps_both():
    assert vitali_select(fam(((0.0, 0.0), 1.0), ((5.0, 0.0), 1.0))) == [1, 2]


def test_tie_broken_by_index():
    f = fam(((0.0, 0.0), 1.0), ((1.0, 0.0), 1.0), ((0.5, 0.0), 1.0))
    assert vitali_select(f) == [1]


def test_touching_balls_intersect():
    f = fam(((0.0,), 1.0), ((2.0,), 1.0))
    assert vitali_select(f) == [1]


def test_containment_violation_reported():
    f = fam(((0.0, 0.0), 2.5), ((1.0, 0.0), 1.0))
    rep = verify_cover(f, [2])
    assert not rep.ok
    assert [(v.kind, v.balls) for v in rep.violations] == [("containment", (1,))]


def test_boundary_case_is_certified():
    # |0 - 1| + 2 = 3 <= 3 * 1
    f = fam(((0.0, 0.0), 2.0), ((1.0, 0.0), 1.0))
    assert verify_cover(f, [2]).ok


def test_disjointness_violation_reported():
    f = fam(((0.0, 0.0), 2.0), ((1.0, 0.0), 1.0))
    rep = verify_cover(f, [1, 2])
    assert [(v.kind, v.balls) for v in rep.violations] == [("disjointness", (1, 2))]


def test_bad_index_reported():
    rep = verify_cover(fam(((0.0,), 1.0)), [2])
    assert any(v.kind == "index" for v in rep.violations)


def test_family_validation():
    with pytest.raises(ValueError):
        BallFamily(np.zeros((2, 2)), np.array([1.0, -1.0]))
    with pytest.raises(ValueError):
        BallFamily.from_balls([Ball((0.0,), 1.0), Ball((0.0, 0.0), 1.0)])
    with pytest.raises(ValueError):
        BallFamily.from_balls([])


def test_csv_roundtrip(tmp_path):
    f = random_family(np.random.default_rng(3), 3, 20)
    write_family_csv(tmp_path / "f.csv", f)
    g = read_family_csv(tmp_path / "f.csv")
    assert np.array_equal(f.centers, g.centers) and np.array_equal(f.radii, g.radii)


def test_csv_rejects_bad_indices(tmp_path):
    (tmp_path / "bad.csv").write_text("1,0,0,1\n3,1,1,1\n")
    with pytest.raises(ValueError):
        read_family_csv(tmp_path / "bad.csv")


def test_csv_headerless(tmp_path):
    (tmp_path / "f.csv").write_text("2,5,0,1\n1,0,0,2\n")
    f = read_family_csv(tmp_path / "f.csv")
    assert f.radii.tolist() == [2.0, 1.0]


@settings(max_examples=100, deadline=None)
@given(
    D=st.sampled_from([1, 2, 3]),
    K=st.integers(1, 60),
    seed=st.integers(0, 2**32 - 1),
)
def test_matches_naive_greedy_and_verifies(D, K, seed):
    f = random_family(np.random.default_rng(seed), D, K)
    sel = vitali_select(f)
    assert sel == naive_greedy(f.centers.tolist(), f.radii.tolist())
    assert verify_cover(f, sel).ok
    assert vitali_select(f) == sel


@settings(max_examples=50, deadline=None)
@given(
    D=st.sampled_from([1, 2]),
    K=st.integers(2, 30),
    seed=st.integers(0, 2**32 - 1),
)
def test_integer_ties(D, K, seed):
    rng = np.random.default_rng(seed)
    f = BallFamily(rng.integers(0, 10, size=(K, D)).astype(float), rng.integers(1, 3, size=K).astype(float))
    sel = vitali_select(f)
    assert sel == naive_greedy(f.centers.tolist(), f.radii.tolist())
    assert verify_cover(f, sel).ok


def test_selected_volume_covers_union_fraction():
    rng = np.random.default_rng(7)
    for _ in range(100):
        D = int(rng.integers(1, 4))
        f = random_family(rng, D, int(rng.integers(1, 200)))
        sel = np.array(vitali_select(f)) - 1
        selected_vol = sum(ball_volume(D, r) for r in f.radii[sel])
        lo = (f.centers - f.radii[:, None]).min(axis=0)
        hi = (f.centers + f.radii[:, None]).max(axis=0)
        n = 20_000
        pts = rng.uniform(lo, hi, size=(n, D))
        inside = np.zeros(n, dtype=bool)
        for c, r in zip(f.centers, f.radii):
            inside |= np.sum((pts - c) ** 2, axis=1) <= r * r
        box = float(np.prod(hi - lo))
        p = inside.mean()
        union = p * box
        slack = 5 * math.sqrt(p * (1 - p) / n) * box
        assert selected_vol >= 3.0**-D * (union - slack)
