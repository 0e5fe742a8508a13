"""Density functionals over finite radius schedules.

Every limit is reported as a :class:`ConvergenceTable` whose last row is the
headline value. Functionals:

* ``rho``: ``sup_a mu(B_R(a)) / |B_R|``
* ``rho_tilde``: ``sup_a inf_{r <= t <= R} mu(B_t(a)) / |B_t|``
* ``T(r)``: ``int_1^r mu(B_t(0)) dt / t`` and the NSA densities ``2 T(r) / (pi r^2)``
* family and Ornstein-Weiss averages, and centred orbit profiles.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .curves import MeromorphicCurve, curve_energy_field
from .field import (
    CenterEvaluator,
    DensityField,
    QuadratureConfig,
    QuadratureError,
    TranslateSearchConfig,
    PolarGrid,
    _box_cells,
    _box_mass_at,
    _box_mass_detail,
    _level_resolution,
    _node_count,
    calibrated_evaluator,
    local_refine,
    mass_profile,
    search_grid,
    sup_translate_profile,
)
from .geometry import Ball, BoxRegion, Region, ball_volume, sphere_area, unit_ball_volume
from .reports import ConvergenceTable, DensityReport, RadiusSchedule, TableRow

log = logging.getLogger(__name__)

PER_OCTAVE = 16


class TGridWarning(UserWarning):
    """The inner infimum moved by more than tolerance under t-grid refinement."""


def _schedule(s: Union[RadiusSchedule, Sequence[float]], role: str) -> RadiusSchedule:
    if isinstance(s, RadiusSchedule):
        return s
    return RadiusSchedule(tuple(s), role)


def geometric_t_grid(anchors: Sequence[float], per_octave: int = PER_OCTAVE) -> np.ndarray:
    """Geometric grid through every anchor with at least ``per_octave`` points
    per doubling between consecutive anchors."""
    a = np.unique(np.asarray(anchors, dtype=float))
    if a.size == 0 or a[0] <= 0:
        raise ValueError("anchors must be positive")
    pieces = [a[:1]]
    for lo, hi in zip(a[:-1], a[1:]):
        n = max(1, int(math.ceil(per_octave * math.log2(hi / lo) - 1e-9)))
        pieces.append(lo * (hi / lo) ** (np.arange(1, n + 1) / n))
    grid = np.concatenate(pieces)
    grid[np.searchsorted(grid, a[-1])] = a[-1]
    return grid


def _config_echo(**kw) -> dict:
    out = {}
    for k, v in kw.items():
        if isinstance(v, (QuadratureConfig, TranslateSearchConfig)):
            d = dict(v.__dict__)
            if isinstance(v, TranslateSearchConfig) and v.box is not None:
                d["box"] = {"lo": list(v.box.lo), "hi": list(v.box.hi)}
            out[k] = d
        elif isinstance(v, RadiusSchedule):
            out[k] = {"radii": list(v.radii), "role": v.role}
        else:
            out[k] = v
    return out


# ---------------------------------------------------------------------------
# rho


def rho_estimate(
    phi: DensityField,
    R_sched: Union[RadiusSchedule, Sequence[float]],
    s: TranslateSearchConfig = TranslateSearchConfig(),
    q: QuadratureConfig = QuadratureConfig(),
) -> DensityReport:
    """Rows ``sup_a mu(B_R(a)) / |B_R|`` with the search error bound."""
    R_sched = _schedule(R_sched, "outer-R")
    res = sup_translate_profile(phi, R_sched.radii, s, q)
    rows = []
    for R, r in zip(R_sched, res):
        vol = ball_volume(phi.dimension, R)
        rows.append(TableRow(None, R, r.value / vol, r.error_bound / vol, ""))
    table = ConvergenceTable.from_rows(rows, flags={"argmax": [list(r.argmax) for r in res]})
    return DensityReport("rho", table, _config_echo(field=phi.kind, R_sched=R_sched, search=s, quadrature=q))


# ---------------------------------------------------------------------------
# rho tilde


@dataclass
class _PairState:
    r: float
    R: float
    lo: int
    hi: int


def _inner_inf(ratios: np.ndarray, lo: int, hi: int) -> np.ndarray:
    return ratios[:, lo : hi + 1].min(axis=1)


def monotonicity_flags(table: ConvergenceTable) -> dict:
    """Check non-increase along R at fixed r and non-decrease along r at fixed R,
    each up to the sum of the two rows' error bounds."""
    by_r: dict[float, list[TableRow]] = {}
    by_R: dict[float, list[TableRow]] = {}
    for row in table.rows:
        by_r.setdefault(row.r, []).append(row)
        by_R.setdefault(row.R, []).append(row)
    worst_R = 0.0
    worst_r = 0.0
    for rows in by_r.values():
        rows = sorted(rows, key=lambda x: x.R)
        for a, b in zip(rows, rows[1:]):
            worst_R = max(worst_R, (b.estimate - a.estimate) - (a.error_bound + b.error_bound))
    for rows in by_R.values():
        rows = sorted(rows, key=lambda x: x.r)
        for a, b in zip(rows, rows[1:]):
            worst_r = max(worst_r, (a.estimate - b.estimate) - (a.error_bound + b.error_bound))
    return {
        "nonincreasing_in_R": worst_R <= 0.0,
        "nondecreasing_in_r": worst_r <= 0.0,
        "worst_excess_R": worst_R,
        "worst_excess_r": worst_r,
    }


def rho_tilde_estimate(
    phi: DensityField,
    r_sched: Union[RadiusSchedule, Sequence[float]],
    R_sched: Union[RadiusSchedule, Sequence[float]],
    s: TranslateSearchConfig = TranslateSearchConfig(),
    q: QuadratureConfig = QuadratureConfig(),
    per_octave: int = PER_OCTAVE,
) -> DensityReport:
    """Table of ``sup_a inf_{t in [r, R]} mu(B_t(a)) / |B_t|`` over (r, R) pairs.

    All pairs share one geometric t-grid and one pool of evaluated centres, so
    the finite-grid table is exactly monotone in both radii. The reported
    error bound adds the Lipschitz search bound (at ``t = r``, the worst
    radius for ratios) to the quadrature estimate. At each maximiser the
    infimum is recomputed on a twice finer t-grid; a shift above tolerance
    flags the row and emits :class:`TGridWarning`.
    """
    r_sched = _schedule(r_sched, "inner-r")
    R_sched = _schedule(R_sched, "outer-R")
    D = phi.dimension
    pairs_rR = [(r, R) for r in r_sched for R in R_sched if r < R]
    if not pairs_rR:
        raise ValueError("need at least one pair with r < R")
    tgrid = geometric_t_grid(list(r_sched) + list(R_sched), per_octave)
    vols = np.array([ball_volume(D, t) for t in tgrid])
    pairs = [
        _PairState(r, R, int(np.searchsorted(tgrid, r)), int(np.searchsorted(tgrid, R))) for r, R in pairs_rR
    ]
    box = s.resolve_box(phi)
    grid = search_grid(box, s.h)
    probe = grid[len(grid) // 2]
    evaluator, quad_err = calibrated_evaluator(phi, tgrid, probe, q, s.workers)
    quad_rel = quad_err / vols

    def scores(centers: np.ndarray, pair: _PairState) -> np.ndarray:
        return _inner_inf(evaluator(centers) / vols, pair.lo, pair.hi)

    pool = [grid]
    base = evaluator(grid) / vols
    for pair in pairs:
        top = np.argsort(-_inner_inf(base, pair.lo, pair.hi), kind="stable")[: s.top_k]
        for i in top:
            pts, _ = local_refine(lambda c: scores(c, pair), grid[i], s.h, s.refine_passes)
            pool.append(pts)
    centers = np.unique(np.concatenate(pool), axis=0)
    ratios = evaluator(centers) / vols

    # geometric midpoints: the coarse grid is a subset, so both infima below
    # come from the same quadrature nodes
    fine_grid = np.sort(np.concatenate([tgrid, np.sqrt(tgrid[:-1] * tgrid[1:])]))
    coarse = np.isin(fine_grid, tgrid)
    fine_vols = np.array([ball_volume(D, t) for t in fine_grid])
    fine_eval = CenterEvaluator(phi, fine_grid, evaluator.dr, evaluator.n_ang)

    rows = []
    tgrid_shift = {}
    argmax = {}
    for pair in pairs:
        inf = _inner_inf(ratios, pair.lo, pair.hi)
        k = int(np.argmax(inf))
        value = float(inf[k])
        lip = 2.0 * D * s.h * phi.sup_value / pair.r
        err = lip + float(quad_rel[pair.lo : pair.hi + 1].max())
        sel = (fine_grid >= pair.r * (1 - 1e-12)) & (fine_grid <= pair.R * (1 + 1e-12))
        fine_ratio = fine_eval(centers[k])[0] / fine_vols
        shift = float(fine_ratio[sel & coarse].min() - fine_ratio[sel].min())
        tol = q.tolerance(ball_volume(D, pair.r)) / ball_volume(D, pair.r)
        flags = ""
        if shift > tol:
            flags = "t-grid"
            warnings.warn(
                f"t-grid infimum for (r={pair.r:g}, R={pair.R:g}) drops by {shift:.3g} on refinement",
                TGridWarning,
                stacklevel=2,
            )
        tgrid_shift[f"{pair.r:g},{pair.R:g}"] = shift
        argmax[f"{pair.r:g},{pair.R:g}"] = [float(v) for v in centers[k]]
        rows.append(TableRow(pair.r, pair.R, value, err + max(shift, 0.0), flags))
    table = ConvergenceTable.from_rows(rows)
    flags = monotonicity_flags(table)
    flags["t_grid_points"] = int(tgrid.size)
    flags["t_grid_shift"] = tgrid_shift
    flags["argmax"] = argmax
    table = ConvergenceTable(table.rows, table.extrapolated, table.trend, flags)
    echo = _config_echo(field=phi.kind, r_sched=r_sched, R_sched=R_sched, search=s, quadrature=q, per_octave=per_octave)
    return DensityReport("rho_tilde", table, echo)


# ---------------------------------------------------------------------------
# Nevanlinna-Shimizu-Ahlfors characteristic


def adaptive_simpson(fn, a: float, b: float, tol: float, max_depth: int = 40) -> float:
    """Vectorised adaptive Simpson rule on ``[a, b]``.

    Intervals are bisected until the two-half Simpson estimate agrees with
    the whole-interval one within ``15 * tol * width / (b - a)``.
    """
    if b <= a:
        return 0.0
    lo = np.array([a])
    hi = np.array([b])
    total = 0.0
    span = b - a
    for depth in range(max_depth + 1):
        mid = 0.5 * (lo + hi)
        q1 = 0.5 * (lo + mid)
        q3 = 0.5 * (mid + hi)
        f_lo, f_mid, f_hi, f_q1, f_q3 = (fn(x) for x in (lo, mid, hi, q1, q3))
        w = hi - lo
        whole = w / 6 * (f_lo + 4 * f_mid + f_hi)
        halves = w / 12 * (f_lo + 4 * f_q1 + 2 * f_mid + 4 * f_q3 + f_hi)
        done = np.abs(halves - whole) <= 15 * tol * w / span
        if depth == max_depth:
            done[:] = True
        total += float(np.sum(halves[done] + (halves[done] - whole[done]) / 15))
        if done.all():
            break
        lo = np.concatenate([lo[~done], mid[~done]])
        hi = np.concatenate([mid[~done], hi[~done]])
    return total


def _interpolated_mass(edges: np.ndarray, cum: np.ndarray, D: int):
    """``t -> mu(B_t)`` assuming constant density within each shell."""
    p = edges**D

    def m(t):
        t = np.asarray(t, dtype=float)
        i = np.clip(np.searchsorted(edges, t, side="right") - 1, 0, len(edges) - 2)
        frac = (t**D - p[i]) / (p[i + 1] - p[i])
        return cum[i] + (cum[i + 1] - cum[i]) * frac

    return m


def _characteristic_at_level(phi: DensityField, radii: np.ndarray, dr: float, n_ang: int, tol: np.ndarray) -> np.ndarray:
    grid = PolarGrid(phi.dimension, np.concatenate([[1.0], radii]), dr, n_ang)
    cum = grid.cumulative(phi, np.zeros(phi.dimension))
    vols = np.array([ball_volume(phi.dimension, e) if e > 0 else 0.0 for e in grid.edges])
    cum = np.clip(cum, 0.0, vols)
    m = _interpolated_mass(grid.edges, cum, phi.dimension)
    integrand = lambda t: m(t) / t
    out = np.empty(radii.size)
    prev_r, acc = 1.0, 0.0
    for j in np.argsort(radii):
        acc += adaptive_simpson(integrand, prev_r, radii[j], 1e-3 * float(tol[j]))
        prev_r = radii[j]
        out[j] = acc
    return out


@dataclass(frozen=True)
class CharacteristicProfile:
    radii: np.ndarray
    values: np.ndarray
    error_estimate: np.ndarray
    level: int
    converged: bool


def characteristic_profile(
    phi: DensityField, radii: Sequence[float], q: QuadratureConfig = QuadratureConfig(), richardson: bool = True
) -> CharacteristicProfile:
    """``T(r)`` at several radii from one centred polar grid per level.

    Inner masses come from the cumulative shell masses, interpolated in
    ``t^D`` inside a shell; the outer integral is adaptive Simpson. Levels
    are refined until successive values agree within
    ``q.tolerance(cap, T)`` where ``cap = |B_1| (r^D - 1) / D`` is the largest
    value a density bounded by 1 can produce. With ``richardson`` the midpoint results of
    two levels are combined as ``T_k + (T_k - T_{k-1}) / 3``, which removes
    the leading second-order quadrature error of smooth integrands.
    """
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    if np.any(radii < 1):
        raise ValueError("T(r) is defined for r >= 1")
    out = np.zeros(radii.size)
    active = radii > 1
    if not np.any(active):
        return CharacteristicProfile(radii, out, np.zeros(radii.size), 0, True)
    rr = radii[active]
    R = float(rr.max())
    D = phi.dimension
    # largest T possible for a density bounded by 1
    cap = unit_ball_volume(D) * (rr**D - 1.0) / D
    history: list[np.ndarray] = []
    estimates: list[np.ndarray] = []
    diff = np.full(rr.size, np.inf)
    simpson_tol = np.full(rr.size, q.abs_tol)
    level = 0
    for level in range(q.max_levels + 1):
        dr, n_ang = _level_resolution(q, R, level)
        if level > 0 and _node_count(D, np.concatenate([[1.0], rr]), dr, n_ang) > q.max_points:
            level -= 1
            break
        history.append(_characteristic_at_level(phi, rr, dr, n_ang, simpson_tol))
        if richardson:
            if len(history) < 2:
                continue
            est = history[-1] + (history[-1] - history[-2]) / 3.0
        else:
            est = history[-1]
        simpson_tol = q.tolerance(cap, est)
        if estimates:
            diff = np.abs(est - estimates[-1])
            if np.all(diff <= q.tolerance(cap, est)):
                estimates.append(est)
                break
        estimates.append(est)
    else:
        level = q.max_levels
    if not estimates:
        estimates.append(history[-1])
    converged = bool(np.all(diff <= q.tolerance(cap, estimates[-1])))
    est = estimates[-1]
    out[active] = np.maximum(est, 0.0)
    err = np.zeros(radii.size)
    err[active] = diff
    if converged:
        return CharacteristicProfile(radii, out, err, level, True)
    msg = (
        f"characteristic quadrature did not converge after level {level}: "
        f"max successive difference {float(np.max(diff)):.3g}"
    )
    if q.strict:
        raise QuadratureError(msg, float(est.max()), float(np.max(diff)))
    log.warning(msg)
    return CharacteristicProfile(radii, out, err, level, False)


def nsa_characteristic(phi: DensityField, r: float, q: QuadratureConfig = QuadratureConfig(), richardson: bool = True) -> float:
    """``T(r) = int_1^r mu(B_t(0)) dt / t`` for the energy field of a curve."""
    if r < 1:
        raise ValueError("T(r) is defined for r >= 1")
    return float(characteristic_profile(phi, [r], q, richardson).values[0])


def rho_nsa_estimate(
    phi: DensityField,
    r_sched: Union[RadiusSchedule, Sequence[float]],
    q: QuadratureConfig = QuadratureConfig(),
    richardson: bool = True,
) -> tuple[DensityReport, DensityReport]:
    """Rows ``2 T(r) / (pi r^2)``; the upper (lower) value is the max (min)
    over the trailing half of the schedule. Returns (upper, lower)."""
    r_sched = _schedule(r_sched, "nsa-r")
    prof = characteristic_profile(phi, r_sched.radii, q, richardson)
    rows = []
    for r, T, e in zip(r_sched, prof.values, prof.error_estimate):
        flags = "" if prof.converged else "unconverged"
        rows.append(TableRow(None, r, float(2 * T / (math.pi * r * r)), float(2 * e / (math.pi * r * r)), flags))
    tail = rows[len(rows) // 2 :]
    upper = max(tail, key=lambda x: x.estimate)
    lower = min(tail, key=lambda x: x.estimate)
    flags = {"window": [tail[0].R, tail[-1].R], "T": [float(v) for v in prof.values], "level": prof.level}
    echo = _config_echo(field=phi.kind, r_sched=r_sched, quadrature=q, richardson=richardson)
    up = DensityReport("rho_nsa_upper", ConvergenceTable.from_rows(rows, upper.estimate, dict(flags, at=upper.R)), echo)
    lo = DensityReport("rho_nsa_lower", ConvergenceTable.from_rows(rows, lower.estimate, dict(flags, at=lower.R)), echo)
    return up, lo


# ---------------------------------------------------------------------------
# families, Ornstein-Weiss averages, orbits


def rho_family_estimate(
    family: Sequence[DensityField],
    R_sched: Union[RadiusSchedule, Sequence[float]],
    q: QuadratureConfig = QuadratureConfig(),
) -> DensityReport:
    """Rows ``max_member mu(B_R(0)) / |B_R|``."""
    if not family:
        raise ValueError("family must be nonempty")
    R_sched = _schedule(R_sched, "outer-R")
    D = family[0].dimension
    if any(m.dimension != D for m in family):
        raise ValueError("family members must share a dimension")
    profiles = [mass_profile(m, np.zeros(D), R_sched.radii, q) for m in family]
    masses = np.array([p.masses for p in profiles])
    errs = np.array([p.error_estimate for p in profiles])
    rows = []
    best_members = []
    for j, R in enumerate(R_sched):
        k = int(np.argmax(masses[:, j]))
        vol = ball_volume(D, R)
        best_members.append(k)
        rows.append(TableRow(None, R, float(masses[k, j] / vol), float(errs[:, j].max() / vol), ""))
    table = ConvergenceTable.from_rows(rows, flags={"best_member": best_members, "members": len(family)})
    return DensityReport("rho_family", table, _config_echo(R_sched=R_sched, quadrature=q, members=len(family)))


def region_surface(region: Region) -> float:
    if isinstance(region, Ball):
        return sphere_area(region.dimension, region.radius)
    sides = region.sides
    if region.dimension == 1:
        return 2.0
    total = 0.0
    for i in range(region.dimension):
        total += 2.0 * float(np.prod([s for k, s in enumerate(sides) if k != i]))
    return total


def _box_translate_masses(phi: DensityField, box: BoxRegion, shifts: np.ndarray, q: QuadratureConfig):
    _, err, level = _box_mass_detail(phi, box.translated(shifts[0]), q)
    n = _box_cells(box, q, level)
    vals = np.array([_box_mass_at(phi, box.translated(a), n) for a in shifts])
    return np.clip(vals, 0.0, box.volume), err


def ow_average(
    phi: DensityField,
    sequence: Sequence[Region],
    sup_translate: bool = True,
    s: TranslateSearchConfig = TranslateSearchConfig(),
    q: QuadratureConfig = QuadratureConfig(),
) -> DensityReport:
    """Rows ``h(Omega_n) / |Omega_n|`` with ``h(Omega) = sup_a int_{a + Omega} phi``
    over the translate grid (or ``h(Omega) = int_Omega phi`` without
    ``sup_translate``)."""
    if not sequence:
        raise ValueError("sequence must be nonempty")
    rows = []
    box = s.resolve_box(phi)
    shifts = search_grid(box, s.h) if sup_translate else np.zeros((1, phi.dimension))
    balls = [(i, reg) for i, reg in enumerate(sequence) if isinstance(reg, Ball)]
    results: dict[int, tuple[float, float]] = {}
    if balls:
        for i, reg in balls:
            centre = np.asarray(reg.center)
            if sup_translate:
                s_loc = TranslateSearchConfig(box.translated(centre), s.h, s.refine_passes, s.top_k, s.workers)
                res = sup_translate_profile(phi, [reg.radius], s_loc, q)[0]
                results[i] = (res.value, res.error_bound)
            else:
                prof = mass_profile(phi, centre, [reg.radius], q)
                results[i] = (float(prof.masses[0]), float(prof.error_estimate[0]))
    for i, reg in enumerate(sequence):
        if isinstance(reg, BoxRegion):
            vals, qerr = _box_translate_masses(phi, reg, shifts, q)
            lip = 2.0 * region_surface(reg) * s.h * phi.sup_value if sup_translate else 0.0
            results[i] = (float(vals.max()), qerr + lip)
    for i, reg in enumerate(sequence):
        value, err = results[i]
        vol = reg.volume
        rows.append(TableRow(None, _region_size(reg), value / vol, err / vol, reg.label()))
    table = ConvergenceTable.from_rows(rows, flags={"sup_translate": sup_translate})
    return DensityReport("ow_average", table, _config_echo(field=phi.kind, search=s, quadrature=q, regions=len(sequence)))


def _region_size(reg: Region) -> float:
    if isinstance(reg, Ball):
        return reg.radius
    return float(max(reg.sides))


@dataclass(frozen=True)
class OrbitResult:
    centers: tuple[complex, ...]
    t_grids: tuple[np.ndarray, ...]
    profiles: tuple[np.ndarray, ...]
    infima: tuple[float, ...]
    best_index: int
    best_inf: float
    rho: Optional[DensityReport]
    report: DensityReport
    quadrature_error: tuple[float, ...] = field(default_factory=tuple)


def translate_orbit_experiment(
    f: Union[MeromorphicCurve, DensityField],
    centers: Sequence[complex],
    r_sched: Union[RadiusSchedule, Sequence[float]],
    R: Union[float, Sequence[float]],
    q: QuadratureConfig = QuadratureConfig(),
    rho_R_sched: Optional[Sequence[float]] = None,
    s: Optional[TranslateSearchConfig] = None,
    per_octave: int = PER_OCTAVE,
) -> OrbitResult:
    """Centred average profiles ``t -> mu(B_t(a)) / (pi t^2)`` of the curve energy.

    ``R`` may be one radius or one per centre. For each centre the profile is
    evaluated on the schedule radii in ``[min r, R]`` together with a
    geometric grid; the centre with the largest infimum over that range is
    reported. When ``rho_R_sched`` and ``s`` are given, ``rho_estimate`` of
    the same field is attached for comparison.
    """
    phi = f if isinstance(f, DensityField) else curve_energy_field(f)
    r_sched = _schedule(r_sched, "inner-r")
    if not centers:
        raise ValueError("need at least one centre")
    Rs = np.broadcast_to(np.asarray(R, dtype=float), (len(centers),))
    r0 = r_sched.radii[0]
    grids, profiles, infima, qerrs, rows = [], [], [], [], []
    for a, Ra in zip(centers, Rs):
        if not Ra > r0:
            raise ValueError("R must exceed the smallest schedule radius")
        anchors = [r for r in r_sched if r <= Ra] + [float(Ra)]
        tg = geometric_t_grid(anchors, per_octave)
        centre = np.array([complex(a).real, complex(a).imag])
        prof = mass_profile(phi, centre, tg, q)
        vols = np.array([ball_volume(2, t) for t in tg])
        ratio = prof.masses / vols
        grids.append(tg)
        profiles.append(ratio)
        infima.append(float(ratio.min()))
        qerrs.append(float((prof.error_estimate / vols).max()))
        flag = "" if prof.converged else "unconverged"
        for t in r_sched:
            if t <= Ra:
                j = int(np.searchsorted(tg, t))
                rows.append(TableRow(float(abs(complex(a))), float(t), float(ratio[j]), float(prof.error_estimate[j] / vols[j]), flag))
    best = int(np.argmax(infima))
    rho = None
    if rho_R_sched is not None and s is not None:
        rho = rho_estimate(phi, rho_R_sched, s, q)
    flags = {"infima": infima, "best_index": best, "best_inf": infima[best], "centers": [[complex(a).real, complex(a).imag] for a in centers]}
    if rho is not None:
        flags["rho_extrapolated"] = rho.value
    table = ConvergenceTable.from_rows(rows, infima[best], flags)
    report = DensityReport("orbit_profile", table, _config_echo(r_sched=r_sched, R=[float(x) for x in Rs], quadrature=q))
    return OrbitResult(
        tuple(complex(a) for a in centers), tuple(grids), tuple(profiles), tuple(infima), best, infima[best], rho, report, tuple(qerrs)
    )
