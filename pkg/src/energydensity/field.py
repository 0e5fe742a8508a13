"""Density fields phi: R^D -> [0, 1] and quadrature of their ball masses.

A field stands in for the measure ``mu(Omega) = int_Omega phi dvol``.
Translation follows the measure convention ``(a.mu)(Omega) = mu(a + Omega)``,
so ``translate(phi, a)`` evaluates to ``phi(a + x)``.

Ball masses in D = 2 use the midpoint rule on a polar grid centred at the
ball centre (D = 3 uses the spherical analogue, D = 1 plain midpoint
intervals), refined dyadically until successive estimates agree.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Callable, Optional, Sequence

import numpy as np

from .geometry import Ball, BoxRegion, ball_volume, sphere_area

log = logging.getLogger(__name__)

FIELD_KINDS = (
    "constant",
    "indicator-pattern",
    "periodic-disk-lattice",
    "sparse-cluster",
    "curve-energy",
    "user-grid",
    "user-function",
)


class QuadratureError(RuntimeError):
    """Raised when dyadic refinement fails to reach the configured tolerance."""

    def __init__(self, message: str, estimate: float, error_estimate: float):
        super().__init__(message)
        self.estimate = estimate
        self.error_estimate = error_estimate


@dataclass(frozen=True, eq=False)
class DensityField:
    """Immutable density on R^D with values in [0, 1].

    ``rule`` maps an ``(M, D)`` array of points to ``M`` values. ``offset``
    accumulates translations; ``sup_value`` is an upper bound on the field
    used by the Lipschitz bounds of the translate search.
    """

    dimension: int
    rule: Callable[[np.ndarray], np.ndarray]
    kind: str
    period: Optional[tuple[float, ...]] = None
    offset: tuple[float, ...] = ()
    sup_value: float = 1.0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise ValueError(f"unknown field kind {self.kind!r}")
        if not self.offset:
            object.__setattr__(self, "offset", (0.0,) * self.dimension)
        if len(self.offset) != self.dimension:
            raise ValueError("offset dimension mismatch")
        if self.period is not None and len(self.period) != self.dimension:
            raise ValueError("period dimension mismatch")
        if not 0.0 <= self.sup_value <= 1.0:
            raise ValueError("sup_value must lie in [0, 1]")

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, self.dimension) if self.dimension > 1 else pts[:, None]
        if pts.shape[1] != self.dimension:
            raise ValueError(f"expected points of dimension {self.dimension}, got {pts.shape[1]}")
        if any(self.offset):
            pts = pts + np.asarray(self.offset)
        return np.asarray(self.rule(pts), dtype=float)

    def fundamental_domain(self) -> Optional[BoxRegion]:
        if self.period is None:
            return None
        return BoxRegion((0.0,) * self.dimension, tuple(self.period))


def translate(phi: DensityField, a: Sequence[float]) -> DensityField:
    """The field ``x -> phi(a + x)`` (density of the measure ``a.mu``)."""
    a = tuple(float(v) for v in np.atleast_1d(np.asarray(a, dtype=float)))
    if len(a) != phi.dimension:
        raise ValueError(f"translation of dimension {len(a)} for a field of dimension {phi.dimension}")
    if phi.kind == "constant":
        return phi
    offset = tuple(o + v for o, v in zip(phi.offset, a))
    return replace(phi, offset=offset)


# ---------------------------------------------------------------------------
# constructors


def constant_field(c: float, D: int = 2) -> DensityField:
    if not 0.0 <= c <= 1.0:
        raise ValueError("constant must lie in [0, 1]")
    value = float(c)
    return DensityField(
        D,
        lambda p: np.full(p.shape[0], value),
        "constant",
        sup_value=value,
        params={"value": value},
    )


def ball_indicator(center: Sequence[float], radius: float) -> DensityField:
    ball = Ball(tuple(center), radius)
    return DensityField(
        ball.dimension,
        lambda p: ball.contains(p).astype(float),
        "indicator-pattern",
        params={"shape": "ball", "center": list(ball.center), "radius": radius},
    )


def half_space_indicator(D: int = 2, axis: int = 0) -> DensityField:
    """Indicator of ``{x : x[axis] > 0}``."""
    return DensityField(
        D,
        lambda p: (p[:, axis] > 0).astype(float),
        "indicator-pattern",
        params={"shape": "half-space", "axis": axis},
    )


def disk_lattice(period: float = 1.0, radius: float = 0.25, D: int = 2) -> DensityField:
    """Indicator of closed balls of ``radius`` centred on the lattice ``period * Z^D``."""
    if not 0 < radius <= period / 2:
        raise ValueError("radius must lie in (0, period/2]")

    def rule(p):
        frac = p / period - np.floor(p / period + 0.5)
        return (np.sum(frac * frac, axis=1) * period**2 <= radius * radius).astype(float)

    return DensityField(
        D,
        rule,
        "periodic-disk-lattice",
        period=(float(period),) * D,
        params={"period": period, "radius": radius},
    )


def stripe_field(period: float = 1.0, width: float = 0.5, D: int = 2, axis: int = 0) -> DensityField:
    """Periodic stripes: 1 where ``x[axis] mod period < width``."""
    if not 0 < width < period:
        raise ValueError("width must lie in (0, period)")

    def rule(p):
        return (np.mod(p[:, axis], period) < width).astype(float)

    per = [float(period) if i == axis else 1.0 for i in range(D)]
    return DensityField(
        D,
        rule,
        "indicator-pattern",
        period=tuple(per),
        params={"shape": "stripes", "period": period, "width": width, "axis": axis},
    )


def sparse_cluster_field(n_max: int = 6, centers: Optional[Sequence[float]] = None) -> DensityField:
    """Indicator of the union of disks ``|z - a_n| <= n`` on the real axis.

    The measure analogue of the lattice-cluster curve: large patches of full
    density whose share of centred disks vanishes.
    """
    if centers is None:
        centers = [float(n * n) for n in range(1, n_max + 1)]
    cs = np.asarray(centers, dtype=float)
    radii = np.arange(1, len(cs) + 1, dtype=float)

    def rule(p):
        dx = p[:, :1] - cs[None, :]
        d2 = dx * dx + p[:, 1:2] ** 2
        return np.any(d2 <= radii[None, :] ** 2, axis=1).astype(float)

    return DensityField(2, rule, "sparse-cluster", params={"centers": cs.tolist()})


def function_field(fn: Callable[[np.ndarray], np.ndarray], D: int = 2, sup_value: float = 1.0, **params) -> DensityField:
    return DensityField(D, fn, "user-function", sup_value=sup_value, params=dict(params))


def grid_field(values: np.ndarray, x0: float, y0: float, dx: float, dy: float) -> DensityField:
    """Piecewise-constant raster field; zero outside the raster.

    ``values[j, i]`` covers the cell ``[x0 + i dx, x0 + (i+1) dx) x [y0 + j dy, y0 + (j+1) dy)``.
    """
    vals = np.asarray(values, dtype=float)
    if vals.ndim != 2:
        raise ValueError("raster must be two-dimensional")
    if np.any(vals < 0) or np.any(vals > 1):
        raise ValueError("raster values must lie in [0, 1]")
    ny, nx = vals.shape

    def rule(p):
        i = np.floor((p[:, 0] - x0) / dx).astype(np.int64)
        j = np.floor((p[:, 1] - y0) / dy).astype(np.int64)
        inside = (i >= 0) & (i < nx) & (j >= 0) & (j < ny)
        out = np.zeros(p.shape[0])
        out[inside] = vals[j[inside], i[inside]]
        return out

    return DensityField(
        2,
        rule,
        "user-grid",
        sup_value=float(vals.max(initial=0.0)),
        params={"nx": nx, "ny": ny, "x0": x0, "y0": y0, "dx": dx, "dy": dy},
    )


def load_grid_csv(path) -> DensityField:
    """Read a raster written as ``D, nx, ny, x0, y0, dx, dy`` then row-major values."""
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and any(cell.strip() for cell in row)]
    if not rows:
        raise ValueError(f"{path}: empty raster file")
    header = [float(v) for v in rows[0]]
    if len(header) != 7:
        raise ValueError(f"{path}: header must have 7 entries (D, nx, ny, x0, y0, dx, dy)")
    D, nx, ny = int(header[0]), int(header[1]), int(header[2])
    x0, y0, dx, dy = header[3:]
    if D != 2:
        raise ValueError(f"{path}: only D = 2 rasters are supported")
    flat = [float(v) for row in rows[1:] for v in row if v.strip()]
    if len(flat) != nx * ny:
        raise ValueError(f"{path}: expected {nx * ny} values, found {len(flat)}")
    return grid_field(np.array(flat).reshape(ny, nx), x0, y0, dx, dy)


def write_grid_csv(path, values: np.ndarray, x0: float, y0: float, dx: float, dy: float) -> None:
    vals = np.asarray(values, dtype=float)
    ny, nx = vals.shape
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([2, nx, ny, x0, y0, dx, dy])
        for row in vals:
            writer.writerow([repr(float(v)) for v in row])


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureConfig:
    """Polar midpoint quadrature settings.

    Level ``k`` uses ``n_radial * 2**k`` radial shells over the largest
    requested radius and at least ``n_angular * 2**k`` angular cells per
    shell (more on outer shells, keeping cells roughly square).
    Convergence: successive levels differ by at most
    ``abs_tol + rel_tol * |B_t| + mass_rel_tol * mass`` at every requested
    radius. The last term suits sparse fields whose masses are far below
    the ball volume.
    """

    n_radial: int = 16
    n_angular: int = 16
    max_levels: int = 8
    abs_tol: float = 1e-6
    rel_tol: float = 0.0
    mass_rel_tol: float = 0.0
    max_points: int = 8_000_000
    strict: bool = True

    def __post_init__(self):
        if self.n_radial < 4 or self.n_angular < 4:
            raise ValueError("subdivision counts must be >= 4")
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if self.rel_tol < 0 or self.mass_rel_tol < 0:
            raise ValueError("relative tolerances must be nonnegative")

    def tolerance(self, volume, mass=0.0):
        return self.abs_tol + self.rel_tol * volume + self.mass_rel_tol * np.abs(mass)


@dataclass(frozen=True)
class TranslateSearchConfig:
    """Grid search for the supremum over translates.

    ``box=None`` means the fundamental domain for periodic fields and a
    ``[-1, 1]^D`` box otherwise.
    """

    box: Optional[BoxRegion] = None
    h: float = 0.1
    refine_passes: int = 2
    top_k: int = 3
    workers: int = 1

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("grid spacing h must be positive")
        if self.refine_passes < 0 or self.top_k < 1:
            raise ValueError("refine_passes >= 0 and top_k >= 1 required")

    def resolve_box(self, phi: DensityField) -> BoxRegion:
        if self.box is not None:
            if self.box.dimension != phi.dimension:
                raise ValueError("search box dimension mismatch")
            return self.box
        dom = phi.fundamental_domain()
        if dom is not None:
            return dom
        return BoxRegion((-1.0,) * phi.dimension, (1.0,) * phi.dimension)


def _shell_edges(radii: np.ndarray, dr: float) -> tuple[np.ndarray, np.ndarray]:
    """Shell edges over ``[0, max(radii)]`` containing every requested radius.

    The segment ending at radius ``t`` uses shells of width at most
    ``dr * t / max(radii)``, so each ball gets at least the resolution it
    would get on its own. Returns the edges and the edge index of each radius.
    """
    targets = np.concatenate([[0.0], radii])
    R = float(radii.max())
    pieces = [np.zeros(1)]
    for lo, hi in zip(targets[:-1], targets[1:]):
        if hi <= lo:
            continue
        n = max(1, int(math.ceil((hi - lo) / (dr * hi / R) - 1e-9)))
        seg = lo + (hi - lo) * np.arange(1, n + 1) / n
        seg[-1] = hi  # lo + (hi - lo) can round away from hi
        pieces.append(seg)
    edges = np.concatenate(pieces)
    idx = np.searchsorted(edges, radii)
    return edges, idx


def _angular_width(edges: np.ndarray, dr: float) -> np.ndarray:
    """Shell widths for sizing angular counts; slivers between nearly equal
    radii use the nominal width instead of their own."""
    lo, hi = edges[:-1], edges[1:]
    return np.maximum(hi - lo, dr * hi / edges[-1])


def _polar_nodes(D: int, edges: np.ndarray, n_ang: int, dr: float):
    """Midpoint nodes (relative to the centre), exact cell volumes and shell ids.

    Cells are kept roughly square: the angular count on a shell follows its
    circumference over its width, with ``n_ang`` as the floor.
    """
    lo, hi = edges[:-1], edges[1:]
    mid = 0.5 * (lo + hi)
    width = _angular_width(edges, dr)
    shells = np.arange(len(mid))
    if D == 1:
        pts = np.concatenate([mid, -mid])[:, None]
        w = np.concatenate([hi - lo, hi - lo])
        sid = np.concatenate([shells, shells])
        return pts, w, sid
    if D == 2:
        # multiples of 4 keep the angular nodes symmetric about both axes
        counts = 4 * np.ceil(np.maximum(n_ang, 2 * np.pi * hi / width) / 4).astype(np.int64)
        sid = np.repeat(shells, counts)
        start = np.concatenate([[0], np.cumsum(counts)[:-1]])
        j = np.arange(sid.size) - np.repeat(start, counts)
        theta = (j + 0.5) * (2 * np.pi / counts[sid])
        r = mid[sid]
        pts = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)
        w = 0.5 * (hi * hi - lo * lo)[sid] * (2 * np.pi / counts[sid])
        return pts, w, sid
    # D == 3: shells x polar bands x azimuthal cells
    pts_l, w_l, s_l = [], [], []
    for s, (a, b, m, wa) in enumerate(zip(lo, hi, mid, width)):
        n_pol = max(n_ang // 2, int(math.ceil(np.pi * b / wa)))
        t_edges = np.linspace(0.0, np.pi, n_pol + 1)
        t_mid = 0.5 * (t_edges[:-1] + t_edges[1:])
        band = np.cos(t_edges[:-1]) - np.cos(t_edges[1:])
        n_az = np.maximum(n_ang, np.ceil(2 * np.pi * b * np.sin(t_mid) / wa)).astype(np.int64)
        for tm, bw, na in zip(t_mid, band, n_az):
            ph = (np.arange(na) + 0.5) * (2 * np.pi / na)
            st = np.sin(tm)
            pts_l.append(np.stack([m * st * np.cos(ph), m * st * np.sin(ph), np.full(na, m * np.cos(tm))], axis=1))
            w_l.append(np.full(na, (b**3 - a**3) / 3 * bw * 2 * np.pi / na))
            s_l.append(np.full(na, s))
    return np.concatenate(pts_l), np.concatenate(w_l), np.concatenate(s_l)


def _node_count(D: int, radii: np.ndarray, dr: float, n_ang: int) -> float:
    edges, _ = _shell_edges(np.sort(radii), dr)
    hi = edges[1:]
    width = _angular_width(edges, dr)
    if D == 1:
        return 2.0 * len(hi)
    per_ring = np.maximum(n_ang, 2 * np.pi * hi / width)
    if D == 2:
        return float(np.sum(per_ring))
    return float(np.sum(per_ring * np.maximum(n_ang // 2, np.pi * hi / width) * 2 / np.pi))


def _level_resolution(q: QuadratureConfig, R: float, level: int) -> tuple[float, int]:
    return R / (q.n_radial * 2**level), q.n_angular * 2**level


class PolarGrid:
    """Midpoint nodes for concentric balls of the given radii, reusable
    across centres."""

    def __init__(self, D: int, radii, dr: float, n_ang: int):
        self.radii = np.atleast_1d(np.asarray(radii, dtype=float))
        order = np.argsort(self.radii)
        edges, idx = _shell_edges(self.radii[order], dr)
        self.edges = edges
        self.points, self.weights, self.shell_ids = _polar_nodes(D, edges, n_ang, dr)
        self.n_shells = len(edges) - 1
        self._out_index = np.empty(len(self.radii), dtype=np.int64)
        self._out_index[order] = idx

    def cumulative(self, phi: DensityField, center) -> np.ndarray:
        """Mass of ``B_e(center)`` for every shell edge ``e`` in ``self.edges``."""
        vals = phi(self.points + np.asarray(center, dtype=float))
        shell_mass = np.bincount(self.shell_ids, weights=self.weights * vals, minlength=self.n_shells)
        return np.concatenate([[0.0], np.cumsum(shell_mass)])

    def masses(self, phi: DensityField, center) -> np.ndarray:
        return self.cumulative(phi, center)[self._out_index]


def polar_masses(phi: DensityField, center, radii, dr: float, n_ang: int) -> np.ndarray:
    """Masses of the concentric balls ``B_t(center)`` for every ``t`` in ``radii``
    from a single polar midpoint grid with shell width at most ``dr``."""
    return PolarGrid(phi.dimension, radii, dr, n_ang).masses(phi, center)


@dataclass(frozen=True)
class MassProfile:
    radii: np.ndarray
    masses: np.ndarray
    error_estimate: np.ndarray
    level: int
    converged: bool


def mass_profile(phi: DensityField, center, radii, q: QuadratureConfig) -> MassProfile:
    """Ball masses at several radii around one centre, refined to tolerance."""
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    if np.any(radii <= 0):
        raise ValueError("radii must be positive")
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if center.size != phi.dimension:
        raise ValueError("centre dimension mismatch")
    D = phi.dimension
    R = float(radii.max())
    vols = np.array([ball_volume(D, t) for t in radii])
    prev = None
    masses = None
    diff = np.full(radii.shape, np.inf)
    level = 0
    for level in range(q.max_levels + 1):
        dr, n_ang = _level_resolution(q, R, level)
        if level > 0 and _node_count(D, radii, dr, n_ang) > q.max_points:
            level -= 1
            break
        masses = polar_masses(phi, center, radii, dr, n_ang)
        if prev is not None:
            diff = np.abs(masses - prev)
            tol = q.tolerance(vols, masses)
            if np.all(diff <= tol):
                return MassProfile(radii, np.clip(masses, 0.0, vols), diff, level, True)
        prev = masses
    msg = (
        f"ball-mass quadrature did not converge after level {level}: "
        f"max successive difference {float(np.max(diff)):.3g} vs tolerance {float(np.min(q.tolerance(vols, masses))):.3g}"
    )
    if q.strict:
        raise QuadratureError(msg, float(masses[-1]), float(np.max(diff)))
    log.warning(msg)
    return MassProfile(radii, np.clip(masses, 0.0, vols), diff, level, False)


def ball_mass(phi: DensityField, a, t: float, q: QuadratureConfig = QuadratureConfig()) -> float:
    """``int_{B_t(a)} phi dvol`` by refined polar midpoint quadrature."""
    if not t > 0:
        raise ValueError("radius must be positive")
    return float(mass_profile(phi, a, [t], q).masses[0])


def box_mass(phi: DensityField, box: BoxRegion, q: QuadratureConfig = QuadratureConfig()) -> float:
    """``int_box phi dvol`` by tensor midpoint quadrature with dyadic refinement."""
    if box.dimension != phi.dimension:
        raise ValueError("box dimension mismatch")
    return _box_mass_detail(phi, box, q)[0]


def _box_nodes(box: BoxRegion, n: int):
    axes = [l + (np.arange(n) + 0.5) * (h - l) / n for l, h in zip(box.lo, box.hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, box.dimension)
    return grid, box.volume / n**box.dimension


def _box_mass_at(phi: DensityField, box: BoxRegion, n: int) -> float:
    pts, w = _box_nodes(box, n)
    return float(np.sum(phi(pts)) * w)


def _box_cells(box: BoxRegion, q: QuadratureConfig, level: int) -> int:
    # odd counts avoid aliasing with integer and dyadic periods
    return q.n_radial * 2**level + 1


def _box_mass_detail(phi: DensityField, box: BoxRegion, q: QuadratureConfig) -> tuple[float, float, int]:
    """Refine until two successive level differences are within tolerance;
    a single agreement can be an aliasing coincidence on periodic fields."""
    tol = q.tolerance(box.volume)
    values: list[float] = []
    diff, level = math.inf, 0
    for level in range(q.max_levels + 1):
        n = _box_cells(box, q, level)
        if level > 0 and n**box.dimension > q.max_points:
            level -= 1
            break
        values.append(_box_mass_at(phi, box, n))
        if len(values) >= 3:
            d1 = abs(values[-2] - values[-3])
            d2 = abs(values[-1] - values[-2])
            diff = max(d1, d2)
            tol = q.tolerance(box.volume, values[-1])
            if diff <= tol:
                return min(max(values[-1], 0.0), box.volume), diff, level
    value = values[-1]
    if len(values) == 2:
        diff = abs(values[-1] - values[-2])
    msg = f"box-mass quadrature did not converge: difference {diff:.3g} vs tolerance {tol:.3g}"
    if q.strict:
        raise QuadratureError(msg, value, diff)
    log.warning(msg)
    return min(max(value, 0.0), box.volume), diff, level


# ---------------------------------------------------------------------------
# supremum over translates


def search_grid(box: BoxRegion, h: float) -> np.ndarray:
    """Cell-centred grid with spacing <= h covering ``box``."""
    axes = []
    for l, hi in zip(box.lo, box.hi):
        n = max(1, int(math.ceil((hi - l) / h - 1e-9)))
        axes.append(l + (np.arange(n) + 0.5) * (hi - l) / n)
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, box.dimension)


def lipschitz_bound(D: int, t: float, h: float, sup_value: float) -> float:
    """How far the ball mass can grow between a box point and its nearest grid
    point: ``2 * |S_t| * h * sup(phi)``."""
    return 2.0 * sphere_area(D, t) * h * sup_value


def _neighbour_offsets(D: int) -> np.ndarray:
    offs = np.array(list(product((-1.0, 0.0, 1.0), repeat=D)))
    return offs[np.any(offs != 0, axis=1)]


class CenterEvaluator:
    """Ball masses at a fixed quadrature resolution for many centres."""

    def __init__(self, phi: DensityField, radii, dr: float, n_ang: int, workers: int = 1):
        self.phi = phi
        self.radii = np.atleast_1d(np.asarray(radii, dtype=float))
        self.dr = dr
        self.n_ang = n_ang
        self.workers = workers
        self.grid = PolarGrid(phi.dimension, self.radii, dr, n_ang)
        self.vols = np.array([ball_volume(phi.dimension, t) for t in self.radii])
        self._cache: dict[bytes, np.ndarray] = {}

    def __call__(self, centers: np.ndarray) -> np.ndarray:
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        keys = [c.tobytes() for c in centers]
        todo = list(dict.fromkeys(k for k in keys if k not in self._cache))
        if todo:
            pts = [np.frombuffer(k, dtype=float) for k in todo]

            def one(c):
                return np.clip(self.grid.masses(self.phi, c), 0.0, self.vols)

            if self.workers > 1 and len(pts) > 1:
                with ThreadPoolExecutor(max_workers=self.workers) as pool:
                    rows = list(pool.map(one, pts))
            else:
                rows = [one(c) for c in pts]
            self._cache.update(zip(todo, rows))
        return np.array([self._cache[k] for k in keys]).reshape(len(centers), len(self.radii))


def calibrated_evaluator(
    phi: DensityField, radii, probe_center, q: QuadratureConfig, workers: int = 1
) -> tuple[CenterEvaluator, np.ndarray]:
    """Refine quadrature once at ``probe_center`` and freeze that resolution.

    Returns the evaluator and the successive-level difference at the probe,
    used as the quadrature error estimate for every centre.
    """
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    prof = mass_profile(phi, probe_center, radii, q)
    dr, n_ang = _level_resolution(q, float(radii.max()), prof.level)
    return CenterEvaluator(phi, radii, dr, n_ang, workers), prof.error_estimate


def local_refine(evaluate: Callable[[np.ndarray], np.ndarray], start: np.ndarray, h: float, passes: int):
    """Compass search from ``start`` with step h/2, h/4, ...; ``evaluate`` maps
    centres to scalar scores. Returns the visited centres and their scores."""
    D = start.size
    offs = _neighbour_offsets(D)
    best = np.asarray(start, dtype=float)
    visited = [best[None, :]]
    scores = [evaluate(best[None, :])]
    best_score = scores[0][0]
    step = h / 2
    for _ in range(passes):
        cand = best[None, :] + step * offs
        vals = evaluate(cand)
        visited.append(cand)
        scores.append(vals)
        k = int(np.argmax(vals))
        if vals[k] > best_score:
            best, best_score = cand[k], vals[k]
        step /= 2
    return np.concatenate(visited), np.concatenate(scores)


@dataclass(frozen=True)
class SupResult:
    value: float
    argmax: tuple[float, ...]
    error_bound: float
    quadrature_error: float


def sup_translate_ball_mass(
    phi: DensityField,
    t: float,
    s: TranslateSearchConfig = TranslateSearchConfig(),
    q: QuadratureConfig = QuadratureConfig(),
) -> SupResult:
    """Supremum over centres ``a`` in the search box of ``int_{B_t(a)} phi``.

    ``error_bound`` is the Lipschitz bound of :func:`lipschitz_bound` plus the
    quadrature error estimate; the true supremum over the box exceeds
    ``value`` by at most that much.
    """
    return sup_translate_profile(phi, [t], s, q)[0]


def sup_translate_profile(
    phi: DensityField,
    radii: Sequence[float],
    s: TranslateSearchConfig = TranslateSearchConfig(),
    q: QuadratureConfig = QuadratureConfig(),
) -> list[SupResult]:
    """Supremum over translates for several radii sharing one centre grid."""
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    box = s.resolve_box(phi)
    grid = search_grid(box, s.h)
    probe = grid[len(grid) // 2]
    evaluator, quad_err = calibrated_evaluator(phi, radii, probe, q, s.workers)
    table = evaluator(grid)
    centers = [grid]
    values = [table]
    for j in range(len(radii)):
        top = np.argsort(-table[:, j], kind="stable")[: s.top_k]
        for i in top:
            pts, _ = local_refine(lambda c: evaluator(c)[:, j], grid[i], s.h, s.refine_passes)
            centers.append(pts)
            values.append(evaluator(pts))
    all_c = np.concatenate(centers)
    all_v = np.concatenate(values)
    results = []
    for j, t in enumerate(radii):
        k = int(np.argmax(all_v[:, j]))
        value = float(all_v[k, j])
        lip = lipschitz_bound(phi.dimension, float(t), s.h, phi.sup_value)
        results.append(SupResult(value, tuple(float(v) for v in all_c[k]), lip + float(quad_err[j]), float(quad_err[j])))
    return results
