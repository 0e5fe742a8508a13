"""Euclidean primitives in R^D: balls, boxes, r-boundaries and Folner diagnostics.

Only D in {1, 2, 3} is supported. Volumes are closed forms so that no
sampling error enters the density computations built on top of them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence, Union

import numpy as np

SUPPORTED_DIMENSIONS = (1, 2, 3)


def _check_dimension(D: int) -> None:
    if D not in SUPPORTED_DIMENSIONS:
        raise ValueError(f"dimension must be one of {SUPPORTED_DIMENSIONS}, got {D}")


def unit_ball_volume(k: int) -> float:
    """Volume of the unit ball in R^k (k = 0 gives 1)."""
    return math.pi ** (k / 2) / math.gamma(k / 2 + 1)


def ball_volume(D: int, r: float) -> float:
    """Lebesgue volume of a closed ball of radius ``r`` in R^D."""
    _check_dimension(D)
    if not r > 0:
        raise ValueError(f"radius must be positive, got {r}")
    return unit_ball_volume(D) * r**D


def sphere_area(D: int, r: float) -> float:
    """(D-1)-dimensional surface measure of the sphere of radius ``r`` in R^D."""
    _check_dimension(D)
    return D * unit_ball_volume(D) * r ** (D - 1)


@dataclass(frozen=True)
class Ball:
    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        _check_dimension(len(self.center))

    @property
    def dimension(self) -> int:
        return len(self.center)

    @property
    def volume(self) -> float:
        return ball_volume(self.dimension, self.radius)

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        return np.linalg.norm(pts - np.asarray(self.center), axis=1) <= self.radius

    def distance_to(self, points: np.ndarray) -> np.ndarray:
        """Euclidean distance from each point to the ball (0 inside)."""
        pts = np.atleast_2d(points)
        d = np.linalg.norm(pts - np.asarray(self.center), axis=1)
        return np.maximum(d - self.radius, 0.0)

    def distance_to_complement(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        d = np.linalg.norm(pts - np.asarray(self.center), axis=1)
        return np.maximum(self.radius - d, 0.0)

    def translated(self, a: Sequence[float]) -> "Ball":
        return Ball(tuple(np.asarray(self.center) + np.asarray(a, dtype=float)), self.radius)

    def label(self) -> str:
        return f"B_{self.radius:g}({', '.join(f'{c:g}' for c in self.center)})"


@dataclass(frozen=True)
class BoxRegion:
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        if len(self.lo) != len(self.hi):
            raise ValueError("lo and hi must have the same length")
        _check_dimension(len(self.lo))
        if any(l >= h for l, h in zip(self.lo, self.hi)):
            raise ValueError(f"degenerate box: lo={self.lo}, hi={self.hi}")

    @classmethod
    def cube(cls, D: int, side: float, origin: float = 0.0) -> "BoxRegion":
        return cls((origin,) * D, (origin + side,) * D)

    @property
    def dimension(self) -> int:
        return len(self.lo)

    @property
    def sides(self) -> tuple[float, ...]:
        return tuple(h - l for l, h in zip(self.lo, self.hi))

    @property
    def volume(self) -> float:
        return float(np.prod(self.sides))

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        return np.all((pts >= np.asarray(self.lo)) & (pts <= np.asarray(self.hi)), axis=1)

    def distance_to(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        excess = np.maximum(np.asarray(self.lo) - pts, 0.0) + np.maximum(pts - np.asarray(self.hi), 0.0)
        return np.linalg.norm(excess, axis=1)

    def distance_to_complement(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        gaps = np.minimum(pts - np.asarray(self.lo), np.asarray(self.hi) - pts)
        return np.maximum(gaps.min(axis=1), 0.0)

    def translated(self, a: Sequence[float]) -> "BoxRegion":
        shift = np.asarray(a, dtype=float)
        return BoxRegion(tuple(np.asarray(self.lo) + shift), tuple(np.asarray(self.hi) + shift))

    def label(self) -> str:
        return "x".join(f"[{l:g},{h:g}]" for l, h in zip(self.lo, self.hi))


Region = Union[Ball, BoxRegion]


def region_volume(region: Region) -> float:
    return region.volume


def _box_parallel_volume(sides: Sequence[float], r: float) -> float:
    # Steiner formula: volume of {x : dist(x, box) <= r}.
    D = len(sides)
    total = 0.0
    for k in range(D + 1):
        for axes in combinations(range(D), k):
            kept = [sides[i] for i in range(D) if i not in axes]
            total += float(np.prod(kept)) * unit_ball_volume(k) * r**k
    return total


def r_boundary_volume(region: Region, r: float) -> float:
    """Volume of the set of points whose closed r-ball meets both the region
    and its complement.

    Balls: ``|B_{t+r}| - |B_{t-r}|`` (or ``|B_{t+r}|`` when ``t <= r``).
    Boxes: Euclidean parallel body (rounded corners) minus the box shrunk
    by ``r`` on every face, the latter clamped at empty.
    """
    if not r > 0:
        raise ValueError(f"probe radius must be positive, got {r}")
    if isinstance(region, Ball):
        D, t = region.dimension, region.radius
        outer = ball_volume(D, t + r)
        inner = ball_volume(D, t - r) if t > r else 0.0
        return outer - inner
    if isinstance(region, BoxRegion):
        outer = _box_parallel_volume(region.sides, r)
        inner = float(np.prod([max(s - 2 * r, 0.0) for s in region.sides]))
        return outer - inner
    raise TypeError(f"unsupported region type {type(region).__name__}")


def in_r_boundary(region: Region, points: np.ndarray, r: float) -> np.ndarray:
    """Membership test for the r-boundary, used for sampling cross-checks."""
    return (region.distance_to(points) <= r) & (region.distance_to_complement(points) <= r)


@dataclass(frozen=True)
class FolnerRow:
    label: str
    volume: float
    boundary_volume: float
    ratio: float


@dataclass(frozen=True)
class FolnerDiagnostics:
    probe_r: float
    rows: tuple[FolnerRow, ...]

    @property
    def ratios(self) -> list[float]:
        return [row.ratio for row in self.rows]

    @property
    def consistent(self) -> bool:
        """True when the boundary ratios strictly decrease along the sequence."""
        ratios = self.ratios
        return all(b < a for a, b in zip(ratios, ratios[1:]))


def folner_diagnostics(sequence: Sequence[Region], probe_r: float) -> FolnerDiagnostics:
    if not sequence:
        raise ValueError("sequence must be nonempty")
    rows = []
    for region in sequence:
        vol = region.volume
        bvol = r_boundary_volume(region, probe_r)
        rows.append(FolnerRow(region.label(), vol, bvol, bvol / vol))
    return FolnerDiagnostics(float(probe_r), tuple(rows))
