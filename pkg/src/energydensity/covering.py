"""Finite Vitali covering: greedy largest-first selection and its certificate.

Given closed balls ``B_{r_j}(a_j)``, the greedy rule repeatedly keeps the
largest ball (ties to the lower index) that misses every ball kept so far.
The kept balls are disjoint and every input ball lies inside the threefold
enlargement of some kept ball.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .geometry import Ball, SUPPORTED_DIMENSIONS

# slack on float comparisons of distances against radius sums
SLACK = 1e-12


@dataclass(frozen=True)
class BallFamily:
    """Balls with stable 1-based indices."""

    centers: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        radii = np.asarray(self.radii, dtype=float).ravel()
        if centers.shape[0] == 0:
            raise ValueError("family must be nonempty")
        if centers.shape[0] != radii.size:
            raise ValueError("one radius per centre required")
        if centers.shape[1] not in SUPPORTED_DIMENSIONS:
            raise ValueError(f"dimension must be one of {SUPPORTED_DIMENSIONS}")
        if np.any(~(radii > 0)):
            raise ValueError("radii must be positive")
        centers.setflags(write=False)
        radii.setflags(write=False)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "radii", radii)

    @classmethod
    def from_balls(cls, balls: Sequence[Ball]) -> "BallFamily":
        if not balls:
            raise ValueError("family must be nonempty")
        dims = {b.dimension for b in balls}
        if len(dims) != 1:
            raise ValueError("all balls must share one dimension")
        return cls(np.array([b.center for b in balls]), np.array([b.radius for b in balls]))

    @property
    def dimension(self) -> int:
        return self.centers.shape[1]

    def __len__(self) -> int:
        return self.radii.size

    def ball(self, index: int) -> Ball:
        """Ball with 1-based ``index``."""
        return Ball(tuple(self.centers[index - 1]), float(self.radii[index - 1]))


def vitali_select(family: BallFamily) -> list[int]:
    """Greedy largest-first disjoint selection; returns 1-based indices in
    selection order."""
    order = np.lexsort((np.arange(len(family)), -family.radii))
    chosen: list[int] = []
    for j in order:
        if chosen:
            d = np.linalg.norm(family.centers[chosen] - family.centers[j], axis=1)
            if np.any(d <= family.radii[chosen] + family.radii[j] + SLACK):
                continue
        chosen.append(int(j))
    return [j + 1 for j in chosen]


@dataclass(frozen=True)
class Violation:
    kind: str  # "disjointness" | "containment" | "index"
    balls: tuple[int, ...]
    detail: str


@dataclass(frozen=True)
class CoverReport:
    selected: tuple[int, ...]
    violations: tuple[Violation, ...] = field(default_factory=tuple)
    witnesses: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "selected": list(self.selected),
            "ok": self.ok,
            "violations": [{"kind": v.kind, "balls": list(v.balls), "detail": v.detail} for v in self.violations],
            "witnesses": {str(k): v for k, v in sorted(self.witnesses.items())},
        }


def verify_cover(family: BallFamily, selected: Sequence[int]) -> CoverReport:
    """Check pairwise disjointness of the selected balls and, for every input
    ball j, a selected i with ``|a_j - a_i| + r_j <= 3 r_i``."""
    selected = tuple(int(i) for i in selected)
    violations: list[Violation] = []
    K = len(family)
    bad = [i for i in selected if not 1 <= i <= K]
    for i in bad:
        violations.append(Violation("index", (i,), f"index {i} outside 1..{K}"))
    sel = [i for i in selected if 1 <= i <= K]
    if len(sel) > 1:
        idx = np.array(sel) - 1
        c, r = family.centers[idx], family.radii[idx]
        dist = np.linalg.norm(c[:, None, :] - c[None, :, :], axis=2)
        hit = dist <= r[:, None] + r[None, :] + SLACK
        for p, q in zip(*np.nonzero(np.triu(hit, k=1))):
            i, j = sel[p], sel[q]
            violations.append(
                Violation(
                    "disjointness",
                    (i, j),
                    f"distance {dist[p, q]:.6g} <= r_{i} + r_{j} = {r[p] + r[q]:.6g}",
                )
            )
    witnesses = {}
    if sel:
        idx = np.array(sel) - 1
        d = np.linalg.norm(family.centers[:, None, :] - family.centers[idx][None, :, :], axis=2)
        slack = 3 * family.radii[idx][None, :] - (d + family.radii[:, None])
        best = np.argmax(slack, axis=1)
        for j in range(K):
            k = best[j]
            if slack[j, k] >= -SLACK:
                witnesses[j + 1] = int(idx[k] + 1)
            else:
                violations.append(
                    Violation(
                        "containment",
                        (j + 1,),
                        f"no selected ball certifies containment; best margin {float(slack[j, k]):.6g}",
                    )
                )
    else:
        violations.extend(Violation("containment", (j + 1,), "nothing selected") for j in range(K))
    return CoverReport(selected, tuple(violations), witnesses)


def random_family(rng: np.random.Generator, D: int, K: int, box: float = 100.0, r_range=(0.1, 10.0)) -> BallFamily:
    centers = rng.uniform(0.0, box, size=(K, D))
    radii = rng.uniform(*r_range, size=K)
    return BallFamily(centers, radii)


def read_family_csv(path) -> BallFamily:
    """Read ``index, x1..xD, r`` rows (header optional); rows are sorted by index,
    which must run 1..K."""
    rows = []
    with open(Path(path), newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].strip().startswith("#"):
                continue
            try:
                vals = [float(x) for x in rec]
            except ValueError:
                if rows:
                    raise ValueError(f"non-numeric row in {path}: {rec}")
                continue  # header
            rows.append(vals)
    if not rows:
        raise ValueError(f"no balls in {path}")
    widths = {len(r) for r in rows}
    if len(widths) != 1 or widths.pop() < 3:
        raise ValueError("rows must all have the form index, x1..xD, r")
    arr = np.array(rows)
    arr = arr[np.argsort(arr[:, 0], kind="stable")]
    if not np.array_equal(arr[:, 0], np.arange(1, len(arr) + 1)):
        raise ValueError("indices must run 1..K")
    return BallFamily(arr[:, 1:-1], arr[:, -1])


def write_family_csv(path, family: BallFamily) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index"] + [f"x{k + 1}" for k in range(family.dimension)] + ["r"])
        for j in range(len(family)):
            w.writerow([j + 1] + [repr(float(v)) for v in family.centers[j]] + [repr(float(family.radii[j]))])
