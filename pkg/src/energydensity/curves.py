"""Meromorphic curves C -> CP^1, their spherical derivative and energy density.

The Fubini-Study form is normalised so that ``|df| = |f'| / (1 + |f|^2)``;
the sphere then has area pi and ``|df| <= 1`` gives ``T(r, f) <= pi r^2 / 2``.

Two representations are provided: rational functions ``P/Q`` and the
lattice-cluster sums ``f(z) = sum_{lambda in Lambda} (c z - lambda)^-3`` over
lattice points inside the disks ``|z - a_n| <= n``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numba
import numpy as np

from .field import DensityField

# evaluation chunk for the (points x lattice) interaction matrix
_CHUNK = 65536


class ClippingWarning(UserWarning):
    """The energy density exceeded 1, so the curve is not Brody."""


def spherical_derivative_from_values(f: np.ndarray, fprime: np.ndarray) -> np.ndarray:
    """``|f'|/(1+|f|^2)``, switching to ``1/f`` where ``|f| > 1``.

    The two branches agree identically; the reciprocal one avoids overflow
    near poles.
    """
    f = np.asarray(f, dtype=complex)
    fprime = np.asarray(fprime, dtype=complex)
    out = np.empty(np.broadcast(f, fprime).shape)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        big = np.abs(f) > 1
        g = 1.0 / f
        gp = -fprime * g * g
        out = np.where(big, np.abs(gp) / (1 + np.abs(g) ** 2), np.abs(fprime) / (1 + np.abs(f) ** 2))
    out = np.where(np.isinf(f), 0.0, out)
    return out


class MeromorphicCurve:
    """Base class: subclasses implement :meth:`spherical_derivative`."""

    def spherical_derivative(self, z) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, z) -> np.ndarray:
        raise NotImplementedError


def _as_complex_array(coeffs) -> np.ndarray:
    arr = []
    for c in coeffs:
        if isinstance(c, (list, tuple)):
            re, im = c
            arr.append(complex(re, im))
        else:
            arr.append(complex(c))
    return np.trim_zeros(np.array(arr, dtype=complex), "b") if arr else np.zeros(0, dtype=complex)


class RationalCurve(MeromorphicCurve):
    """``f = P/Q`` with coefficients in ascending powers of z.

    The spherical derivative is evaluated in homogeneous form
    ``|P'Q - PQ'| / (|P|^2 + |Q|^2)``, which is the reciprocal-invariant
    expression and stays finite at poles.
    """

    def __init__(self, numerator: Sequence, denominator: Sequence = (1.0,), check_reduced: bool = True):
        self.numerator = _as_complex_array(numerator)
        self.denominator = _as_complex_array(denominator)
        if self.denominator.size == 0:
            raise ValueError("denominator must not be identically zero")
        if self.numerator.size == 0:
            self.numerator = np.zeros(1, dtype=complex)
        if check_reduced and self.common_roots():
            raise ValueError(f"numerator and denominator share roots: {self.common_roots()}")
        # numpy.polyval wants descending order
        self._p = self.numerator[::-1]
        self._q = self.denominator[::-1]
        self._dp = np.polyder(self._p) if self._p.size > 1 else np.zeros(1, dtype=complex)
        self._dq = np.polyder(self._q) if self._q.size > 1 else np.zeros(1, dtype=complex)

    def common_roots(self, tol: float = 1e-9) -> list[complex]:
        """Roots of Q at which P also vanishes (up to ``tol``, relative)."""
        if self.denominator.size < 2 or not np.any(self.numerator):
            return []
        roots = np.roots(self.denominator[::-1])
        scale = np.max(np.abs(self.numerator))
        shared = []
        for r in roots:
            p = np.polyval(self.numerator[::-1], r)
            if abs(p) <= tol * scale * max(1.0, abs(r)) ** (self.numerator.size - 1):
                shared.append(complex(r))
        return shared

    @property
    def degree(self) -> int:
        return max(self.numerator.size, self.denominator.size) - 1

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.polyval(self._p, z) / np.polyval(self._q, z)

    def derivative(self, z):
        z = np.asarray(z, dtype=complex)
        p, q = np.polyval(self._p, z), np.polyval(self._q, z)
        dp, dq = np.polyval(self._dp, z), np.polyval(self._dq, z)
        with np.errstate(divide="ignore", invalid="ignore"):
            return (dp * q - p * dq) / (q * q)

    def spherical_derivative(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        p, q = np.polyval(self._p, z), np.polyval(self._q, z)
        dp, dq = np.polyval(self._dp, z), np.polyval(self._dq, z)
        num = np.abs(dp * q - p * dq)
        den = np.abs(p) ** 2 + np.abs(q) ** 2
        return num / den

    def reciprocal(self) -> "RationalCurve":
        return RationalCurve(self.denominator, self.numerator, check_reduced=False)

    def scaled(self, c: float) -> "RationalCurve":
        """The curve ``z -> f(c z)``."""
        powers = c ** np.arange(max(self.numerator.size, self.denominator.size))
        return RationalCurve(
            self.numerator * powers[: self.numerator.size],
            self.denominator * powers[: self.denominator.size],
            check_reduced=False,
        )

    def to_json(self) -> dict:
        return {
            "numerator": [[c.real, c.imag] for c in self.numerator],
            "denominator": [[c.real, c.imag] for c in self.denominator],
        }

    @classmethod
    def from_json(cls, data) -> "RationalCurve":
        if isinstance(data, (str, bytes)):
            data = json.loads(data)
        return cls(data["numerator"], data.get("denominator", [[1.0, 0.0]]))

    @classmethod
    def load(cls, path) -> "RationalCurve":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def identity_curve() -> RationalCurve:
    return RationalCurve([0, 1])


def constant_curve(value: complex = 0.0) -> RationalCurve:
    return RationalCurve([value])


# ---------------------------------------------------------------------------
# lattice-cluster curves


def _default_centers(n: int) -> float:
    return float(n * n)


@dataclass(frozen=True)
class ClusterSpec:
    """Lattice points of Z^2 inside the disks ``|w - a_n| <= n``, ``n = 1..n_max``.

    ``center_rule`` maps n to a_n (real). Consecutive disks may touch but
    not overlap: ``a_{n+1} - a_n >= 2n + 1``.
    """

    n_max: int = 6
    center_rule: Callable[[int], float] = _default_centers
    drop_threshold: float = 1e-12

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        a = [self.center_rule(n) for n in range(1, self.n_max + 2)]
        for n in range(1, self.n_max + 1):
            if not a[n] > a[n - 1]:
                raise ValueError("cluster centres must be strictly increasing")
            if a[n] - a[n - 1] < 2 * n + 1 - 1e-12:
                raise ValueError(f"clusters {n} and {n + 1} overlap")

    def center(self, n: int) -> float:
        return float(self.center_rule(n))

    @property
    def centers(self) -> np.ndarray:
        return np.array([self.center(n) for n in range(1, self.n_max + 1)])

    @property
    def radii(self) -> np.ndarray:
        return np.arange(1, self.n_max + 1, dtype=float)

    def cluster_points(self, n: int) -> np.ndarray:
        a = self.center(n)
        xs = np.arange(math.ceil(a - n), math.floor(a + n) + 1)
        ys = np.arange(-n, n + 1)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        keep = (X - a) ** 2 + Y**2 <= n * n + 1e-9
        return (X[keep] + 1j * Y[keep]).astype(complex)

    def lattice(self) -> tuple[np.ndarray, np.ndarray]:
        """Points of Lambda and the (first) cluster index of each point."""
        pts, owner, seen = [], [], set()
        for n in range(1, self.n_max + 1):
            for p in self.cluster_points(n):
                key = (int(round(p.real)), int(round(p.imag)))
                if key in seen:
                    continue
                seen.add(key)
                pts.append(p)
                owner.append(n)
        return np.array(pts, dtype=complex), np.array(owner)

    def valid_radius(self) -> float:
        """|w| below which every omitted cluster (n > n_max) is strictly outside."""
        n = self.n_max + 1
        return self.center(n) - n

    def omitted_tail_bound(self, w_abs: np.ndarray, n_terms: int = 2000) -> np.ndarray:
        """Upper bound on ``sum |w - lambda|^-3`` over clusters n > n_max."""
        w_abs = np.asarray(w_abs, dtype=float)
        total = np.zeros_like(w_abs)
        for n in range(self.n_max + 1, self.n_max + 1 + n_terms):
            count = (2 * n + 1) ** 2
            dist = self.center(n) - n - w_abs
            total += count / np.maximum(dist, 1e-300) ** 3
        return total


@numba.njit(cache=True)
def _lattice_sums(w, lattice, owner, near, keep):
    """S = sum (w - lambda)^-3 and S' = -3 sum (w - lambda)^-4 over kept
    lattice points, skipping each point's nearest member."""
    m = w.size
    S = np.zeros(m, dtype=np.complex128)
    Sp = np.zeros(m, dtype=np.complex128)
    for i in range(m):
        s3 = 0j
        s4 = 0j
        for j in range(lattice.size):
            if j == near[i] or not keep[i, owner[j]]:
                continue
            inv = 1.0 / (w[i] - lattice[j])
            inv2 = inv * inv
            s3 += inv2 * inv
            s4 += inv2 * inv2
        S[i] = s3
        Sp[i] = -3.0 * s4
    return S, Sp


class ClusterCurve(MeromorphicCurve):
    """``f(z) = sum_{lambda in Lambda} (c z - lambda)^-3`` for a truncated cluster set."""

    def __init__(self, spec: ClusterSpec, c: float = 1.0):
        if not c > 0:
            raise ValueError("scale constant c must be positive")
        self.spec = spec
        self.c = float(c)
        self.lattice, self.owner = spec.lattice()
        self.counts = np.bincount(self.owner, minlength=spec.n_max + 1)[1:]
        re = np.round(self.lattice.real).astype(int)
        im = np.round(self.lattice.imag).astype(int)
        self._x0, self._y0 = re.min(), im.min()
        self._member = np.zeros((re.max() - self._x0 + 1, im.max() - self._y0 + 1), dtype=bool)
        self._member[re - self._x0, im - self._y0] = True
        self._index = -np.ones(self._member.shape, dtype=np.int64)
        self._index[re - self._x0, im - self._y0] = np.arange(self.lattice.size)

    def with_scale(self, c: float) -> "ClusterCurve":
        return ClusterCurve(self.spec, c)

    # -- internals in the w = c z coordinate

    def _check_region(self, w: np.ndarray) -> None:
        limit = self.spec.valid_radius()
        if np.any(np.abs(w) >= limit):
            raise ValueError(
                f"evaluation at |cz| >= {limit:g} lies outside the region where the omitted-cluster bound holds"
            )

    def _nearest_member(self, w: np.ndarray) -> np.ndarray:
        """Index into ``self.lattice`` of the lattice point nearest w, or -1."""
        rx = np.round(w.real).astype(np.int64) - self._x0
        ry = np.round(w.imag).astype(np.int64) - self._y0
        inside = (rx >= 0) & (rx < self._member.shape[0]) & (ry >= 0) & (ry < self._member.shape[1])
        idx = -np.ones(w.shape, dtype=np.int64)
        idx[inside] = self._index[rx[inside], ry[inside]]
        return idx

    def _cluster_mask(self, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Clusters kept per point and the summed bound of the dropped ones."""
        a = self.spec.centers
        n = self.spec.radii
        dist = np.abs(w[:, None] - a[None, :]) - n[None, :]
        with np.errstate(divide="ignore"):
            bound = np.where(dist > 0, self.counts[None, :] / np.maximum(dist, 1e-300) ** 3, np.inf)
        drop = bound < self.spec.drop_threshold
        return ~drop, np.where(drop, bound, 0.0).sum(axis=1)

    def _sums(self, w: np.ndarray):
        """Pole-subtracted sums for a chunk of points.

        Returns (nearest index, u = w - lambda0, S, S', dropped bound) where
        S, S' sum ``(w - lambda)^-3`` and its w-derivative over the kept
        lattice points other than the nearest member lambda0.
        """
        near = self._nearest_member(w)
        keep, dropped = self._cluster_mask(w)
        S, Sp = _lattice_sums(w, self.lattice, self.owner - 1, near, keep)
        has = near >= 0
        u = np.where(has, w - self.lattice[np.maximum(near, 0)], 0.0)
        return near, u, S, Sp, dropped

    def _g_chunk(self, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        near, u, S, Sp, _ = self._sums(w)
        has = near >= 0
        with np.errstate(divide="ignore", invalid="ignore"):
            g = S + np.where(has, u**-3, 0.0)
            gp = Sp + np.where(has, -3.0 * u**-4, 0.0)
        return g, gp

    def _dg_chunk(self, w: np.ndarray) -> np.ndarray:
        near, u, S, Sp, _ = self._sums(w)
        has = near >= 0
        out = spherical_derivative_from_values(S, Sp)
        if np.any(has):
            # reciprocal branch near a pole: g = p/q with q = u^3, p = 1 + u^3 S
            uu, s, sp = u[has], S[has], Sp[has]
            u2 = uu * uu
            u3 = u2 * uu
            p = 1.0 + u3 * s
            dp = 3.0 * u2 * s + u3 * sp
            dq = 3.0 * u2
            out[has] = np.abs(dp * u3 - p * dq) / (np.abs(p) ** 2 + np.abs(u3) ** 2)
        return out

    def _chunked(self, fn, w: np.ndarray, n_out: int = 1):
        w = np.asarray(w, dtype=complex)
        shape = w.shape
        flat = w.ravel()
        self._check_region(flat)
        outs = [fn(flat[i : i + _CHUNK]) for i in range(0, flat.size, _CHUNK)] or [fn(flat)]
        if n_out == 1:
            return np.concatenate(outs).reshape(shape)
        return tuple(np.concatenate([o[k] for o in outs]).reshape(shape) for k in range(n_out))

    # -- public API in the z coordinate

    def __call__(self, z):
        g, _ = self._chunked(self._g_chunk, self.c * np.asarray(z, dtype=complex), 2)
        return g

    def derivative(self, z):
        _, gp = self._chunked(self._g_chunk, self.c * np.asarray(z, dtype=complex), 2)
        return self.c * gp

    def spherical_derivative(self, z) -> np.ndarray:
        """``|df_c|(z) = c |dg|(c z)``."""
        return self.c * self._chunked(self._dg_chunk, self.c * np.asarray(z, dtype=complex))

    def unscaled_spherical_derivative(self, w) -> np.ndarray:
        """``|dg|(w)`` for ``g(w) = sum (w - lambda)^-3``."""
        return self._chunked(self._dg_chunk, np.asarray(w, dtype=complex))

    def truncation_bound(self, z) -> np.ndarray:
        """Bound on the error of f(z) from clusters dropped by the threshold."""
        w = self.c * np.asarray(z, dtype=complex).ravel()
        self._check_region(w)
        return np.concatenate([self._cluster_mask(w[i : i + _CHUNK])[1] for i in range(0, w.size, _CHUNK)] or [np.zeros(0)])

    def omitted_tail_bound(self, z) -> np.ndarray:
        """Bound on ``|f - f_infinite|`` from the clusters beyond n_max."""
        w = self.c * np.asarray(z, dtype=complex)
        self._check_region(w.ravel())
        return self.spec.omitted_tail_bound(np.abs(w))

    def cluster_centers_z(self) -> np.ndarray:
        """Images ``a_n / c`` of the cluster centres in the z-plane."""
        return self.spec.centers / self.c


def build_cluster_curve(spec: ClusterSpec, c: float) -> ClusterCurve:
    return ClusterCurve(spec, c)


# ---------------------------------------------------------------------------
# energy fields and Brody checks


def curve_energy_field(f: MeromorphicCurve, sup_value: Optional[float] = None) -> DensityField:
    """The D = 2 density ``z -> min(|df|(z)^2, 1)``; warns when clipping activates."""

    def rule(p):
        z = p[:, 0] + 1j * p[:, 1]
        e = f.spherical_derivative(z) ** 2
        if np.any(e > 1 + 1e-9):
            warnings.warn(f"energy density up to {float(e.max()):.4g} clipped to 1: curve is not Brody", ClippingWarning, stacklevel=2)
            e = np.minimum(e, 1.0)
        return e

    sup = 1.0 if sup_value is None else min(1.0, float(sup_value))
    return DensityField(2, rule, "curve-energy", sup_value=sup, params={"curve": type(f).__name__})


@dataclass(frozen=True)
class BrodyEstimate:
    sup_estimate: float
    argmax: complex
    error_note: str


def _refine_max(fn, z0: complex, step: float, passes: int = 3) -> tuple[float, complex]:
    best_z, best_v = z0, float(fn(np.array([z0]))[0])
    offs = np.linspace(-1.0, 1.0, 11)
    for _ in range(passes):
        X, Y = np.meshgrid(offs * step, offs * step, indexing="ij")
        cand = best_z + (X + 1j * Y).ravel()
        vals = fn(cand)
        k = int(np.argmax(vals))
        if vals[k] > best_v:
            best_v, best_z = float(vals[k]), complex(cand[k])
        step /= 5
    return best_v, best_z


def _brody_search(fn, box: tuple[float, float, float, float], spacing: float, top: int = 10) -> BrodyEstimate:
    if not spacing > 0:
        raise ValueError("grid spacing must be positive")
    x0, x1, y0, y1 = box
    nx = int(round((x1 - x0) / spacing)) + 1
    ny = int(round((y1 - y0) / spacing)) + 1
    xs = x0 + spacing * np.arange(nx)
    ys = y0 + spacing * np.arange(ny)
    best_v, best_z = -1.0, 0j
    cand_v, cand_z = [], []
    for x in np.array_split(xs, max(1, nx * ny // 200_000)):
        X, Y = np.meshgrid(x, ys, indexing="ij")
        z = (X + 1j * Y).ravel()
        v = fn(z)
        k = np.argsort(-v, kind="stable")[:top]
        cand_v.extend(v[k])
        cand_z.extend(z[k])
    order = np.argsort(-np.array(cand_v), kind="stable")[:top]
    for k in order:
        v, z = _refine_max(fn, cand_z[k], spacing)
        if v > best_v:
            best_v, best_z = v, z
    note = f"grid spacing {spacing:g} over [{x0:g},{x1:g}]x[{y0:g},{y1:g}], top {top} refined; no rigorous global bound"
    return BrodyEstimate(best_v, best_z, note)


def brody_constant(f: MeromorphicCurve, box: tuple[float, float, float, float] = (-5, 5, -5, 5), spacing: float = 0.01) -> BrodyEstimate:
    """Estimate ``sup |df|`` over ``box = (x0, x1, y0, y1)`` by grid search plus
    local refinement around the ten best grid points."""
    return _brody_search(f.spherical_derivative, box, spacing)


def cluster_region(spec: ClusterSpec, gap: float = 2.0) -> tuple[float, float, float, float]:
    """Box in the w-plane covering every cluster plus separation margins."""
    a = spec.centers
    n = spec.radii
    return (float(a[0] - n[0] - gap), float(a[-1] + n[-1] + gap), float(-n[-1] - gap), float(n[-1] + gap))


def cluster_brody_constant(f: ClusterCurve, spacing: float, gap: float = 2.0) -> BrodyEstimate:
    """``sup |df|`` over the cluster region, sampled in the w = c z plane with
    the given w-spacing. Samples past the valid radius are skipped."""
    limit = f.spec.valid_radius()

    def dg(w):
        # the box corners poke past the evaluation region
        out = np.zeros(w.shape)
        ok = np.abs(w) < limit
        out[ok] = f.c * f.unscaled_spherical_derivative(w[ok])
        return out

    est = _brody_search(dg, cluster_region(f.spec, gap), spacing)
    return BrodyEstimate(est.sup_estimate, est.argmax / f.c, est.error_note + " (w-plane)")


@dataclass(frozen=True)
class Calibration:
    c: float
    unscaled_sup: float
    margin: float
    estimate: BrodyEstimate


def calibrate_c(spec: ClusterSpec, target_margin: float = 0.1, spacing: float = 0.05, gap: float = 2.0) -> Calibration:
    """Pick c so that ``sup |df_c| <= 1 - margin`` via ``|df_c|(z) = c |dg|(c z)``."""
    if not 0 < target_margin < 1:
        raise ValueError("margin must lie in (0, 1)")
    est = cluster_brody_constant(ClusterCurve(spec, 1.0), spacing, gap)
    s = est.sup_estimate
    if not math.isfinite(s) or s <= 0:
        raise ValueError(f"unscaled supremum estimate is not usable: {s}")
    return Calibration(c_from_sup(s, target_margin), s, target_margin, est)


def c_from_sup(s: float, margin: float) -> float:
    return (1.0 - margin) / s
