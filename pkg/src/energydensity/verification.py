"""The theorem-verification suite behind ``energydensity verify``.

Each check returns a :class:`CriterionResult` with the measured quantities,
a signed margin (nonnegative when the check passes) and the reports it
produced. Timings live only in the result objects, never in the tables, so
the CSV artifact is a deterministic function of the configuration and seed.
"""

from __future__ import annotations

import copy
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .covering import random_family, verify_cover, vitali_select
from .curves import (
    ClippingWarning,
    ClusterCurve,
    RationalCurve,
    brody_constant,
    build_cluster_curve,
    calibrate_c,
    cluster_brody_constant,
    constant_curve,
    curve_energy_field,
    identity_curve,
    ClusterSpec,
)
from .estimators import (
    characteristic_profile,
    ow_average,
    rho_estimate,
    rho_family_estimate,
    rho_nsa_estimate,
    rho_tilde_estimate,
    translate_orbit_experiment,
)
from .field import QuadratureConfig, TranslateSearchConfig, disk_lattice, stripe_field, translate
from .geometry import Ball, BoxRegion, folner_diagnostics
from .reports import DensityReport

DEFAULTS: dict = {
    "seed": 0,
    "criteria": [1, 2, 3, 4, 5, 6, 7, 8, 9],
    "vitali": {"families": 1000, "k_max": 200},
    "nsa_oracle": {"radii": [2.0, math.e, 10.0, 40.0], "quadrature": {"abs_tol": 1e-9, "mass_rel_tol": 1e-5}},
    "theorem": {
        "tolerance": 0.02,
        "R_sched": [5.0, 10.0, 20.0, 40.0],
        "r_sched": [1.0, 2.0, 5.0, 10.0],
        "search": {"h": 0.1, "refine_passes": 2, "top_k": 3},
        "quadrature": {"abs_tol": 1e-6, "rel_tol": 5e-3, "max_levels": 4, "strict": False},
        "family_step": 0.5,
        "ow_sizes": [5.0, 10.0, 20.0, 40.0],
        "folner_probe": 1.0,
    },
    "brody": {
        "bound_slack": 1e-9,
        "T_slack": 1e-6,
        "rational_box": [-5.0, 5.0, -5.0, 5.0],
        "rational_spacing": 0.01,
        "cluster_spacing": 0.02,
        "r_sched": [2.0, 5.0, 10.0, 20.0, 40.0],
        "quadrature": {"abs_tol": 1e-9, "mass_rel_tol": 1e-5},
    },
    "cluster": {
        "n_max": 6,
        "compare_n_max": 4,
        "margin": 0.1,
        "calibration_spacing": 0.05,
        "floor_stability": 0.2,
        "orbit_quadrature": {"abs_tol": 1e-12, "mass_rel_tol": 5e-3, "max_levels": 6, "strict": False},
        "nsa_quadrature": {
            "abs_tol": 1e-12,
            "mass_rel_tol": 1e-2,
            "max_levels": 7,
            "max_points": 20_000_000,
            "strict": False,
        },
        "rho_search": {"h_w": 6.0, "refine_passes": 0, "top_k": 1},
        "rho_quadrature": {"abs_tol": 1e-12, "mass_rel_tol": 2e-2, "max_levels": 6, "strict": False},
    },
    "chain": {
        "curves": ["constant", "identity", "half-square", "cluster"],
        "search": {"h": 0.1, "refine_passes": 2, "top_k": 3},
        "quadrature": {"abs_tol": 1e-9, "mass_rel_tol": 1e-4, "max_levels": 6, "strict": False},
    },
}

CRITERIA = {
    1: "Vitali correctness",
    2: "closed-form NSA oracle",
    3: "rho equals rho-tilde on periodic fields",
    4: "family estimate matches rho",
    5: "Ornstein-Weiss independence",
    6: "rho-tilde monotonicity",
    7: "Brody bound suite",
    8: "cluster curve density split",
    9: "NSA and rho inequality chain",
}

RUNTIME_LIMITS = {1: 10.0, 2: 30.0, 3: 600.0, 8: 1200.0}


def merge_config(base: dict, override: Optional[dict]) -> dict:
    out = copy.deepcopy(base)
    for k, v in (override or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge_config(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class CriterionResult:
    id: int
    name: str
    passed: bool
    margin: float
    measured: dict
    runtime: float = 0.0
    reports: list = field(default_factory=list)

    def summary(self) -> dict:
        limit = RUNTIME_LIMITS.get(self.id)
        return {
            "id": self.id,
            "name": self.name,
            "passed": bool(self.passed),
            "margin": float(self.margin),
            "measured": self.measured,
            "runtime_s": round(self.runtime, 3),
            "runtime_limit_s": limit,
        }


def _q(d: dict, **over) -> QuadratureConfig:
    return QuadratureConfig(**{**d, **over})


def _s(d: dict, **over) -> TranslateSearchConfig:
    return TranslateSearchConfig(**{**d, **over})


class Suite:
    """Runs the checks, sharing expensive intermediate results between them."""

    def __init__(self, config: Optional[dict] = None, workers: int = 1, abs_tol: Optional[float] = None):
        self.cfg = merge_config(DEFAULTS, config)
        self.workers = workers
        if abs_tol is not None:
            for path in (
                ("nsa_oracle", "quadrature"),
                ("theorem", "quadrature"),
                ("brody", "quadrature"),
                ("chain", "quadrature"),
            ):
                self.cfg[path[0]][path[1]]["abs_tol"] = float(abs_tol)
        self._cache: dict = {}

    # -- shared pieces

    def _once(self, key, fn: Callable):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    def theorem_quadrature(self) -> QuadratureConfig:
        return _q(self.cfg["theorem"]["quadrature"])

    def theorem_search(self) -> TranslateSearchConfig:
        return _s(self.cfg["theorem"]["search"], workers=self.workers)

    def periodic_fields(self) -> dict:
        return {
            "disk-lattice": (disk_lattice(), math.pi / 16),
            "stripe": (stripe_field(), 0.5),
        }

    def rho_pair(self, name: str) -> tuple[DensityReport, DensityReport]:
        def run():
            phi, _ = self.periodic_fields()[name]
            t = self.cfg["theorem"]
            q, s = self.theorem_quadrature(), self.theorem_search()
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                rho = rho_estimate(phi, t["R_sched"], s, q)
                tilde = rho_tilde_estimate(phi, t["r_sched"], t["R_sched"], s, q)
            return rho, tilde

        return self._once(("rho", name), run)

    def cluster_setup(self, n_max: int):
        def run():
            c = self.cfg["cluster"]
            spec = ClusterSpec(n_max=n_max)
            cal = calibrate_c(spec, c["margin"], c["calibration_spacing"])
            return spec, cal, build_cluster_curve(spec, cal.c)

        return self._once(("cluster", n_max), run)

    def cluster_gap_radii(self) -> list[float]:
        spec, cal, _ = self.cluster_setup(self.cfg["cluster"]["n_max"])
        a = spec.centers
        return [float((a[n - 1] + a[n]) / (2 * cal.c)) for n in range(2, spec.n_max)]

    def cluster_nsa(self):
        def run():
            spec, cal, f = self.cluster_setup(self.cfg["cluster"]["n_max"])
            phi = curve_energy_field(f, sup_value=(1 - cal.margin) ** 2)
            return rho_nsa_estimate(phi, self.cluster_gap_radii(), _q(self.cfg["cluster"]["nsa_quadrature"]))

        return self._once("cluster-nsa", run)

    def bundle(self) -> dict:
        def run():
            spec, cal, f = self.cluster_setup(self.cfg["cluster"]["n_max"])
            return {
                "constant": constant_curve(0.0),
                "identity": identity_curve(),
                "half-square": RationalCurve([0, 0, 0.5], [1]),
                "cluster": f,
            }

        return self._once("bundle", run)

    def curve_field(self, name: str):
        curve = self.bundle()[name]
        if name == "cluster":
            _, cal, _ = self.cluster_setup(self.cfg["cluster"]["n_max"])
            return curve_energy_field(curve, sup_value=(1 - cal.margin) ** 2)
        return curve_energy_field(curve)

    def curve_nsa(self, name: str):
        if name == "cluster":
            return self.cluster_nsa()
        return self._once(
            ("nsa", name),
            lambda: rho_nsa_estimate(self.curve_field(name), self.cfg["brody"]["r_sched"], _q(self.cfg["brody"]["quadrature"])),
        )

    # -- criteria

    def c1_vitali(self) -> CriterionResult:
        v = self.cfg["vitali"]
        rng = np.random.default_rng(self.cfg["seed"])
        n_viol = 0
        sizes = []
        for _ in range(int(v["families"])):
            D = int(rng.integers(1, 4))
            K = int(rng.integers(1, int(v["k_max"]) + 1))
            fam = random_family(rng, D, K)
            sel = vitali_select(fam)
            n_viol += len(verify_cover(fam, sel).violations)
            sizes.append(len(sel))
        measured = {"families": int(v["families"]), "violations": n_viol, "mean_selected": float(np.mean(sizes))}
        return CriterionResult(1, CRITERIA[1], n_viol == 0, -float(n_viol), measured)

    def c2_nsa_oracle(self) -> CriterionResult:
        o = self.cfg["nsa_oracle"]
        phi = curve_energy_field(identity_curve())
        radii = [float(r) for r in o["radii"]]
        prof = characteristic_profile(phi, radii, _q(o["quadrature"]))
        exact = np.array([math.pi / 2 * math.log((1 + r * r) / 2) for r in radii])
        rel = np.abs(prof.values / exact - 1)
        order = np.argsort(radii)
        rows = (2 * prof.values / (math.pi * np.asarray(radii) ** 2))[order]
        decreasing = bool(np.all(np.diff(rows) < 0))
        up, _ = rho_nsa_estimate(phi, sorted(radii), _q(o["quadrature"]))
        measured = {"radii": radii, "T": prof.values.tolist(), "relative_error": rel.tolist(), "rows_decreasing": decreasing}
        margin = 1e-4 - float(rel.max())
        return CriterionResult(2, CRITERIA[2], margin >= 0 and decreasing, margin, measured, reports=[up])

    def c3_corollary(self) -> CriterionResult:
        tol = self.cfg["theorem"]["tolerance"]
        measured, reports, margins = {}, [], []
        for name, (_, exact) in self.periodic_fields().items():
            rho, tilde = self.rho_pair(name)
            gap = abs(rho.value - tilde.value)
            m = min(tol - gap, tol - abs(rho.value - exact), tol - abs(tilde.value - exact))
            margins.append(m)
            measured[name] = {"rho": rho.value, "rho_tilde": tilde.value, "fraction": exact, "margin": m}
            reports += [rho, tilde]
        margin = min(margins)
        return CriterionResult(3, CRITERIA[3], margin >= 0, margin, measured, reports=reports)

    def c4_family(self) -> CriterionResult:
        t = self.cfg["theorem"]
        phi, _ = self.periodic_fields()["disk-lattice"]
        step = float(t["family_step"])
        shifts = np.arange(0.0, 1.0, step)
        family = [translate(phi, (x, y)) for x in shifts for y in shifts]
        fam = rho_family_estimate(family, t["R_sched"], self.theorem_quadrature())
        rho, _ = self.rho_pair("disk-lattice")
        gap = abs(fam.value - rho.value)
        combined = fam.error_bound + rho.error_bound
        allowed = min(combined, t["tolerance"])
        measured = {"rho_family": fam.value, "rho": rho.value, "combined_error": combined, "members": len(family)}
        return CriterionResult(4, CRITERIA[4], gap <= allowed, allowed - gap, measured, reports=[fam])

    def c5_ow(self) -> CriterionResult:
        t = self.cfg["theorem"]
        phi, exact = self.periodic_fields()["disk-lattice"]
        sizes = [float(n) for n in t["ow_sizes"]]
        balls = [Ball((0.0, 0.0), n) for n in sizes]
        squares = [BoxRegion.cube(2, n) for n in sizes]
        probe = float(t["folner_probe"])
        fb, fs = folner_diagnostics(balls, probe), folner_diagnostics(squares, probe)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            a = ow_average(phi, balls, True, self.theorem_search(), self.theorem_quadrature())
            b = ow_average(phi, squares, True, self.theorem_search(), self.theorem_quadrature())
        gap = abs(a.value - b.value)
        measured = {
            "balls": a.value,
            "squares": b.value,
            "fraction": exact,
            "folner_balls": fb.consistent,
            "folner_squares": fs.consistent,
        }
        margin = t["tolerance"] - gap
        return CriterionResult(5, CRITERIA[5], margin >= 0 and fb.consistent and fs.consistent, margin, measured, reports=[a, b])

    def c6_monotonicity(self) -> CriterionResult:
        measured, margins = {}, []
        for name in self.periodic_fields():
            _, tilde = self.rho_pair(name)
            fl = tilde.table.flags
            ok = fl["nonincreasing_in_R"] and fl["nondecreasing_in_r"]
            margins.append(-max(fl["worst_excess_R"], fl["worst_excess_r"]))
            measured[name] = {k: fl[k] for k in ("nonincreasing_in_R", "nondecreasing_in_r", "worst_excess_R", "worst_excess_r")}
            measured[name]["ok"] = bool(ok)
        passed = all(m["ok"] for m in measured.values())
        return CriterionResult(6, CRITERIA[6], passed, min(margins), measured)

    def c7_brody(self) -> CriterionResult:
        b = self.cfg["brody"]
        measured, margins = {}, []
        for name, curve in self.bundle().items():
            if isinstance(curve, ClusterCurve):
                est = cluster_brody_constant(curve, b["cluster_spacing"])
            else:
                est = brody_constant(curve, tuple(b["rational_box"]), b["rational_spacing"])
            with warnings.catch_warnings():
                warnings.simplefilter("error", ClippingWarning)
                nsa_up, _ = self.curve_nsa(name)
            radii = [row.R for row in nsa_up.table.rows]
            T = nsa_up.table.flags["T"]
            T_margin = min(math.pi * r * r / 2 + b["T_slack"] - t for r, t in zip(radii, T))
            d_margin = 1 + b["bound_slack"] - est.sup_estimate
            margins.append(min(T_margin, d_margin))
            measured[name] = {"sup_df": est.sup_estimate, "T_margin": T_margin, "radii": radii}
        margin = min(margins)
        return CriterionResult(7, CRITERIA[7], margin >= 0, margin, measured)

    def c8_cluster(self) -> CriterionResult:
        c = self.cfg["cluster"]
        floors = {}
        reports = []
        for N in (int(c["compare_n_max"]), int(c["n_max"])):
            spec, cal, f = self.cluster_setup(N)
            a = spec.centers
            best, per = -1.0, []
            for n in range(2, N + 1):
                o = translate_orbit_experiment(f, [a[n - 1] / cal.c], [1.0 / cal.c], n / cal.c, _q(c["orbit_quadrature"]))
                per.append(o.best_inf)
                best = max(best, o.best_inf)
                if N == int(c["n_max"]):
                    reports.append(o.report)
            floors[N] = {"c": cal.c, "floor": best, "per_cluster": per}
        F_small = floors[int(c["compare_n_max"])]["floor"]
        F_big = floors[int(c["n_max"])]["floor"]
        rel_change = abs(F_big - F_small) / F_big
        up, _ = self.cluster_nsa()
        rows = up.table.rows
        steps = [rows[k].estimate - rows[k + 1].estimate - (rows[k].error_bound + rows[k + 1].error_bound) for k in range(len(rows) - 1)]
        decreasing = all(s > 0 for s in steps)
        measured = {
            "floors": {str(k): v for k, v in floors.items()},
            "floor_relative_change": rel_change,
            "gap_radii": [r.R for r in rows],
            "nsa_rows": [r.estimate for r in rows],
            "nsa_errors": [r.error_bound for r in rows],
        }
        passed = F_big > 0 and rel_change <= c["floor_stability"] and decreasing
        margin = min(c["floor_stability"] - rel_change, min(steps) / rows[0].estimate)
        return CriterionResult(8, CRITERIA[8], passed, margin, measured, reports=reports + [up])

    def cluster_rho(self) -> DensityReport:
        def run():
            c = self.cfg["cluster"]
            spec, cal, f = self.cluster_setup(int(c["n_max"]))
            gaps = self.cluster_gap_radii()
            R_sched = gaps[len(gaps) // 2 :]
            # every B_R(a) must stay inside the region where the truncated
            # sum is valid, which confines the centres near the origin
            reach_w = spec.valid_radius() - max(R_sched) * cal.c - 0.5
            if reach_w <= 0:
                raise ValueError("rho schedule exceeds the valid evaluation region")
            n_cells = max(1, int(math.ceil(reach_w / c["rho_search"]["h_w"])))
            h = reach_w / n_cells / cal.c
            box = BoxRegion((0.0, -h / 2), (reach_w / cal.c, h / 2))
            s = TranslateSearchConfig(box, h, c["rho_search"]["refine_passes"], c["rho_search"]["top_k"], self.workers)
            return rho_estimate(self.curve_field("cluster"), R_sched, s, _q(c["rho_quadrature"]))

        return self._once("cluster-rho", run)

    def curve_rho(self, name: str) -> DensityReport:
        if name == "cluster":
            return self.cluster_rho()
        ch = self.cfg["chain"]
        return self._once(
            ("rho-curve", name),
            lambda: rho_estimate(
                self.curve_field(name),
                self.cfg["brody"]["r_sched"],
                _s(ch["search"], workers=self.workers),
                _q(ch["quadrature"]),
            ),
        )

    def c9_chain(self) -> CriterionResult:
        measured, margins, reports = {}, [], []
        for name in self.cfg["chain"]["curves"]:
            up, lo = self.curve_nsa(name)
            rho = self.curve_rho(name)
            combined = rho.error_bound + up.error_bound
            m1 = up.value - lo.value
            m2 = rho.value + combined - up.value
            margins.append(min(m1, m2))
            measured[name] = {
                "nsa_lower": lo.value,
                "nsa_upper": up.value,
                "rho": rho.value,
                "combined_error": combined,
                "margin": min(m1, m2),
            }
            reports += [lo, rho]
        margin = min(margins)
        return CriterionResult(9, CRITERIA[9], margin >= 0, margin, measured, reports=reports)

    def run(self, criteria=None, progress: Optional[Callable[[CriterionResult], None]] = None) -> list[CriterionResult]:
        chosen = sorted(set(criteria or self.cfg["criteria"]))
        table = {
            1: self.c1_vitali,
            2: self.c2_nsa_oracle,
            3: self.c3_corollary,
            4: self.c4_family,
            5: self.c5_ow,
            6: self.c6_monotonicity,
            7: self.c7_brody,
            8: self.c8_cluster,
            9: self.c9_chain,
        }
        results = []
        for k in chosen:
            if k not in table:
                raise ValueError(f"unknown criterion {k}")
            t0 = time.perf_counter()
            res = table[k]()
            res.runtime = time.perf_counter() - t0
            results.append(res)
            if progress is not None:
                progress(res)
        return results
