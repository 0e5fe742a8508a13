"""Command-line experiment runner.

Every subcommand reads an optional YAML config, runs one experiment and
writes ``report.json`` and ``table.csv`` into ``--out``. Exit status: 0 on
success, 1 when ``verify`` finds a failing criterion, 2 for bad arguments or
configs, 3 when quadrature does not converge.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml

from .covering import read_family_csv, verify_cover, vitali_select
from .curves import (
    ClusterSpec,
    RationalCurve,
    build_cluster_curve,
    calibrate_c,
    constant_curve,
    curve_energy_field,
    identity_curve,
)
from .estimators import (
    ow_average,
    rho_estimate,
    rho_family_estimate,
    rho_nsa_estimate,
    rho_tilde_estimate,
    translate_orbit_experiment,
)
from .field import (
    DensityField,
    QuadratureConfig,
    QuadratureError,
    TranslateSearchConfig,
    ball_indicator,
    constant_field,
    disk_lattice,
    half_space_indicator,
    load_grid_csv,
    sparse_cluster_field,
    stripe_field,
    translate,
)
from .geometry import Ball, BoxRegion, folner_diagnostics
from .reports import DensityReport, reports_to_csv, reports_to_json
from .verification import DEFAULTS as VERIFY_DEFAULTS
from .verification import Suite, merge_config

log = logging.getLogger("energydensity")

EXIT_OK, EXIT_VERIFY_FAILED, EXIT_CONFIG, EXIT_NONCONVERGED = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


def data_path(name: str) -> Path:
    """Path of a file bundled with the package."""
    return Path(str(resources.files("energydensity") / "data" / name))


# ---------------------------------------------------------------------------
# config parsing


def load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at top level")
    return data


def _resolve(base: Optional[Path], value: str) -> Path:
    p = Path(value)
    if not p.is_absolute() and base is not None and not p.exists():
        p = base / p
    if not p.exists():
        raise ConfigError(f"referenced file not found: {value}")
    return p


def build_field(spec: dict, base: Optional[Path] = None) -> DensityField:
    kind = spec.get("kind", "disk-lattice")
    D = int(spec.get("dimension", 2))
    if kind == "constant":
        phi = constant_field(float(spec.get("value", 1.0)), D)
    elif kind in ("disk-lattice", "periodic-disk-lattice"):
        phi = disk_lattice(float(spec.get("period", 1.0)), float(spec.get("radius", 0.25)), D)
    elif kind == "stripe":
        phi = stripe_field(float(spec.get("period", 1.0)), float(spec.get("width", 0.5)), D, int(spec.get("axis", 0)))
    elif kind == "ball":
        phi = ball_indicator(spec.get("center", [0.0] * D), float(spec.get("radius", 1.0)))
    elif kind == "half-space":
        phi = half_space_indicator(D, int(spec.get("axis", 0)))
    elif kind == "sparse-cluster":
        phi = sparse_cluster_field(int(spec.get("n_max", 6)))
    elif kind in ("grid-csv", "user-grid"):
        if "path" not in spec:
            raise ConfigError("grid-csv fields need a path")
        phi = load_grid_csv(_resolve(base, spec["path"]))
    else:
        raise ConfigError(f"unknown field kind {kind!r}")
    if "translate" in spec:
        phi = translate(phi, spec["translate"])
    return phi


def build_curve(spec: dict, base: Optional[Path] = None):
    kind = spec.get("kind", "identity")
    if kind == "identity":
        return identity_curve()
    if kind == "constant":
        return constant_curve(complex(spec.get("value", 0.0)))
    if kind == "rational":
        if "path" in spec:
            return RationalCurve.load(_resolve(base, spec["path"]))
        return RationalCurve(spec["numerator"], spec.get("denominator", [1.0]))
    if kind == "cluster":
        cs = ClusterSpec(n_max=int(spec.get("n_max", 6)))
        c = spec.get("c")
        if c is None:
            c = calibrate_c(cs, float(spec.get("margin", 0.1)), float(spec.get("calibration_spacing", 0.05))).c
        return build_cluster_curve(cs, float(c))
    raise ConfigError(f"unknown curve kind {kind!r}")


def build_quadrature(d: Optional[dict], tolerance: Optional[float], **defaults) -> QuadratureConfig:
    kw = {**defaults, **(d or {})}
    if tolerance is not None:
        kw["abs_tol"] = tolerance
    return QuadratureConfig(**kw)


def build_search(d: Optional[dict], workers: int) -> TranslateSearchConfig:
    kw = dict(d or {})
    box = kw.pop("box", None)
    if box is not None:
        kw["box"] = BoxRegion(box["lo"], box["hi"])
    kw["workers"] = workers
    return TranslateSearchConfig(**kw)


# ---------------------------------------------------------------------------
# output


def write_outputs(out: Path, reports: Sequence[DensityReport], extra: Optional[dict] = None) -> None:
    out.mkdir(parents=True, exist_ok=True)
    if extra is None:
        (out / "report.json").write_text(reports_to_json(reports) + "\n")
    else:
        payload = {"reports": json.loads(reports_to_json(reports)), **extra}
        (out / "report.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    (out / "table.csv").write_text(reports_to_csv(reports))


# ---------------------------------------------------------------------------
# subcommands


def cmd_density(args, cfg: dict, base: Optional[Path]) -> int:
    phi = build_field(cfg.get("field", {}), base)
    q = build_quadrature(cfg.get("quadrature"), args.tolerance)
    s = build_search(cfg.get("search"), args.workers)
    R_sched = cfg.get("R_sched", [5.0, 10.0, 20.0, 40.0])
    r_sched = cfg.get("r_sched", [1.0, 2.0, 5.0, 10.0])
    reports = []
    for name in cfg.get("functionals", ["rho", "rho_tilde"]):
        if name == "rho":
            reports.append(rho_estimate(phi, R_sched, s, q))
        elif name == "rho_tilde":
            reports.append(rho_tilde_estimate(phi, r_sched, R_sched, s, q))
        elif name == "rho_family":
            step = float(cfg.get("family", {}).get("step", 0.5))
            dom = s.resolve_box(phi)
            axes = [np.arange(lo, hi - 1e-12, step) for lo, hi in zip(dom.lo, dom.hi)]
            shifts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, phi.dimension)
            reports.append(rho_family_estimate([translate(phi, a) for a in shifts], R_sched, q))
        else:
            raise ConfigError(f"unknown functional {name!r}")
    write_outputs(args.out, reports)
    for r in reports:
        print(f"{r.functional}: {r.value:.6g} (+/- {r.error_bound:.3g})")
    return EXIT_OK


def cmd_nsa(args, cfg: dict, base: Optional[Path]) -> int:
    f = build_curve(cfg.get("curve", {}), base)
    phi = curve_energy_field(f)
    q = build_quadrature(cfg.get("quadrature"), args.tolerance, abs_tol=1e-9, mass_rel_tol=1e-5)
    r_sched = cfg.get("r_sched", [2.0, 5.0, 10.0, 20.0, 40.0])
    up, lo = rho_nsa_estimate(phi, r_sched, q, bool(cfg.get("richardson", True)))
    write_outputs(args.out, [up, lo])
    for r, T in zip(r_sched, up.table.flags["T"]):
        print(f"T({r:g}) = {T:.8g}")
    print(f"rho_nsa upper {up.value:.6g}, lower {lo.value:.6g}")
    return EXIT_OK


def cmd_brody_example(args, cfg: dict, base: Optional[Path]) -> int:
    c = merge_config(VERIFY_DEFAULTS["cluster"], cfg.get("cluster"))
    spec = ClusterSpec(n_max=int(c["n_max"]))
    cal = calibrate_c(spec, float(c["margin"]), float(c["calibration_spacing"]))
    f = build_cluster_curve(spec, cal.c)
    a = spec.centers
    oq = build_quadrature(c["orbit_quadrature"], args.tolerance)
    nq = build_quadrature(c["nsa_quadrature"], args.tolerance)
    reports, infima = [], []
    for n in range(2, spec.n_max + 1):
        o = translate_orbit_experiment(f, [a[n - 1] / cal.c], [1.0 / cal.c], n / cal.c, oq)
        reports.append(o.report)
        infima.append(o.best_inf)
    gaps = [float((a[n - 1] + a[n]) / (2 * cal.c)) for n in range(2, spec.n_max)]
    up, lo = rho_nsa_estimate(curve_energy_field(f, sup_value=(1 - cal.margin) ** 2), gaps, nq)
    reports += [up, lo]
    extra = {
        "calibration": {
            "c": cal.c,
            "unscaled_sup": cal.unscaled_sup,
            "margin": cal.margin,
            "argmax_w": [cal.estimate.argmax.real, cal.estimate.argmax.imag],
            "note": cal.estimate.error_note,
        },
        "cluster_infima": infima,
        "floor": max(infima),
        "gap_radii": gaps,
    }
    write_outputs(args.out, reports, extra)
    print(f"c = {cal.c:.8g}; floor {max(infima):.4g}; NSA rows {[f'{r.estimate:.3g}' for r in up.table.rows]}")
    return EXIT_OK


def cmd_vitali(args, cfg: dict, base: Optional[Path]) -> int:
    src = args.input or cfg.get("input")
    path = _resolve(base, src) if src else data_path("three_balls.csv")
    try:
        family = read_family_csv(path)
    except (ValueError, OSError) as exc:
        raise ConfigError(str(exc)) from exc
    selected = vitali_select(family)
    report = verify_cover(family, selected)
    args.out.mkdir(parents=True, exist_ok=True)
    payload = {"input": str(path), "dimension": family.dimension, "balls": len(family), **report.to_dict()}
    (args.out / "report.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    lines = ["index,selected,witness"]
    chosen = set(selected)
    for j in range(1, len(family) + 1):
        lines.append(f"{j},{int(j in chosen)},{report.witnesses.get(j, '')}")
    (args.out / "table.csv").write_text("\n".join(lines) + "\n")
    print(f"selected {selected}; violations {len(report.violations)}")
    return EXIT_OK


def cmd_ow(args, cfg: dict, base: Optional[Path]) -> int:
    phi = build_field(cfg.get("field", {}), base)
    q = build_quadrature(cfg.get("quadrature"), args.tolerance, rel_tol=5e-3, max_levels=4, strict=False)
    s = build_search(cfg.get("search"), args.workers)
    sizes = [float(n) for n in cfg.get("sizes", [5.0, 10.0, 20.0, 40.0])]
    D = phi.dimension
    balls = [Ball((0.0,) * D, n) for n in sizes]
    boxes = [BoxRegion.cube(D, n) for n in sizes]
    probe = float(cfg.get("probe_r", 1.0))
    sup = bool(cfg.get("sup_translate", True))
    a = ow_average(phi, balls, sup, s, q)
    b = ow_average(phi, boxes, sup, s, q)
    fb, fs = folner_diagnostics(balls, probe), folner_diagnostics(boxes, probe)
    extra = {
        "folner": {
            "balls": {"ratios": fb.ratios, "consistent": fb.consistent},
            "squares": {"ratios": fs.ratios, "consistent": fs.consistent},
        },
        "difference": abs(a.value - b.value),
    }
    write_outputs(args.out, [a, b], extra)
    print(f"balls {a.value:.6g}, squares {b.value:.6g}, difference {abs(a.value - b.value):.3g}")
    return EXIT_OK


def cmd_verify(args, cfg: dict, base: Optional[Path]) -> int:
    cfg = dict(cfg)
    if args.seed is not None:
        cfg["seed"] = args.seed
    suite = Suite(cfg, workers=args.workers, abs_tol=args.tolerance)

    def progress(res):
        status = "PASS" if res.passed else "FAIL"
        print(f"[{status}] {res.id}. {res.name}: margin {res.margin:.4g} ({res.runtime:.1f} s)", flush=True)

    results = suite.run(progress=progress)
    reports = [r for res in results for r in res.reports]
    summary = {
        "seed": suite.cfg["seed"],
        "passed": all(r.passed for r in results),
        "criteria": [r.summary() for r in results],
    }
    write_outputs(args.out, reports)
    (args.out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True, default=float) + "\n")
    return EXIT_OK if summary["passed"] else EXIT_VERIFY_FAILED


COMMANDS = {
    "density": (cmd_density, "rho, rho_tilde and family estimates for a density field"),
    "nsa": (cmd_nsa, "T(r, f) and the NSA densities of a curve"),
    "brody-example": (cmd_brody_example, "calibrate the lattice-cluster curve and run the orbit experiment"),
    "vitali": (cmd_vitali, "greedy Vitali selection on a CSV ball family"),
    "ow": (cmd_ow, "ball versus square averaging comparison"),
    "verify": (cmd_verify, "run the acceptance checks; exit 1 on any failure"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="energydensity", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: out)")
        p.add_argument("--workers", type=int, default=1, help="threads for centre evaluation")
        p.add_argument("--tolerance", type=float, help="override the absolute quadrature tolerance")
        p.add_argument("--seed", type=int, help="seed for randomized checks (default 0)")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "vitali":
            p.add_argument("--input", help="ball family CSV (index, x1..xD, r)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.workers < 1:
        parser.error("--workers must be >= 1")
    if args.tolerance is not None and not args.tolerance > 0:
        parser.error("--tolerance must be positive")
    fn, _ = COMMANDS[args.command]
    try:
        cfg = load_config(args.config)
        base = Path(args.config).resolve().parent if args.config else None
        return fn(args, cfg, base)
    except QuadratureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (ConfigError, KeyError, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
