"""Command-line front end: ``latticetrap <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .casestudy import (InfeasibleError, design_ridge, laser_sweep, magnetic_sweep, noise_from_config,
                        run_case_study)
from .config import ConfigError, RunConfig, load_config
from .constants import AMU, EV, UM, V_US
from .field import SingularPointError, field_at, pseudopotential
from .fitting import FitError
from .fivewire import OMEGA_TOL, R_TOL, BENCHMARK_ROWS, BENCHMARK_ROWS_AS_LISTED, run_rows
from .geometry import LatticeSpec, LayoutError, build_lattice_layout, central_site, generate_sites
from .io import sha256_text, write_csv, write_json
from .optimize import lattice_homogeneity, optimize_g, scaling_study, sweep_polygon_sides
from .parallel import resolve_workers
from .trap import DriveAndSpecies, UntrappedError, characterize_lattice

logger = logging.getLogger("latticetrap")

EXIT_OK = 0
EXIT_TOLERANCE = 2
EXIT_INFEASIBLE = 3
EXIT_SOLVER = 4

RUN_ENVIRONMENT_KEYS = ("out_dir", "threads")

SITE_COLUMNS = ["site_i", "site_j", "x_um", "y_um", "r_um", "w1_MHz", "w2_MHz", "w3_MHz",
                "depth_eV", "eta_geo", "zeta", "q"]


class Run:
    """Output bookkeeping for one command: every file carries the config and is listed in a manifest."""

    def __init__(self, cfg: RunConfig, command: str):
        self.cfg = cfg
        self.command = command
        self.out = Path(cfg.out_dir)
        self.files: list[Path] = []
        # where and how fast a run happens does not change its results
        self.config = {k: v for k, v in cfg.to_dict().items() if k not in RUN_ENVIRONMENT_KEYS}

    def csv(self, name, columns, rows, meta=None):
        self.files.append(write_csv(self.out / name, columns, rows, self.config, meta))

    def json(self, name, payload):
        self.files.append(write_json(self.out / name, payload, self.config))

    def manifest(self, extra=None):
        entries = {p.name: sha256_text(p.read_text(encoding="utf-8")) for p in self.files}
        payload = {"command": self.command, "version": __version__,
                   "config_sha256": sha256_text(json.dumps(self.config, sort_keys=True, separators=(",", ":"))), "files": entries}
        payload.update(extra or {})
        write_json(self.out / f"{self.command}_manifest.json", payload, self.config)


def _site_rows(sites, lattice):
    by_index = {(s.i, s.j): s for s in lattice}
    rows = []
    for t in sites:
        p = by_index[t.index].position
        w = np.asarray(t.secular) / (2 * math.pi * 1e6)
        rows.append((t.index[0], t.index[1], p[0] / UM, p[1] / UM, t.r / UM, w[0], w[1], w[2],
                     t.depth_eV, t.eta_geo, t.zeta, t.q))
    return rows


def _species(cfg, alpha=V_US):
    return DriveAndSpecies.from_alpha(alpha, cfg.mass, label=cfg.species)


def cmd_validate(cfg: RunConfig, workers: int) -> int:
    run = Run(cfg, "validate")
    gated = run_rows(BENCHMARK_ROWS, cfg.mass)
    printed = run_rows(BENCHMARK_ROWS_AS_LISTED, cfg.mass)
    cols = ["row", "set", "rf_um", "centre_um", "V", "f_MHz", "r_um", "r_ref_um", "r_dev_pct",
            "w_MHz", "w_ref_MHz", "w_dev_pct", "r_analytic_um", "passed"]
    rows = []
    for label, results in (("consistent", gated), ("as_printed", printed)):
        for n, res in enumerate(results, 1):
            row = res.row
            rows.append((n, label, row.rf_width_um, row.centre_width_um, row.V, row.f_MHz, res.r_um, row.r_ref_um,
                         100 * res.r_dev, res.w_MHz, row.w_ref_MHz, 100 * res.w_dev, res.r_analytic_calc_um, res.passed))
    run.csv("validate.csv", cols, rows, {"tolerance_r": R_TOL, "tolerance_w": OMEGA_TOL})
    print(f"{'row':>3} {'set':<11} {'r/um':>8} {'ref':>7} {'dev%':>6} {'w/MHz':>7} {'ref':>6} {'dev%':>6}  ok")
    for r in rows:
        print(f"{r[0]:>3} {r[1]:<11} {r[6]:8.2f} {r[7]:7.1f} {r[8]:6.2f} {r[9]:7.3f} {r[10]:6.2f} {r[11]:6.2f}  "
              f"{'yes' if r[13] else 'no'}")
    ok = all(res.passed for res in gated)
    run.manifest({"passed": ok})
    print(f"table reproduction (consistent parameter set): {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_TOLERANCE


def cmd_homogenize(cfg: RunConfig, workers: int) -> int:
    run = Run(cfg, "homogenize")
    sp = _species(cfg)
    noise = noise_from_config(cfg)
    A = 100 * UM
    R = cfg.rho_ref * A
    res = optimize_g(cfg.cell_type, cfg.M, cfg.n_sides_homog, R, A, sp, noise, cfg.g_lo, cfg.g_hi, cfg.g_step,
                     workers=workers)
    run.csv("homogenize_curve.csv", ["g_over_L", "H"], list(zip(res.curve_g, res.curve_H)))
    slice_rows = []
    for g in cfg.homog_slices:
        h = lattice_homogeneity(cfg.cell_type, cfg.M, cfg.n_sides_homog, R, A, g, sp, noise, workers)
        for (i, j), k in zip(h.site_index, h.scaled_ksim):
            slice_rows.append((g, i, j, k))
    run.csv("homogenize_slices.csv", ["g_over_L", "site_i", "site_j", "ksim_scaled"], slice_rows)
    lat = generate_sites(cfg.cell_type, cfg.M, A)
    spec = LatticeSpec.from_g_over_L(cfg.cell_type, cfg.M, cfg.n_sides_homog, R, A, res.g_over_L)
    sites = characterize_lattice(build_lattice_layout(spec, sp.V, lat), sp, lat, A, R, workers=workers)
    run.csv("homogenize_sites.csv", SITE_COLUMNS, _site_rows(sites, lat),
            {"g_over_L": res.g_over_L, "A_um": A / UM, "R_um": R / UM, "alpha_Vus": sp.alpha / V_US})
    run.json("homogenize.json", {
        "g_over_L": res.g_over_L, "H": res.H, "sigma_H": res.sigma_H, "sigma_H_quoted": res.sigma_H_quoted,
        "boundary": res.boundary, "degenerate": res.degenerate, "N": len(lat),
        "scaled_ksim": res.scaled_ksim, "site_index": res.site_index,
    })
    run.manifest()
    flag = " (degenerate: all sites equivalent)" if res.degenerate else (" (range boundary)" if res.boundary else "")
    print(f"optimum g/L = {res.g_over_L:.4f}, H = {res.H:.4g} +/- {res.sigma_H:.3g}{flag}")
    return EXIT_OK


def _g_for(cfg, workers):
    """Configured g/L, or the optimum for the reference shape."""
    if cfg.g_over_L is not None:
        return cfg.g_over_L
    A0 = 100 * UM
    return optimize_g(cfg.cell_type, cfg.M, cfg.n_sides_homog, cfg.rho_ref * A0, A0, _species(cfg), noise_from_config(cfg),
                      cfg.g_lo, cfg.g_hi, cfg.g_step, workers=workers).g_over_L


def cmd_sides(cfg: RunConfig, workers: int) -> int:
    run = Run(cfg, "sides")
    R, A = cfg.sides_R_um * UM, cfg.sides_A_um * UM
    g = _g_for(cfg, workers)
    res = sweep_polygon_sides(cfg.cell_type, cfg.M, R, A, g, cfg.mass, noise_from_config(cfg), cfg.sides,
                              cfg.t_min_eV * EV, workers=workers)
    above = [int(n) for n, s in zip(res.n_sides, res.scaled) if s >= 0.95]
    crossing = min(above) if above else None
    rows = [(int(n), s, c.alpha / V_US if c.valid else math.nan) for n, s, c in zip(res.n_sides, res.scaled, res.cells)]
    run.csv("sides.csv", ["n_sides", "ksim_scaled", "alpha_Vus"], rows,
            {"g_over_L": g, "asymptotes": [1.0, 0.95], "first_n_at_0.95": crossing})
    run.manifest()
    for n, s, _ in rows:
        print(f"n = {n:3d}  K(n)/K({res.reference}) = {s:.4f}")
    print(f"first n reaching 0.95: {crossing}")
    return EXIT_OK


def cmd_scan(cfg: RunConfig, workers: int) -> int:
    run = Run(cfg, "scan")
    if cfg.A_max_um < cfg.A_min_um:
        run.csv("scan.csv", ["A_um", "R_um", "alpha_Vus", "r_um", "ksim_scaled", "valid"], [])
        run.manifest({"n_cells": 0})
        print("empty scan range: nothing to do")
        return EXIT_OK
    noise = noise_from_config(cfg)
    g, cells, ridge, k = design_ridge(cfg, noise, workers)
    run.csv("scan.csv", ["A_um", "R_um", "alpha_Vus", "r_um", "ksim_scaled", "valid"],
            [(c.A / UM, c.R / UM, c.alpha / V_US, c.r / UM, c.ksim_scaled, c.valid) for c in cells],
            {"g_over_L": g})
    run.csv("ridge.csv", ["alpha_Vus", "A_um", "R_um", "r_um", "ksim_scaled", "ksim_per_F2", "eta_geo"],
            [(c.alpha / V_US, c.A / UM, c.R / UM, c.r / UM, c.ksim_scaled, c.ksim_per_F2, c.eta_geo) for c in ridge])
    run.json("k_coefficients.json", {
        "g_over_L": g, "k_r": k.k_r, "k_A": k.k_A, "k_R": k.k_R, "r_squared": k.r_squared,
        "cubic_slope": k.cubic_slope, "cubic_slope_err": k.cubic_slope_err, "eta_geo": k.eta_geo,
        "n_samples": k.n_samples, "flagged": k.flagged,
        "fits": {"r": k.fit_r.as_dict(), "A": k.fit_A.as_dict(), "R": k.fit_R.as_dict()},
    })
    run.manifest({"n_cells": len(cells)})
    print(f"{len(cells)} cells, {len(ridge)} ridge samples; k_r = {k.k_r:.1f}, k_A = {k.k_A:.1f}, "
          f"k_R = {k.k_R:.1f} m/(V s); K/F^2 ~ alpha^{k.cubic_slope:.3f}")
    return EXIT_OK


def cmd_scaling(cfg: RunConfig, workers: int) -> int:
    run = Run(cfg, "scaling")
    masses = [m * AMU for m in cfg.scaling_masses_amu]
    entries, fits = scaling_study(cfg.cell_type, cfg.scaling_M, masses, noise_from_config(cfg),
                                  cfg.A_min_um * UM, cfg.A_max_um * UM, cfg.resolution_um * UM,
                                  cfg.t_min_eV * EV, cfg.n_sides_homog, cfg.n_sides_scan, cfg.rho_ref,
                                  cfg.seed, workers)
    rows = []
    for e in entries:
        k = e.k
        rows.append((e.N, e.mass / AMU, e.homogeneity.g_over_L, e.homogeneity.degenerate,
                     k.k_r if k else math.nan, k.k_A if k else math.nan, k.k_R if k else math.nan,
                     e.ksim_scaled, e.error))
    run.csv("scaling.csv", ["N", "mass_amu", "g_over_L", "degenerate", "k_r", "k_A", "k_R", "ksim_scaled", "error"], rows)
    run.json("scaling_fits.json", {name: f.as_dict() for name, f in sorted(fits.items())})
    run.manifest()
    for r in rows:
        print(f"N = {r[0]:3d}  m = {r[1]:.2f} u  g/L = {r[2]:.3f}{' (degenerate)' if r[3] else ''}  "
              f"k_r = {r[4]:.1f}  k_A = {r[5]:.1f}  k_R = {r[6]:.1f}")
    return EXIT_OK


def cmd_case_study(cfg: RunConfig, workers: int) -> int:
    run = Run(cfg, "case_study")
    rep = run_case_study(cfg, workers)
    run.json("case_study.json", {
        "table": rep.table_row(), "g_over_L": rep.g_over_L, "V0": rep.V0, "Omega0": rep.Omega0,
        "eta_geo": rep.eta_geo, "k_r": rep.k.k_r, "k_A": rep.k.k_A, "k_R": rep.k.k_R, "q": rep.q,
        "laser": rep.laser, "magnetic": rep.magnetic, "noise": rep.noise,
        "designed_site": {"r": rep.site_r, "omega": rep.site_omega, "depth_eV": rep.site_depth_eV, "q": rep.site_q},
    })
    run.csv("laser_sweep.csv", ["alpha_Vus", "P_W", "E0", "K_sim", "L_sim"], laser_sweep(cfg, rep))
    run.csv("magnetic_sweep.csv", ["alpha_Vus", "b_Tm", "I_A", "E0", "K_sim"], magnetic_sweep(cfg, rep))
    run.manifest()
    t = rep.table_row()
    L, M = rep.laser, rep.magnetic
    print("alpha={alpha_Vus:.3f} V us  R={R_um:.1f} um  A={A_um:.1f} um  Delta={detuning_THz:.0f} THz  "
          "P={P_W:.2f} W  M={M}  K_sim={K_sim:.1f}  L_sim={L_sim:.2f}  E0={E0:.3f}".format(**t))
    print(f"V0={rep.V0:.1f} V  eta={rep.eta_geo:.4f}  k_r={rep.k.k_r:.1f}  J={L.J:.0f} Hz  beta={L.beta:.3g}")
    print(f"magnetic: b={M.b_r:.0f} T/m  I={M.I_wire:.0f} A  K_sim={M.K_sim:.2f}  E0={M.E0:.4f}  J={M.J:.0f} Hz")
    return EXIT_OK


def cmd_field_map(cfg: RunConfig, workers: int) -> int:
    run = Run(cfg, "field_map")
    R, A = cfg.sides_R_um * UM, cfg.sides_A_um * UM
    g = _g_for(cfg, workers)
    spec = LatticeSpec.from_g_over_L(cfg.cell_type, cfg.M, cfg.n_sides_scan, R, A, g)
    lat = generate_sites(spec.cell_type, cfg.M, A)
    sp = _species(cfg)
    layout = build_lattice_layout(spec, sp.V, lat)
    c = central_site(lat)
    site = characterize_lattice(layout, sp, lat, A, R, only=[c])[0]
    z0 = cfg.map_height_um * UM if cfg.map_height_um is not None else site.r
    half = cfg.map_extent * spec.side_length / 2
    u = np.linspace(-half, half, cfg.map_points)
    rows = []
    X, Y = np.meshgrid(u, u, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel(), np.full(X.size, z0)])
    zs = np.linspace(0.1, 3.0, cfg.map_points) * site.r
    Xz, Zz = np.meshgrid(u, zs, indexing="ij")
    pts_xz = np.column_stack([Xz.ravel(), np.full(Xz.size, lat[c].position[1]), Zz.ravel()])
    for plane, P in (("xy", pts), ("xz", pts_xz)):
        psi = pseudopotential(layout, sp.context, P) / EV
        E = np.linalg.norm(field_at(layout, P), axis=1)
        rows += [(plane, p[0] / UM, p[1] / UM, p[2] / UM, s, e) for p, s, e in zip(P, psi, E)]
    run.csv("field_map.csv", ["plane", "x_um", "y_um", "z_um", "psi_eV", "E_V_per_m"], rows,
            {"g_over_L": g, "V": sp.V, "Omega": sp.Omega, "null_um": list(np.asarray(site.null_position) / UM)})
    layout_path = run.out / "layout.json"
    run.json(layout_path.name, layout.to_dict())
    run.manifest()
    print(f"field map: {len(rows)} points; central null at z = {site.r / UM:.2f} um")
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "homogenize": cmd_homogenize,
    "sides": cmd_sides,
    "scan": cmd_scan,
    "scaling": cmd_scaling,
    "case-study": cmd_case_study,
    "field-map": cmd_field_map,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="latticetrap", description="Surface-electrode rf lattice design pipelines.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="TOML file of run settings")
        s.add_argument("--out", help="output directory")
        s.add_argument("--resolution-um", type=float, help="(A, R) scan grid step in micrometres")
        s.add_argument("--threads", type=int, help="worker processes (0 = all cores)")
        s.add_argument("--seed", type=int, help="seed for fit multi-starts")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, out_dir=args.out, resolution_um=args.resolution_um,
                          threads=args.threads, seed=args.seed)
        return COMMANDS[args.command](cfg, resolve_workers(cfg.threads))
    except (ConfigError, InfeasibleError, LayoutError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (UntrappedError, FitError, SingularPointError, np.linalg.LinAlgError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
