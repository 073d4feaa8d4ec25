"""Geometry optimization: homogeneity in g/L, polygon side count, the (A, R) scan and scaling studies."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize_scalar

from .constants import AMU, EV, V_US
from .fitting import FitError, FitResult, fit_scaling_law
from .geometry import LatticeSpec, build_lattice_layout, central_site, generate_sites
from .metrics import NoiseModel, heating_and_ksim
from .parallel import parallel_map
from .trap import DriveAndSpecies, TrapSite, characterize_lattice

logger = logging.getLogger(__name__)

__all__ = [
    "HomogeneityResult",
    "SidesResult",
    "ScanCell",
    "KCoefficients",
    "ScalingEntry",
    "homogeneity_H",
    "lattice_homogeneity",
    "optimize_g",
    "sweep_polygon_sides",
    "characterize_cell",
    "scan_A_R",
    "scan_grid",
    "extract_ridge",
    "ridge_bin_width",
    "extract_k_coefficients",
    "scaling_study",
    "DEFAULT_SIDES",
    "REFERENCE_RHO",
]

# K_sim error per site used for sigma_H
KSIM_REL_ERR = 0.10
DEFAULT_SIDES = (3, 4, 5, 6, 8, 10, 12, 16, 20, 25, 30, 40, 60, 80, 100)
# shape R/A at which homogeneity is optimized; near the 3x3 optimal ridge
REFERENCE_RHO = 0.25
DEGENERATE_H = 1e-7
ALPHA_REF = 1.0 * V_US


def _x(noise) -> float:
    return 4.0 if noise is None else noise.x


def _site_weight(site: TrapSite, x: float) -> float:
    # K_sim at fixed F, Xi and nominal A is proportional to r^x / omega^2
    return site.r**x / site.omega**2


def homogeneity_H(sites: list[TrapSite], centre: int, noise: NoiseModel | None = None,
                  rel_err: float = KSIM_REL_ERR):
    """(H, sigma_H, sigma_H_quoted, K_n / K_centre).

    sigma_H propagates a relative error ``rel_err`` on every K_sim through
    H = mean |1 - K_n / K_c|; sigma_H_quoted is the rule of thumb 0.13 H / sqrt(N).
    """
    x = _x(noise)
    K = np.array([_site_weight(s, x) if s.ok else math.nan for s in sites])
    N = len(K)
    scaled = K / K[centre]
    if not np.all(np.isfinite(scaled)):
        return math.inf, math.inf, math.inf, scaled
    H = float(np.mean(np.abs(1 - scaled)))
    sigma = math.sqrt(np.sum((rel_err * scaled) ** 2) + N * rel_err**2) / N
    return H, sigma, 0.13 * H / math.sqrt(N), scaled


@dataclass(frozen=True)
class HomogeneityResult:
    g_over_L: float
    H: float
    sigma_H: float
    sigma_H_quoted: float
    scaled_ksim: np.ndarray
    site_index: tuple
    boundary: bool = False
    degenerate: bool = False
    curve_g: np.ndarray = field(default_factory=lambda: np.empty(0))
    curve_H: np.ndarray = field(default_factory=lambda: np.empty(0))
    sites: tuple = ()


def lattice_homogeneity(cell_type, M, n_sides, R, A, g_over_L, species: DriveAndSpecies,
                        noise: NoiseModel | None = None, workers: int = 1,
                        orientation: float = 0.0) -> HomogeneityResult:
    spec = LatticeSpec.from_g_over_L(cell_type, M, n_sides, R, A, g_over_L, orientation)
    lat = generate_sites(spec.cell_type, M, A)
    layout = build_lattice_layout(spec, species.V, lat)
    sites = characterize_lattice(layout, species, lat, A, R, with_depth=False, workers=workers)
    c = central_site(lat)
    H, s, sq, scaled = homogeneity_H(sites, c, noise)
    return HomogeneityResult(g_over_L, H, s, sq, scaled, tuple((p.i, p.j) for p in lat), sites=tuple(sites))


def optimize_g(cell_type, M, n_sides, R, A, species: DriveAndSpecies, noise: NoiseModel | None = None,
               lo: float = 0.025, hi: float = 1.5, step: float = 0.025, tol: float = 1e-3,
               workers: int = 1) -> HomogeneityResult:
    """Grid scan of H(g/L) followed by golden-section refinement around the best grid point.

    When every site is equivalent by symmetry (H vanishes for all g/L) the
    result is flagged degenerate and the upper end of the range is returned.
    """
    if not (0 < lo < hi <= 1.5 + 1e-12):
        raise ValueError("g/L search range must lie within (0, 1.5]")
    grid = np.round(np.arange(lo, hi + step / 2, step), 12)
    evals = {}

    def H_at(g):
        if g not in evals:
            evals[g] = lattice_homogeneity(cell_type, M, n_sides, R, A, g, species, noise, workers)
        return evals[g]

    Hs = np.array([H_at(float(g)).H for g in grid])
    if np.all(Hs < DEGENERATE_H):
        best = H_at(float(grid[-1]))
        return replace(best, boundary=True, degenerate=True, curve_g=grid, curve_H=Hs)
    k = int(np.argmin(Hs))
    boundary = k == 0 or k == len(grid) - 1
    best = H_at(float(grid[k]))
    if not boundary:
        res = minimize_scalar(lambda g: H_at(float(g)).H, bounds=(grid[k - 1], grid[k + 1]),
                              method="bounded", options={"xatol": tol})
        cand = H_at(float(res.x))
        if cand.H <= best.H:
            best = cand
    else:
        logger.warning("H minimum at the g/L range boundary (%.3f)", grid[k])
    return replace(best, boundary=boundary, curve_g=grid, curve_H=Hs)


@dataclass(frozen=True)
class ScanCell:
    A: float
    R: float
    alpha: float  # alpha giving T_D = T_min, V s
    r: float
    omega: float  # at alpha
    ksim_scaled: float  # K_sim / (F^2 alpha^3)
    depth_ref_eV: float  # at the reference alpha
    eta_geo: float
    zeta: float
    valid: bool
    reason: str = ""

    @property
    def ksim_per_F2(self) -> float:
        return self.ksim_scaled * self.alpha**3


def characterize_cell(cell_type, M, n_sides, A, R, g_over_L, mass, T_min, noise: NoiseModel,
                      alpha_ref: float = ALPHA_REF, orientation: float = 0.0) -> ScanCell:
    """Central site of one geometry, moved to the alpha at which its depth equals T_min."""
    nan = math.nan
    try:
        spec = LatticeSpec.from_g_over_L(cell_type, M, n_sides, R, A, g_over_L, orientation)
    except ValueError as exc:
        return ScanCell(A, R, nan, nan, nan, nan, nan, nan, nan, False, str(exc))
    species = DriveAndSpecies.from_alpha(alpha_ref, mass)
    lat = generate_sites(spec.cell_type, M, A)
    layout = build_lattice_layout(spec, species.V, lat)
    try:
        site = characterize_lattice(layout, species, lat, A, R, only=[central_site(lat)])[0]
    except RuntimeError as exc:
        return ScanCell(A, R, nan, nan, nan, nan, nan, nan, nan, False, str(exc))
    if not site.ok or not site.depth_eV > 0:
        return ScanCell(A, R, nan, site.r, nan, nan, site.depth_eV, site.eta_geo, site.zeta, False, site.status)
    T_ref = site.depth_eV * EV
    alpha = alpha_ref * math.sqrt(T_min / T_ref)
    omega = site.omega * alpha / alpha_ref
    _, K = heating_and_ksim(mass, omega, A, site.r, 1.0, noise)
    return ScanCell(A, R, alpha, site.r, omega, K / alpha**3, site.depth_eV, site.eta_geo, site.zeta, True)


@dataclass(frozen=True)
class SidesResult:
    n_sides: np.ndarray
    scaled: np.ndarray
    cells: tuple
    reference: int


def sweep_polygon_sides(cell_type, M, R, A, g_over_L, mass, noise: NoiseModel, n_list=DEFAULT_SIDES,
                        T_min: float = 0.1 * EV, reference: int = 100, workers: int = 1) -> SidesResult:
    """Central-site K_sim(n)/K_sim(reference), each geometry at its own minimum-depth alpha."""
    ns = sorted(set(int(n) for n in n_list) | {reference})
    tasks = [(cell_type, M, n, A, R, g_over_L, mass, T_min, noise) for n in ns]
    cells = parallel_map(_cell_task, tasks, workers)
    K = np.array([c.ksim_per_F2 if c.valid else math.nan for c in cells])
    ref = K[ns.index(reference)]
    return SidesResult(np.array(ns), K / ref, tuple(cells), reference)


def _cell_task(args):
    return characterize_cell(*args)


def scan_grid(A_min, A_max, resolution, R_min=None, R_max_fraction=1 / 3):
    """(A, R) pairs on a square grid with R_min <= R < A/3."""
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    R_min = resolution if R_min is None else R_min
    if A_max < A_min:
        return []
    n_A = int(math.floor((A_max - A_min) / resolution + 1e-9)) + 1
    out = []
    for i in range(n_A):
        A = A_min + i * resolution
        j = 0
        while True:
            R = R_min + j * resolution
            if R >= A * R_max_fraction * (1 - 1e-12):
                break
            out.append((A, R))
            j += 1
    return out


def scan_A_R(cell_type, M, g_over_L, mass, noise: NoiseModel, A_min, A_max, resolution,
             R_min=None, T_min: float = 0.1 * EV, n_sides: int = 25, workers: int = 1) -> list[ScanCell]:
    """Characterize every admissible (A, R) cell; order follows the grid, not completion."""
    grid = scan_grid(A_min, A_max, resolution, R_min)
    tasks = [(cell_type, M, n_sides, A, R, g_over_L, mass, T_min, noise) for A, R in grid]
    return parallel_map(_cell_task, tasks, workers)


def ridge_bin_width(resolution: float) -> float:
    """0.02 V us per micrometre of grid resolution.

    On-ridge cells are spaced by about resolution / k_R in alpha, which is
    0.02 V us at 1 um; narrower bins fill with off-ridge cells.
    """
    return 0.02 * V_US * resolution / 1e-6


def extract_ridge(cells, resolution: float, bin_width: float | None = None) -> list[ScanCell]:
    """Per alpha bin, the valid cell with the largest K_sim / (F^2 alpha^3).

    The best cell overall fixes the ridge direction (A/alpha, R/alpha); a
    bin is kept only if the ridge at its alpha lies at least one grid step
    inside the scanned (A, R) domain, so that edge-truncated bins do not
    masquerade as optima.
    """
    valid = [c for c in cells if c.valid and np.isfinite(c.ksim_scaled)]
    if not valid:
        return []
    bw = ridge_bin_width(resolution) if bin_width is None else bin_width
    A_lo = min(c.A for c in cells)
    A_hi = max(c.A for c in cells)
    R_lo = min(c.R for c in cells)
    top = max(valid, key=lambda c: c.ksim_scaled)
    kA, kR = top.A / top.alpha, top.R / top.alpha
    bins: dict[int, ScanCell] = {}
    for c in valid:
        b = int(math.floor(c.alpha / bw))
        if b not in bins or c.ksim_scaled > bins[b].ksim_scaled:
            bins[b] = c
    out = []
    for b in sorted(bins):
        a = (b + 0.5) * bw
        if A_lo + resolution <= kA * a <= A_hi - resolution and kR * a >= R_lo + resolution:
            out.append(bins[b])
    return out


@dataclass(frozen=True)
class KCoefficients:
    k_r: float
    k_A: float
    k_R: float
    fit_r: FitResult
    fit_A: FitResult
    fit_R: FitResult
    cubic_slope: float
    cubic_slope_err: float
    eta_geo: float
    n_samples: int
    flagged: bool

    @property
    def r_squared(self) -> tuple[float, float, float]:
        return self.fit_r.r_squared, self.fit_A.r_squared, self.fit_R.r_squared


def extract_k_coefficients(ridge: list[ScanCell], min_r2: float = 0.99) -> KCoefficients:
    """Lines through the origin r = k_r alpha, A = k_A alpha, R = k_R alpha, and the alpha exponent of K_sim/F^2."""
    if len(ridge) < 5:
        raise FitError(f"need at least 5 ridge samples, got {len(ridge)}")
    a = np.array([c.alpha for c in ridge])
    fr = fit_scaling_law(a, np.array([c.r for c in ridge]), "linear")
    fA = fit_scaling_law(a, np.array([c.A for c in ridge]), "linear")
    fR = fit_scaling_law(a, np.array([c.R for c in ridge]), "linear")
    la = np.log(a)
    lk = np.log([c.ksim_per_F2 for c in ridge])
    coef, cov = np.polyfit(la, lk, 1, cov=True) if len(a) > 3 else (np.polyfit(la, lk, 1), np.zeros((2, 2)))
    flagged = min(fr.r_squared, fA.r_squared, fR.r_squared) < min_r2
    if flagged:
        logger.warning("ridge linearity below R^2 = %.2f", min_r2)
    eta = float(np.mean([c.eta_geo for c in ridge]))
    return KCoefficients(float(fr.params[0]), float(fA.params[0]), float(fR.params[0]), fr, fA, fR,
                         float(coef[0]), float(math.sqrt(cov[0, 0])), eta, len(ridge), flagged)


@dataclass(frozen=True)
class ScalingEntry:
    N: int
    mass: float
    homogeneity: HomogeneityResult
    k: KCoefficients | None
    ksim_scaled: float
    n_cells: int
    error: str = ""


def scaling_study(cell_type, M_list, masses, noise: NoiseModel, A_min, A_max, resolution,
                  T_min: float = 0.1 * EV, n_sides_homog: int = 100, n_sides_scan: int = 25,
                  rho_ref: float = REFERENCE_RHO, seed: int = 0, workers: int = 1):
    """Cascade per lattice size and ion mass: g/L optimum, then the (A, R) ridge.

    Returns (entries, fits) where fits maps a quantity name to its FitResult.
    """
    entries = []
    A0 = 100e-6
    for M in M_list:
        for mass in masses:
            sp = DriveAndSpecies.from_alpha(ALPHA_REF, mass)
            N = len(generate_sites(cell_type, M, A0))
            h = optimize_g(cell_type, M, n_sides_homog, rho_ref * A0, A0, sp, noise, workers=workers)
            cells = scan_A_R(cell_type, M, h.g_over_L, mass, noise, A_min, A_max, resolution,
                             T_min=T_min, n_sides=n_sides_scan, workers=workers)
            ridge = extract_ridge(cells, resolution)
            try:
                k = extract_k_coefficients(ridge)
                ks = float(np.median([c.ksim_scaled for c in ridge]))
                entries.append(ScalingEntry(N, mass, h, k, ks, len(cells)))
            except FitError as exc:
                entries.append(ScalingEntry(N, mass, h, None, math.nan, len(cells), str(exc)))
    return entries, _scaling_fits(entries, seed)


def _scaling_fits(entries, seed) -> dict[str, FitResult]:
    fits = {}
    ok = [e for e in entries if e.k is not None]
    Ns = sorted({e.N for e in entries})
    ms = sorted({e.mass for e in entries})

    def attempt(name, x, y, form):
        try:
            fits[name] = fit_scaling_law(np.asarray(x, float), np.asarray(y, float), form, seed=seed)
        except FitError as exc:
            logger.info("skipping fit %s: %s", name, exc)

    # k in m/(V s) equals R/alpha in um/(V us)
    if len(Ns) > 1:
        for mass in ms:
            sel = [e for e in entries if e.mass == mass and not e.homogeneity.degenerate]
            attempt(f"g_over_L_vs_N[m={mass:.6g}]", [e.N for e in sel], [e.homogeneity.g_over_L for e in sel], "a+bN^-B")
            sk = [e for e in ok if e.mass == mass]
            attempt(f"R_over_alpha_vs_N[m={mass:.6g}]", [e.N for e in sk], [e.k.k_R for e in sk], "c+dN^-E")
            attempt(f"A_over_alpha_vs_N[m={mass:.6g}]", [e.N for e in sk], [e.k.k_A for e in sk], "c+dN^-E")
            attempt(f"ksim_scaled_vs_N[m={mass:.6g}]", [e.N for e in sk], [e.ksim_scaled for e in sk], "c+dN^-E")
    if len(ms) > 1:
        for N in Ns:
            sk = [e for e in ok if e.N == N]
            x = [e.mass / AMU for e in sk]
            attempt(f"R_over_alpha_vs_m[N={N}]", x, [e.k.k_R for e in sk], "o+pm^-0.5")
            attempt(f"A_over_alpha_vs_m[N={N}]", x, [e.k.k_A for e in sk], "o+pm^-0.5")
            attempt(f"ksim_scaled_vs_m[N={N}]", x, [e.ksim_scaled for e in sk], "o+pm^-0.5")
    return fits
