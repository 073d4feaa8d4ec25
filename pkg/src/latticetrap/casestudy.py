"""Design of a small lattice for a given ion, error budget and minimum ion height."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import E_CHARGE, EV, HBAR, M_ELECTRON, UM, V_US
from .geometry import LatticeSpec, build_lattice_layout, central_site, generate_sites
from .metrics import (
    LaserForceModel,
    MagneticForceModel,
    NoiseModel,
    coupling_and_beta,
    current_for_gradient,
    heating_and_ksim,
    laser_force,
    laser_power_for_error,
    magnetic_force,
    optimized_closed_forms,
    sim_error,
    spontaneous_emission,
    unique_operating_point,
)
from .optimize import KCoefficients, extract_k_coefficients, extract_ridge, optimize_g, scan_A_R
from .trap import DriveAndSpecies, characterize_lattice

__all__ = ["InfeasibleError", "LaserVariant", "MagneticVariant", "CaseStudyReport", "noise_from_config",
           "laser_model_from_config", "design_ridge", "run_case_study", "laser_sweep", "magnetic_sweep"]


class InfeasibleError(ValueError):
    """The requested constraints cannot be met; ``constraint`` names the binding one."""

    def __init__(self, constraint: str, message: str):
        super().__init__(f"{constraint}: {message}")
        self.constraint = constraint


@dataclass(frozen=True)
class LaserVariant:
    alpha: float
    R: float
    A: float
    r: float
    detuning: float  # rad/s
    P: float
    M_obs: int
    K_sim: float
    L_sim: float
    E0: float
    F: float
    omega: float
    J: float
    beta: float
    T_J: float
    T_S: float


@dataclass(frozen=True)
class MagneticVariant:
    b_r: float
    b_xz: float
    I_wire: float
    theta: float
    K_sim: float
    E0: float
    F: float
    J: float
    beta: float


@dataclass(frozen=True)
class CaseStudyReport:
    g_over_L: float
    k: KCoefficients
    eta_geo: float
    V0: float
    Omega0: float
    q: float
    alpha: float
    R: float
    A: float
    laser: LaserVariant
    magnetic: MagneticVariant
    site_r: float
    site_omega: float
    site_depth_eV: float
    site_q: float
    noise: NoiseModel

    def table_row(self) -> dict:
        L = self.laser
        return {
            "alpha_Vus": self.alpha / V_US, "R_um": self.R / UM, "A_um": self.A / UM,
            "detuning_THz": L.detuning / (2 * math.pi * 1e12), "P_W": L.P, "M": L.M_obs,
            "K_sim": L.K_sim, "L_sim": L.L_sim, "E0": L.E0,
        }


def noise_from_config(cfg) -> NoiseModel:
    if cfg.xi is not None:
        return NoiseModel(cfg.xi, cfg.noise_exponent, cfg.noise)
    return NoiseModel.preset(cfg.noise, cfg.noise_exponent)


def laser_model_from_config(cfg, P: float = 1.0) -> LaserForceModel:
    return LaserForceModel(
        P=P,
        detuning=2 * math.pi * cfg.detuning_THz * 1e12,
        W=cfg.sheet_width_um * UM,
        wavelength=cfg.wavelength_nm * 1e-9,
        I_sat=cfg.isat_W_m2,
        gamma=2 * math.pi * cfg.linewidth_MHz * 1e6,
        fine_structure=2 * math.pi * cfg.fine_structure_THz * 1e12,
        n_s=_sites_per_side(cfg),
        M_obs=cfg.M_obs,
        nbar=cfg.nbar,
        cyclic_detuning=cfg.cyclic_detuning,
    )


def _sites_per_side(cfg) -> int:
    if cfg.cell_type == "centered_rectangular":
        return 2 * cfg.M - 1
    return cfg.M


def design_ridge(cfg, noise: NoiseModel, workers: int = 1):
    """(g/L, scan cells, ridge, k coefficients) for the configured lattice."""
    sp = DriveAndSpecies.from_alpha(V_US, cfg.mass)
    if cfg.g_over_L is None:
        A0 = 100 * UM
        g = optimize_g(cfg.cell_type, cfg.M, cfg.n_sides_homog, cfg.rho_ref * A0, A0, sp, noise,
                       cfg.g_lo, cfg.g_hi, cfg.g_step, workers=workers).g_over_L
    else:
        g = cfg.g_over_L
    res = cfg.resolution_um * UM
    cells = scan_A_R(cfg.cell_type, cfg.M, g, cfg.mass, noise, cfg.A_min_um * UM, cfg.A_max_um * UM, res,
                     None if cfg.R_min_um is None else cfg.R_min_um * UM, cfg.t_min_eV * EV,
                     cfg.n_sides_scan, workers)
    ridge = extract_ridge(cells, res)
    return g, cells, ridge, extract_k_coefficients(ridge)


def run_case_study(cfg, workers: int = 1, ridge_result=None) -> CaseStudyReport:
    noise = noise_from_config(cfg)
    m = cfg.mass
    if ridge_result is None:
        ridge_result = design_ridge(cfg, noise, workers)
    g, _, _, k = ridge_result
    eta = k.eta_geo
    alpha = cfg.r_min_um * UM / k.k_r
    V0, Om0, _ = unique_operating_point(m, cfg.q, k.k_r, eta, alpha)
    R, A, r = k.k_R * alpha, k.k_A * alpha, k.k_r * alpha

    # the designed geometry itself, driven at (V0, Omega0)
    spec = LatticeSpec.from_g_over_L(cfg.cell_type, cfg.M, cfg.n_sides_scan, R, A, g)
    lat = generate_sites(spec.cell_type, cfg.M, A)
    drive = DriveAndSpecies(V0, Om0, m)
    site = characterize_lattice(build_lattice_layout(spec, V0, lat), drive, lat, A, R,
                                only=[central_site(lat)])[0]

    # laser force: power from the error budget
    model = laser_model_from_config(cfg)
    P = laser_power_for_error(model, cfg.E0_max, k.k_r, k.k_A, alpha, m, eta)
    model = laser_model_from_config(cfg, P)
    F = laser_force(model, k.k_A, alpha)
    omega, K_opt, T_J = optimized_closed_forms(k.k_r, k.k_A, alpha, m, eta, F, noise)
    c = coupling_and_beta(F, m, omega, A)
    _, K = heating_and_ksim(m, omega, A, r, F, noise)
    _, T_S, L = spontaneous_emission(model, k.k_A, alpha, c.T_J)
    laser = LaserVariant(alpha, R, A, r, model.detuning, P, cfg.M_obs, K, L, sim_error(F, m, omega, cfg.M_obs, cfg.nbar),
                         F, omega, c.J, c.beta, c.T_J, T_S)

    # magnetic gradient sized for the target K_sim
    if not cfg.mag_ksim_target > 0:
        raise InfeasibleError("mag_ksim_target", "must be positive")
    F_mag = F * math.sqrt(cfg.mag_ksim_target / K)
    b_xz = 2 * M_ELECTRON * F_mag / (HBAR * E_CHARGE)
    theta = math.atan2(k.k_r, k.k_r)
    b_r = 2 * b_xz / math.cos(theta)
    I = current_for_gradient(b_r, alpha, k.k_r, k.k_r)
    mag_model = MagneticForceModel(I, k.k_r, k.k_r, theta, cfg.M_obs, cfg.nbar)
    _, _, F_chk = magnetic_force(mag_model, alpha)
    cm = coupling_and_beta(F_chk, m, omega, A)
    _, K_mag = heating_and_ksim(m, omega, A, r, F_chk, noise)
    magnetic = MagneticVariant(b_r, b_xz, I, theta, K_mag, sim_error(F_chk, m, omega, cfg.M_obs, cfg.nbar),
                               F_chk, cm.J, cm.beta)
    return CaseStudyReport(g, k, eta, V0, Om0, cfg.q, alpha, R, A, laser, magnetic,
                           site.r, site.omega, site.depth_eV, site.q, noise)


def laser_sweep(cfg, report: CaseStudyReport):
    """Rows (alpha_Vus, P_W, E0, K_sim, L_sim) over an alpha x P grid on the optimal ridge."""
    k, m, eta, noise = report.k, cfg.mass, report.eta_geo, report.noise
    alphas = np.geomspace(cfg.sweep_alpha_min_Vus, cfg.sweep_alpha_max_Vus, cfg.sweep_points) * V_US
    Ps = np.geomspace(report.laser.P / cfg.sweep_span, report.laser.P * cfg.sweep_span, cfg.sweep_points)
    rows = []
    for a in alphas:
        for P in Ps:
            model = laser_model_from_config(cfg, P)
            F = laser_force(model, k.k_A, a)
            omega, K, T_J = optimized_closed_forms(k.k_r, k.k_A, a, m, eta, F, noise)
            _, _, L = spontaneous_emission(model, k.k_A, a, T_J)
            rows.append((a / V_US, P, sim_error(F, m, omega, cfg.M_obs, cfg.nbar), K, L))
    return rows


def magnetic_sweep(cfg, report: CaseStudyReport):
    """Rows (alpha_Vus, b_Tm, I_A, E0, K_sim) over an alpha x gradient grid, k_a = k_r."""
    k, m, eta, noise = report.k, cfg.mass, report.eta_geo, report.noise
    alphas = np.geomspace(cfg.sweep_alpha_min_Vus, cfg.sweep_alpha_max_Vus, cfg.sweep_points) * V_US
    bs = np.geomspace(report.magnetic.b_r / cfg.sweep_span, report.magnetic.b_r * cfg.sweep_span, cfg.sweep_points)
    rows = []
    for a in alphas:
        for b in bs:
            I = current_for_gradient(b, a, k.k_r, k.k_r)
            _, _, F = magnetic_force(MagneticForceModel(I, k.k_r, k.k_r), a)
            omega, K, _ = optimized_closed_forms(k.k_r, k.k_A, a, m, eta, F, noise)
            rows.append((a / V_US, b, I, sim_error(F, m, omega, cfg.M_obs, cfg.nbar), K))
    return rows
