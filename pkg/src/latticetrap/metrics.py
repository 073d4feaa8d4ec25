"""Closed-form figures of merit for spin-spin simulation in a trap lattice.

All frequencies (omega, Omega, gamma, detunings) are angular, in rad/s.
alpha = V / Omega is in volt-seconds and the k coefficients in metres per
volt-second, so r = k_r * alpha etc.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from scipy.optimize import minimize_scalar

from .constants import (
    E_CHARGE,
    EPS0,
    HBAR,
    M_ELECTRON,
    MU0,
    YB_FINE_STRUCTURE_HZ,
    YB_GAMMA,
    YB_ISAT,
    YB_RAMAN_WAVELENGTH,
)

__all__ = [
    "NoiseModel",
    "LaserForceModel",
    "MagneticForceModel",
    "CouplingResult",
    "MetricsReport",
    "XI_ROOM_X4",
    "CRYO_FACTOR",
    "coupling_and_beta",
    "heating_time",
    "heating_and_ksim",
    "ksim_closed_form",
    "optimized_closed_forms",
    "optimized_interaction_time_laser",
    "laser_force",
    "laser_sheet_area",
    "magnetic_force",
    "current_for_gradient",
    "sim_error",
    "sim_error_laser",
    "sim_error_mag",
    "sim_error_heating",
    "laser_power_for_error",
    "spontaneous_emission",
    "optimal_detuning",
    "power_dissipation",
    "unique_operating_point",
    "secular_from_eta",
    "metrics_report",
]

# Room-temperature noise coefficient for S_E = Xi r^-4 / omega, in V^2 m^2.
# Calibrated once so that the 3x3 square case study (alpha = 0.3 V us,
# cryogenic noise, E0 = 0.25, 2 um scan) gives K_sim = 35; frozen thereafter.
XI_ROOM_X4 = 2.512e-20
CRYO_FACTOR = 1e-3


@dataclass(frozen=True)
class NoiseModel:
    """Electric-field noise S_E(omega) = Xi r^-x / omega."""

    Xi: float
    x: float = 4.0
    label: str = "custom"

    def __post_init__(self):
        if not self.Xi > 0:
            raise ValueError("Xi must be positive")
        if not 2.0 <= self.x <= 4.0:
            raise ValueError(f"heating exponent x={self.x} outside [2, 4]")

    @classmethod
    def preset(cls, name: str, x: float = 4.0) -> "NoiseModel":
        """``room-temperature`` or ``cryogenic`` (three orders of magnitude quieter).

        Presets are calibrated for x = 4; other exponents keep the same Xi
        value in the SI units implied by x.
        """
        if name == "room-temperature":
            return cls(XI_ROOM_X4, x, name)
        if name == "cryogenic":
            return cls(XI_ROOM_X4 * CRYO_FACTOR, x, name)
        raise ValueError(f"unknown noise preset {name!r}")

    def S_E(self, r: float, omega: float) -> float:
        return self.Xi * r ** (-self.x) / omega


@dataclass(frozen=True)
class LaserForceModel:
    """State-dependent force from a light sheet of power P across the array.

    ``cyclic_detuning`` inserts Delta and Delta_fs in Hz rather than rad/s
    into the force and scattering formulas while gamma stays angular. This
    mixed convention reproduces the reference case-study numbers.
    """

    P: float
    detuning: float = 2 * math.pi * 33e12
    W: float = 25e-6
    wavelength: float = YB_RAMAN_WAVELENGTH
    I_sat: float = YB_ISAT
    gamma: float = YB_GAMMA
    fine_structure: float = 2 * math.pi * YB_FINE_STRUCTURE_HZ
    n_s: int = 3
    M_obs: int = 1
    nbar: float = 0.0
    nbar0: float = 0.0
    cyclic_detuning: bool = False

    def __post_init__(self):
        for name in ("P", "detuning", "W", "wavelength", "I_sat", "gamma", "fine_structure"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.detuning < self.fine_structure:
            raise ValueError("detuning must lie below the fine-structure splitting")
        if self.n_s < 2:
            raise ValueError("the light sheet needs at least two sites per side")
        if self.M_obs < 1 or self.nbar < 0 or self.nbar0 < 0:
            raise ValueError("M_obs >= 1 and phonon numbers >= 0 required")

    @property
    def _conv(self) -> float:
        return 1 / (2 * math.pi) if self.cyclic_detuning else 1.0

    @property
    def delta_eff(self) -> float:
        return self.detuning * self._conv

    @property
    def fine_structure_eff(self) -> float:
        return self.fine_structure * self._conv


@dataclass(frozen=True)
class MagneticForceModel:
    """Gradient from a current-carrying wire offset a = k_a alpha from the polygon centre."""

    I_wire: float
    k_a: float
    k_r: float
    theta: float | None = None
    M_obs: int = 1
    nbar: float = 0.0

    def __post_init__(self):
        if not (self.I_wire > 0 and self.k_a > 0 and self.k_r > 0):
            raise ValueError("I_wire, k_a and k_r must be positive")
        if not 0 <= self.angle < math.pi / 2:
            raise ValueError("theta must lie in [0, pi/2)")

    @property
    def angle(self) -> float:
        """Wire-to-plane angle; defaults to atan(k_r / k_a)."""
        return self.theta if self.theta is not None else math.atan2(self.k_r, self.k_a)


def _positive(**kw):
    for k, v in kw.items():
        if not v > 0:
            raise ValueError(f"{k} must be positive")


@dataclass(frozen=True)
class CouplingResult:
    J: float  # 1/s
    beta: float
    T_J: float  # s

    @property
    def short_range(self) -> bool:
        return self.beta < 1


def coupling_and_beta(F: float, m: float, omega: float, A: float) -> CouplingResult:
    """J = beta F^2 / (m omega^2 hbar), beta = e^2 / (2 pi eps0 m omega^2 A^3)."""
    _positive(m=m, omega=omega, A=A)
    if F < 0:
        raise ValueError("F must be non-negative")
    beta = E_CHARGE**2 / (2 * math.pi * EPS0 * m * omega**2 * A**3)
    J = beta * F**2 / (m * omega**2 * HBAR)
    return CouplingResult(J, beta, math.inf if J == 0 else 1 / J)


def heating_time(m: float, omega: float, r: float, noise: NoiseModel) -> float:
    """T_ndot = 4 m omega hbar / (e^2 S_E(omega))."""
    return 4 * m * omega * HBAR / (E_CHARGE**2 * noise.S_E(r, omega))


def heating_and_ksim(m: float, omega: float, A: float, r: float, F: float,
                     noise: NoiseModel) -> tuple[float, float]:
    _positive(m=m, omega=omega, A=A, r=r)
    T_n = heating_time(m, omega, r, noise)
    T_J = coupling_and_beta(F, m, omega, A).T_J
    return T_n, T_n / T_J


def ksim_closed_form(F: float, m: float, r: float, alpha: float, eta: float, A: float,
                     noise: NoiseModel) -> float:
    """K_sim = 4 F^2 m r^(x+4) / (Xi e^2 alpha^2 eta^2 pi eps0 A^3) with omega eliminated."""
    return (4 * F**2 * m * r ** (noise.x + 4)
            / (noise.Xi * E_CHARGE**2 * alpha**2 * eta**2 * math.pi * EPS0 * A**3))


def secular_from_eta(eta: float, alpha: float, m: float, r: float, charge: float = E_CHARGE) -> float:
    """omega = e alpha eta / (sqrt(2) m r^2)."""
    return charge * alpha * eta / (math.sqrt(2) * m * r**2)


def optimized_closed_forms(k_r: float, k_A: float, alpha: float, m: float, eta: float, F: float,
                           noise: NoiseModel) -> tuple[float, float, float]:
    """(omega, K_sim, T_J) on the optimal ridge r = k_r alpha, A = k_A alpha."""
    _positive(k_r=k_r, k_A=k_A, alpha=alpha, m=m, eta=eta)
    e = E_CHARGE
    omega = e * eta / (math.sqrt(2) * k_r**2 * m * alpha)
    K = (4 * F**2 * m * k_r ** (4 + noise.x) * alpha ** (noise.x - 1)
         / (noise.Xi * eta**2 * math.pi * EPS0 * e**2 * k_A**3))
    T_J = math.inf if F == 0 else e**2 * math.pi * EPS0 * HBAR * eta**4 * k_A**3 / (2 * k_r**8 * F**2 * m**2 * alpha)
    return omega, K, T_J


def laser_sheet_area(model: LaserForceModel, k_A: float, alpha: float) -> float:
    return (model.n_s - 1) * k_A * alpha * model.W


def laser_force(model: LaserForceModel, k_A: float, alpha: float) -> float:
    """F = 2 pi hbar P gamma^2 / (3 a Delta lambda I_sat)."""
    a = laser_sheet_area(model, k_A, alpha)
    return (2 * math.pi * HBAR * model.P * model.gamma**2
            / (3 * a * model.delta_eff * model.wavelength * model.I_sat))


def optimized_interaction_time_laser(model: LaserForceModel, k_r, k_A, alpha, m, eta) -> float:
    """T_J on the ridge with the laser force substituted; grows linearly in alpha."""
    e = E_CHARGE
    return (9 / 8 * e**2 * EPS0 / (math.pi * HBAR)
            * eta**4 * k_A**3 * ((model.n_s - 1) * k_A * model.W) ** 2 * model.delta_eff**2
            * model.wavelength**2 * model.I_sat**2 * alpha
            / (k_r**8 * model.gamma**4 * model.P**2 * m**2))


def magnetic_force(model: MagneticForceModel, alpha: float) -> tuple[float, float, float]:
    """(b_r', b_xz, F) for a wire at distance alpha sqrt(k_r^2 + k_a^2) from the ion."""
    _positive(alpha=alpha)
    denom = alpha**2 * (model.k_r**2 + model.k_a**2)
    b_r = MU0 * model.I_wire / (2 * math.pi * denom)
    b_xz = MU0 * model.I_wire * math.cos(model.angle) / (4 * math.pi * denom)
    F = HBAR * E_CHARGE * b_xz / (2 * M_ELECTRON)
    return b_r, b_xz, F


def current_for_gradient(b_r: float, alpha: float, k_r: float, k_a: float) -> float:
    """Wire current giving gradient b_r' at the ion."""
    return b_r * 2 * math.pi * alpha**2 * (k_r**2 + k_a**2) / MU0


def sim_error(F: float, m: float, omega: float, M_obs: int = 1, nbar: float = 0.0) -> float:
    """E0 = F^2 M (nbar + 1/2) / (2 hbar m omega^3)."""
    _positive(m=m, omega=omega)
    return F**2 * M_obs * (nbar + 0.5) / (2 * HBAR * m * omega**3)


def sim_error_laser(model: LaserForceModel, k_r, k_A, alpha, m, eta) -> float:
    """Laser-force error on the ridge; linear in alpha."""
    e = E_CHARGE
    return (4 * math.sqrt(2) / 9 * math.pi**2 * HBAR / e**3
            * model.M_obs * k_r**6 * model.gamma**4 * m**2 * model.P**2 * alpha * (model.nbar + 0.5)
            / (eta**3 * (model.n_s - 1) ** 2 * k_A**2 * model.W**2 * model.delta_eff**2
               * model.wavelength**2 * model.I_sat**2))


def sim_error_mag(model: MagneticForceModel, alpha, m, eta) -> float:
    """Magnetic-gradient error on the ridge; falls as 1/alpha."""
    e = E_CHARGE
    k_r, k_a = model.k_r, model.k_a
    return (math.sqrt(2) / 64 * HBAR * MU0**2 / (math.pi**2 * M_ELECTRON**2 * e)
            * k_r**6 * m**2 * model.I_wire**2 * math.cos(model.angle) ** 2 * model.M_obs
            * (model.nbar + 0.5) / (eta**3 * (k_r**2 + k_a**2) ** 2 * alpha))


def sim_error_heating(F, m, omega, M_obs=1, nbar0=0.0, K_sim=math.inf) -> float:
    """E0 with the phonon number grown by 1/K_sim over one interaction time."""
    extra = 0.0 if math.isinf(K_sim) else 1 / K_sim
    return sim_error(F, m, omega, M_obs, nbar0 + extra)


def laser_power_for_error(model: LaserForceModel, E0_target, k_r, k_A, alpha, m, eta) -> float:
    """Power that makes the laser error equal E0_target (E0 is quadratic in P)."""
    _positive(E0_target=E0_target)
    E_ref = sim_error_laser(model, k_r, k_A, alpha, m, eta)
    return model.P * math.sqrt(E0_target / E_ref)


def spontaneous_emission(model: LaserForceModel, k_A: float, alpha: float,
                         T_J: float | None = None) -> tuple[float, float, float | None]:
    """(S, T_S, L_sim). S = (gamma g^2 / 6)(1/Delta^2 + 2/(Delta_fs - Delta)^2)."""
    d = model.delta_eff
    dfs = model.fine_structure_eff
    if d >= dfs:
        raise ValueError("detuning at or beyond the fine-structure pole")
    g2 = model.gamma**2 * model.P / (2 * laser_sheet_area(model, k_A, alpha) * model.I_sat)
    S = model.gamma * g2 / 6 * (1 / d**2 + 2 / (dfs - d) ** 2)
    T_S = 1 / S
    return S, T_S, (None if T_J is None else T_S / T_J)


def optimal_detuning(fine_structure: float, fixed: str = "force") -> float:
    """Detuning minimizing spontaneous emission, as a fraction-preserving function of Delta_fs.

    ``fixed="force"`` holds the state-dependent force constant (the Rabi
    frequency then grows as Delta); ``fixed="rabi"`` holds g constant.
    """
    if fixed == "force":
        f = lambda u: 1 / u + 2 * u / (1 - u) ** 2
    elif fixed == "rabi":
        f = lambda u: 1 / u**2 + 2 / (1 - u) ** 2
    else:
        raise ValueError("fixed must be 'force' or 'rabi'")
    res = minimize_scalar(f, bounds=(1e-6, 1 - 1e-6), method="bounded", options={"xatol": 1e-12})
    return res.x * fine_structure


def power_dissipation(V: float, Omega: float, C: float, R_chip: float) -> float:
    """P_D = V^2 C^2 R Omega^2 / 2."""
    return 0.5 * V**2 * C**2 * R_chip * Omega**2


def unique_operating_point(m, q, k_r, eta, alpha, C=None, R_chip=None,
                           charge: float = E_CHARGE) -> tuple[float, float, float | None]:
    """(V0, Omega0, P_D) fixed by q once r = k_r alpha.

    P_D = 8 e^4 eta^4 C^2 R / (k_r^8 m^4 q^4 alpha^2) when C and R_chip are given.
    """
    if not 0 < q < 0.9:
        raise ValueError(f"stability parameter q={q} outside (0, 0.9)")
    _positive(m=m, k_r=k_r, eta=eta, alpha=alpha)
    V0 = 2 * charge * eta / (m * k_r**2 * q)
    Om0 = V0 / alpha
    PD = None
    if C is not None and R_chip is not None:
        PD = 8 * charge**4 * eta**4 * C**2 * R_chip / (k_r**8 * m**4 * q**4 * alpha**2)
    return V0, Om0, PD


@dataclass(frozen=True)
class MetricsReport:
    """Figures of merit at one operating point, with the inputs that produced them."""

    F: float
    J: float
    beta: float
    T_J: float
    T_ndot: float
    K_sim: float
    E0: float
    S: float | None = None
    T_S: float | None = None
    L_sim: float | None = None
    P_D: float | None = None
    inputs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def metrics_report(F, m, omega, A, r, noise: NoiseModel, M_obs=1, nbar=0.0,
                   laser: tuple[LaserForceModel, float, float] | None = None,
                   P_D: float | None = None, provenance: dict | None = None) -> MetricsReport:
    """Assemble a report; ``laser`` is (model, k_A, alpha) when the force is optical."""
    c = coupling_and_beta(F, m, omega, A)
    T_n = heating_time(m, omega, r, noise)
    S = T_S = L = None
    if laser is not None:
        S, T_S, L = spontaneous_emission(*laser, T_J=c.T_J)
    inputs = {"F": F, "m": m, "omega": omega, "A": A, "r": r, "M_obs": M_obs, "nbar": nbar,
              "noise": asdict(noise)}
    if laser is not None:
        inputs["laser"] = {**asdict(laser[0]), "k_A": laser[1], "alpha": laser[2]}
    if provenance:
        inputs.update(provenance)
    return MetricsReport(F, c.J, c.beta, c.T_J, T_n, T_n / c.T_J, sim_error(F, m, omega, M_obs, nbar),
                         S, T_S, L, P_D, inputs)
