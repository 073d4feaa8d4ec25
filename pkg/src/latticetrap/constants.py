"""Physical constants and species/optical defaults (SI units throughout)."""

from scipy import constants as _c

E_CHARGE = _c.e
EPS0 = _c.epsilon_0
MU0 = _c.mu_0
HBAR = _c.hbar
AMU = _c.atomic_mass
M_ELECTRON = _c.m_e
EV = _c.electron_volt

YB171_MASS = 170.936323 * AMU

# 171Yb+ S1/2 - P1/2 line at 369.5 nm
YB_LINEWIDTH_HZ = 19.6e6
YB_GAMMA = 2 * _c.pi * YB_LINEWIDTH_HZ
YB_RESONANCE_WAVELENGTH = 369.5e-9
# two-level saturation intensity pi h c gamma / (3 lambda^3)
YB_ISAT = _c.pi * _c.h * _c.c * YB_GAMMA / (3 * YB_RESONANCE_WAVELENGTH**3)
YB_RAMAN_WAVELENGTH = 355e-9
YB_FINE_STRUCTURE_HZ = 100e12

UM = 1e-6
V_US = 1e-6  # 1 V/MHz = 1 V*us, the natural unit for alpha = V/Omega
