"""Electric field of a gapless planar rf layout and the ponderomotive pseudopotential.

An electrode region at potential V bounded by the closed path C produces,
at a point x above the plane,

    E(x) = (V / 2pi) * sum_C  ds x (x - x') / |x - x'|^3

with C counterclockwise around the region (holes clockwise). Each straight
segment is integrated in closed form, the same kernel as the finite-wire
Biot-Savart law.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import E_CHARGE
from .geometry import ElectrodeLayout

__all__ = [
    "PseudoContext",
    "SingularPointError",
    "field_at",
    "pseudopotential",
    "field_jacobian",
    "pseudo_hessian",
    "assembled_pseudo_hessian",
    "fd_step",
]

# points x segments per chunk
_CHUNK = 400_000


class SingularPointError(ValueError):
    """Field requested on or below the electrode plane."""


@dataclass(frozen=True)
class PseudoContext:
    mass: float
    drive: float  # Omega, rad/s
    rf_amplitude: float  # V
    charge: float = E_CHARGE

    def __post_init__(self):
        for name in ("mass", "drive", "rf_amplitude", "charge"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def alpha(self) -> float:
        return self.rf_amplitude / self.drive

    @property
    def prefactor(self) -> float:
        """Psi = prefactor * |E_unit|^2 where E_unit is the field per volt."""
        return self.charge**2 * self.rf_amplitude**2 / (4 * self.mass * self.drive**2)


def _kernel(starts, ends, pts):
    # pts (K, 3); starts/ends (S, 2)
    dx = ends[:, 0] - starts[:, 0]
    dy = ends[:, 1] - starts[:, 1]
    L2 = dx * dx + dy * dy
    ax = pts[:, 0:1] - starts[:, 0]
    ay = pts[:, 1:2] - starts[:, 1]
    bx = pts[:, 0:1] - ends[:, 0]
    by = pts[:, 1:2] - ends[:, 1]
    z = pts[:, 2:3]
    z2 = z * z
    r1 = np.sqrt(ax * ax + ay * ay + z2)
    r2 = np.sqrt(bx * bx + by * by + z2)
    s = r1 + r2
    # 2 (r1 + r2) / (r1 r2 ((r1 + r2)^2 - L^2)), well conditioned off the segment line
    f = 2 * s / (r1 * r2 * (s * s - L2))
    # dl x a with dl = (dx, dy, 0), a = (ax, ay, z)
    ex = (dy * z * f).sum(axis=1)
    ey = (-dx * z * f).sum(axis=1)
    ez = ((dx * ay - dy * ax) * f).sum(axis=1)
    return np.column_stack([ex, ey, ez])


def field_at(layout: ElectrodeLayout, points) -> np.ndarray:
    """Field in V/m at one point (3,) or many points (K, 3)."""
    p = np.asarray(points, dtype=float)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    if p.shape[1] != 3:
        raise ValueError("points must have 3 coordinates")
    if np.any(~(p[:, 2] > 0)):
        raise SingularPointError("field is only defined for z > 0")
    starts, ends = layout.segments
    step = max(1, _CHUNK // len(starts))
    out = np.empty_like(p)
    for k in range(0, len(p), step):
        out[k:k + step] = _kernel(starts, ends, p[k:k + step])
    out *= layout.rf_amplitude / (2 * np.pi)
    return out[0] if single else out


def pseudopotential(layout: ElectrodeLayout, ctx: PseudoContext, points) -> np.ndarray:
    """e^2 |E|^2 / (4 m Omega^2) in joules, with E at the context's rf amplitude."""
    E = field_at(layout, points) / layout.rf_amplitude
    return ctx.prefactor * np.sum(E * E, axis=-1)


def fd_step(z: float) -> float:
    return max(1e-9, 1e-4 * z)


def _check_step(point, h):
    if point[2] - 2 * h <= 0:
        raise SingularPointError("finite-difference stencil reaches the electrode plane")


def field_jacobian(layout: ElectrodeLayout, point) -> np.ndarray:
    """J[i, k] = dE_i/dx_k by central differences."""
    x = np.asarray(point, dtype=float)
    h = fd_step(x[2])
    _check_step(x, h)
    offs = np.vstack([np.eye(3) * h, -np.eye(3) * h])
    E = field_at(layout, x + offs)
    return ((E[:3] - E[3:]) / (2 * h)).T


def pseudo_hessian(layout: ElectrodeLayout, ctx: PseudoContext, point) -> np.ndarray:
    """Hessian of the pseudopotential (J/m^2) by central differences, symmetrised."""
    x = np.asarray(point, dtype=float)
    h = fd_step(x[2])
    _check_step(x, h)
    I = np.eye(3) * h
    pts = [x]
    for i in range(3):
        pts += [x + I[i], x - I[i]]
    pairs = [(0, 1), (0, 2), (1, 2)]
    for i, j in pairs:
        pts += [x + I[i] + I[j], x + I[i] - I[j], x - I[i] + I[j], x - I[i] - I[j]]
    f = pseudopotential(layout, ctx, np.array(pts))
    H = np.empty((3, 3))
    for i in range(3):
        H[i, i] = (f[1 + 2 * i] - 2 * f[0] + f[2 + 2 * i]) / h**2
    for n, (i, j) in enumerate(pairs):
        pp, pm, mp, mm = f[7 + 4 * n: 11 + 4 * n]
        H[i, j] = H[j, i] = (pp - pm - mp + mm) / (4 * h * h)
    return 0.5 * (H + H.T)


def assembled_pseudo_hessian(layout: ElectrodeLayout, ctx: PseudoContext, point) -> np.ndarray:
    """Hessian from d2|E|^2 = 2 (J^T J + sum_k E_k d2E_k), derivatives of the field only."""
    x = np.asarray(point, dtype=float)
    h = fd_step(x[2])
    _check_step(x, h)
    scale = 1.0 / layout.rf_amplitude
    E = field_at(layout, x) * scale
    J = field_jacobian(layout, x) * scale
    # second derivatives d2E_k/dx_i dx_j from differences of the Jacobian
    d2E = np.empty((3, 3, 3))
    for j in range(3):
        d = np.zeros(3)
        d[j] = h
        d2E[:, :, j] = (field_jacobian(layout, x + d) - field_jacobian(layout, x - d)) * scale / (2 * h)
    T = np.einsum("k,kij->ij", E, d2E)
    T = 0.5 * (T + T.T)
    return 2 * ctx.prefactor * (J.T @ J + T)
