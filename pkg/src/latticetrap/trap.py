"""rf-null finding and per-site trap properties."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .constants import E_CHARGE, EV
from .field import PseudoContext, field_at, field_jacobian, pseudo_hessian, pseudopotential
from .geometry import ElectrodeLayout, SiteIndex, nearest_neighbors
from .parallel import parallel_map

logger = logging.getLogger(__name__)

__all__ = [
    "DriveAndSpecies",
    "NullResult",
    "SecularResult",
    "DepthResult",
    "TrapSite",
    "UntrappedError",
    "OperatingPointRejected",
    "find_null",
    "secular_frequencies",
    "trap_depth",
    "extract_eta_zeta",
    "stability_q",
    "check_q",
    "characterize_site",
    "characterize_lattice",
    "locate_null",
    "Q_MAX",
]

Q_MAX = 0.9
# relative null quality |E| z / V
NULL_TOL = 1e-10
MAX_ITER = 100
MAX_HALVINGS = 30
# modes softer than this fraction of the stiffest are treated as unconfined
CONFINED_FRACTION = 1e-2
VERTICAL_SPAN = 50.0
RAY_SAMPLES = 200
PATH_SAMPLES = 200
ESCAPE_FACTOR = 10.0


class UntrappedError(RuntimeError):
    pass


class OperatingPointRejected(ValueError):
    pass


@dataclass(frozen=True)
class DriveAndSpecies:
    V: float
    Omega: float
    mass: float
    label: str = "171Yb+"
    charge: float = E_CHARGE

    def __post_init__(self):
        if not (self.V > 0 and self.Omega > 0 and self.mass > 0):
            raise ValueError("V, Omega and mass must be positive")

    @property
    def alpha(self) -> float:
        return self.V / self.Omega

    @property
    def context(self) -> PseudoContext:
        return PseudoContext(self.mass, self.Omega, self.V, self.charge)

    @classmethod
    def from_alpha(cls, alpha: float, mass: float, V: float = 100.0, **kw) -> "DriveAndSpecies":
        return cls(V, V / alpha, mass, **kw)


def _as_context(ctx) -> PseudoContext:
    return ctx.context if isinstance(ctx, DriveAndSpecies) else ctx


@dataclass(frozen=True)
class NullResult:
    position: np.ndarray
    residual: float
    iterations: int
    status: str  # "ok" | "not-converged" | "escaped"

    @property
    def converged(self) -> bool:
        return self.status == "ok"


def find_null(layout: ElectrodeLayout, initial_guess, tol: float = NULL_TOL,
              max_iter: int = MAX_ITER) -> NullResult:
    """Gauss-Newton on the residual E(x) with step halving on |E|^2."""
    x = np.array(initial_guess, dtype=float)
    if not x[2] > 0:
        raise ValueError("initial guess must lie above the plane")
    V = abs(layout.rf_amplitude)
    starts, _ = layout.segments
    # |E| -> 0 far above any finite layout; treat running off there as an escape
    z_cap = ESCAPE_FACTOR * (np.ptp(starts, axis=0).max() + x[2])
    E = field_at(layout, x)
    f = E @ E
    for it in range(1, max_iter + 1):
        if math.sqrt(f) * x[2] <= tol * V:
            return NullResult(x, math.sqrt(f), it - 1, "ok")
        J = field_jacobian(layout, x)
        dx = np.linalg.lstsq(J, -E, rcond=1e-12)[0]
        t = 1.0
        for _ in range(MAX_HALVINGS):
            xn = x + t * dx
            if xn[2] > 0:
                En = field_at(layout, xn)
                fn = En @ En
                if fn < f:
                    break
            t *= 0.5
        else:
            # stalled: no decrease along the Gauss-Newton direction
            status = "ok" if math.sqrt(f) * x[2] <= 1e3 * tol * V else "not-converged"
            return NullResult(x, math.sqrt(f), it, status)
        x, E, f = xn, En, fn
        if x[2] > z_cap:
            return NullResult(x, math.sqrt(f), it, "escaped")
    status = "ok" if math.sqrt(f) * x[2] <= tol * V else "not-converged"
    return NullResult(x, math.sqrt(f), max_iter, status)


@dataclass(frozen=True)
class SecularResult:
    omegas: np.ndarray  # ascending, rad/s
    axes: np.ndarray  # columns are principal axes
    eigenvalues: np.ndarray  # J/m^2
    metric_index: int
    is_minimum: bool

    @property
    def omega(self) -> float:
        return float(self.omegas[self.metric_index])


def secular_frequencies(layout: ElectrodeLayout, ctx, null) -> SecularResult:
    """Principal secular frequencies sqrt(lambda_i / m) of the pseudopotential.

    The frequency used for figures of merit is the softest confined mode;
    modes below 1% of the stiffest (e.g. along the rails of a linear trap)
    count as unconfined.
    """
    ctx = _as_context(ctx)
    H = pseudo_hessian(layout, ctx, null)
    lam, vec = np.linalg.eigh(H)
    is_min = bool(lam[0] >= -1e-9 * abs(lam[-1]))
    w = np.sqrt(np.clip(lam, 0, None) / ctx.mass)
    confined = np.nonzero(w >= CONFINED_FRACTION * w[-1])[0]
    return SecularResult(w, vec, lam, int(confined[0]), is_min)


@dataclass(frozen=True)
class DepthResult:
    depth: float  # J
    vertical: float | None
    interwell: float | None
    channel: str

    @property
    def depth_eV(self) -> float:
        return self.depth / EV


def _path_max(layout, ctx, a, b, n, logspaced=False):
    """Largest pseudopotential on the segment a->b, refined; None if at the far end."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    if logspaced:
        t = (np.logspace(0, math.log10(b[2] / a[2]), n) - 1) / (b[2] / a[2] - 1)
    else:
        t = np.linspace(0.0, 1.0, n)
    pts = a + t[:, None] * (b - a)
    psi = pseudopotential(layout, ctx, pts)
    k = int(np.argmax(psi))
    if k == n - 1:
        return None
    if k == 0:
        return float(psi[0])
    lo, hi = t[k - 1], t[k + 1]
    res = minimize_scalar(lambda s: -pseudopotential(layout, ctx, a + s * (b - a)),
                          bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    return max(float(-res.fun), float(psi[k]))


def trap_depth(layout: ElectrodeLayout, ctx, null, neighbor_nulls: Sequence = ()) -> DepthResult:
    """Lowest barrier over the vertical escape ray and straight paths to neighbouring nulls."""
    ctx = _as_context(ctx)
    x0 = np.asarray(null, float)
    psi0 = float(pseudopotential(layout, ctx, x0))
    top = x0.copy()
    top[2] = VERTICAL_SPAN * x0[2]
    vertical = _path_max(layout, ctx, x0, top, RAY_SAMPLES, logspaced=True)
    inter = [_path_max(layout, ctx, x0, nb, PATH_SAMPLES) for nb in neighbor_nulls]
    inter = [v for v in inter if v is not None]
    interwell = min(inter) if inter else None
    cands = [(v, c) for v, c in ((vertical, "vertical"), (interwell, "interwell")) if v is not None]
    if not cands:
        raise UntrappedError("no escape barrier found within the search bounds")
    barrier, channel = min(cands)
    return DepthResult(
        barrier - psi0,
        None if vertical is None else vertical - psi0,
        None if interwell is None else interwell - psi0,
        channel,
    )


def extract_eta_zeta(r: float, omega: float, depth: float, ctx) -> tuple[float, float]:
    """eta_geo = sqrt(2) m Omega r^2 omega / (e V); zeta = T_D pi^2 m / (e^2 alpha^2).

    ``depth`` in joules; zeta carries units of 1/m^2.
    """
    ctx = _as_context(ctx)
    e, m = ctx.charge, ctx.mass
    eta = math.sqrt(2) * m * ctx.drive * r**2 * omega / (e * ctx.rf_amplitude)
    zeta = depth * math.pi**2 * m / (e**2 * ctx.alpha**2)
    return eta, zeta


def stability_q(eta: float, r: float, ctx) -> float:
    """q = 2 e eta V / (m r^2 Omega^2)."""
    ctx = _as_context(ctx)
    return 2 * ctx.charge * eta * ctx.rf_amplitude / (ctx.mass * r**2 * ctx.drive**2)


def check_q(q: float) -> float:
    if not 0 < q < Q_MAX:
        raise OperatingPointRejected(f"stability parameter q={q:.4g} outside (0, {Q_MAX})")
    return q


@dataclass(frozen=True)
class TrapSite:
    index: tuple[int, int]
    null_position: np.ndarray
    status: str  # "trap" | "saddle" | "no-null" | "untrapped"
    residual: float = math.nan
    secular: np.ndarray = field(default_factory=lambda: np.full(3, np.nan))
    axes: np.ndarray = field(default_factory=lambda: np.full((3, 3), np.nan))
    omega: float = math.nan
    depth_eV: float = math.nan
    depth_channel: str = ""
    eta_geo: float = math.nan
    zeta: float = math.nan
    q: float = math.nan

    @property
    def r(self) -> float:
        return float(self.null_position[2])

    @property
    def ok(self) -> bool:
        return self.status == "trap"

    @property
    def q_accepted(self) -> bool:
        return 0 < self.q < Q_MAX


def _finish_site(layout, ctx, index, nres: NullResult, neighbor_nulls, with_depth) -> TrapSite:
    if not nres.converged:
        return TrapSite(index, nres.position, "no-null", nres.residual)
    x = nres.position
    sec = secular_frequencies(layout, ctx, x)
    base = TrapSite(index, x, "trap", nres.residual, sec.omegas, sec.axes, sec.omega)
    if not sec.is_minimum:
        return replace(base, status="saddle")
    eta, _ = extract_eta_zeta(x[2], sec.omega, 0.0, ctx)
    q = stability_q(eta, x[2], ctx)
    site = replace(base, eta_geo=eta, q=q)
    if eta > 1:
        logger.warning("eta_geo=%.3g > 1 at site %s: characterization failure", eta, index)
    if not with_depth:
        return site
    try:
        d = trap_depth(layout, ctx, x, neighbor_nulls)
    except UntrappedError:
        return replace(site, status="untrapped")
    _, zeta = extract_eta_zeta(x[2], sec.omega, d.depth, ctx)
    return replace(site, depth_eV=d.depth_eV, depth_channel=d.channel, zeta=zeta)


def characterize_site(layout: ElectrodeLayout, ctx, initial_guess, neighbor_nulls=(),
                      index=(0, 0), with_depth=True) -> TrapSite:
    ctx = _as_context(ctx)
    nres = find_null(layout, initial_guess)
    return _finish_site(layout, ctx, index, nres, neighbor_nulls, with_depth)


def locate_null(layout: ElectrodeLayout, xy, heights, max_offset: float) -> NullResult:
    """First converged null above ``xy`` over a list of seed heights.

    Nulls more than ``max_offset`` sideways from ``xy`` belong to another
    site and are rejected.
    """
    last = None
    for h in heights:
        res = find_null(layout, (xy[0], xy[1], h))
        if res.converged and math.hypot(res.position[0] - xy[0], res.position[1] - xy[1]) <= max_offset:
            return res
        if last is None or (res.converged and not last.converged):
            last = res
    if last.converged:
        last = replace(last, status="not-converged")
    return last


def _null_task(args):
    layout, xy, heights, max_offset = args
    return locate_null(layout, xy, heights, max_offset)


def _site_task(args):
    layout, ctx, index, nres, nbs, with_depth = args
    return _finish_site(layout, ctx, index, nres, nbs, with_depth)


def characterize_lattice(layout: ElectrodeLayout, ctx, sites: Sequence[SiteIndex], A: float,
                         R: float | None = None, seed_height: float | None = None, with_depth=True,
                         only: Sequence[int] | None = None, workers: int = 1) -> list[TrapSite]:
    """One TrapSite per lattice site, seeded above each polygon centre.

    The first seed sits at ``seed_height`` (default: the polygon radius R,
    or A/4 without R); further heights are tried if it fails. ``only``
    restricts full characterization to a subset of sites; nulls of their
    nearest neighbours are still located for the inter-well barrier.
    """
    ctx = _as_context(ctx)
    first = seed_height if seed_height is not None else (R if R is not None else 0.25 * A)
    heights = [first] + [f * A for f in (0.5, 0.125, 0.75) if not math.isclose(f * A, first)]
    targets = list(range(len(sites))) if only is None else list(only)
    need = set(targets)
    if with_depth:
        for k in targets:
            need.update(nearest_neighbors(sites, k, A))
    need = sorted(need)
    jobs = [(layout, sites[k].position, heights, 0.5 * A) for k in need]
    nulls = dict(zip(need, parallel_map(_null_task, jobs, workers)))
    tasks = []
    for k in targets:
        nbs = []
        if with_depth:
            nbs = [nulls[m].position for m in nearest_neighbors(sites, k, A) if nulls[m].converged]
        tasks.append((layout, ctx, (sites[k].i, sites[k].j), nulls[k], nbs, with_depth))
    out = parallel_map(_site_task, tasks, workers)
    if out and all(not s.ok for s in out):
        raise UntrappedError("characterization failed at every site")
    return out
