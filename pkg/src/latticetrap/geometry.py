"""Lattice site generation and planar rf electrode layouts.

All lengths are in meters. An :class:`ElectrodeLayout` is a set of closed
polylines in the z=0 plane: counterclockwise ``outer`` contours enclose
regions held at the rf amplitude, clockwise ``hole`` contours cut grounded
regions out of them. Everything outside the outer contours is grounded
(gapless plane).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "CellType",
    "LatticeSpec",
    "SiteIndex",
    "Contour",
    "ElectrodeLayout",
    "LayoutError",
    "generate_sites",
    "build_lattice_layout",
    "lattice_side_length",
    "build_five_wire",
    "regular_polygon",
    "signed_area",
    "central_site",
    "nearest_neighbors",
]

# aspect ratio b/a of the centred-rectangular conventional cell; with the
# centre-corner distance fixed to A this keeps both cell edges longer than A
CENTRED_RECT_ASPECT = math.sqrt(2.0)


class LayoutError(ValueError):
    pass


class CellType(str, Enum):
    SQUARE = "square"
    HEXAGONAL = "hexagonal"
    CENTERED_RECTANGULAR = "centered_rectangular"

    @classmethod
    def parse(cls, value) -> "CellType":
        if isinstance(value, CellType):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise LayoutError(
                f"unsupported cell type {value!r}; rectangular and oblique cells are not supported"
            ) from None


@dataclass(frozen=True)
class LatticeSpec:
    """Geometry of a polygon-hole lattice.

    ``R`` is the polygon circumradius, ``A`` the nearest-neighbour site
    separation and ``g`` the gap from the outermost polygons to the edge of
    the rf island.
    """

    cell_type: CellType
    M: int
    n_sides: int
    R: float
    A: float
    g: float
    polygon_orientation: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "cell_type", CellType.parse(self.cell_type))
        if self.M < 1:
            raise LayoutError("M must be >= 1")
        if self.n_sides < 3:
            raise LayoutError("polygons need at least 3 sides")
        if not (self.R > 0 and self.A > 0):
            raise LayoutError("R and A must be positive")
        if self.g < 0:
            raise LayoutError("g must be non-negative")
        if self.R >= self.A / 3:
            raise LayoutError(f"R={self.R:g} must be below A/3={self.A / 3:g}")

    @property
    def side_length(self) -> float:
        return lattice_side_length(self.M, self.A, self.R)

    @classmethod
    def from_g_over_L(cls, cell_type, M, n_sides, R, A, g_over_L, polygon_orientation=0.0):
        L = lattice_side_length(M, A, R)
        return cls(CellType.parse(cell_type), M, n_sides, R, A, g_over_L * L, polygon_orientation)


@dataclass(frozen=True)
class SiteIndex:
    i: int
    j: int
    position: tuple[float, float]


def lattice_side_length(M: int, A: float, R: float) -> float:
    """L = (M-1) A + 2R."""
    return (M - 1) * A + 2 * R


def generate_sites(cell_type, M: int, A: float) -> list[SiteIndex]:
    """Site centres of an M-per-side patch, centred on the origin.

    square: M x M grid. hexagonal: rhombic M x M patch of the triangular
    lattice (60 degree basis). centered_rectangular: M x M grid of cell
    corners plus the (M-1)^2 cell centres; centre-to-corner distance is A.
    """
    cell_type = CellType.parse(cell_type)
    if M < 1:
        raise LayoutError("M must be >= 1")
    if not A > 0:
        raise LayoutError("A must be positive")

    pts: list[tuple[int, int, float, float]] = []
    if cell_type is CellType.SQUARE:
        for i in range(M):
            for j in range(M):
                pts.append((i, j, i * A, j * A))
    elif cell_type is CellType.HEXAGONAL:
        h = A * math.sqrt(3) / 2
        for i in range(M):
            for j in range(M):
                pts.append((i, j, i * A + j * A / 2, j * h))
    else:
        # a^2 + b^2 = (2A)^2 with b = aspect * a
        a = 2 * A / math.sqrt(1 + CENTRED_RECT_ASPECT**2)
        b = CENTRED_RECT_ASPECT * a
        # corners on even (i, j), centres on odd (i, j) of a doubled index grid
        for i in range(M):
            for j in range(M):
                pts.append((2 * i, 2 * j, i * a, j * b))
        for i in range(M - 1):
            for j in range(M - 1):
                pts.append((2 * i + 1, 2 * j + 1, (i + 0.5) * a, (j + 0.5) * b))
        pts.sort(key=lambda p: (p[0], p[1]))

    xy = np.array([(p[2], p[3]) for p in pts])
    cx, cy = xy.mean(axis=0)
    return [SiteIndex(p[0], p[1], (p[2] - cx, p[3] - cy)) for p in pts]


def central_site(sites: Sequence[SiteIndex]) -> int:
    """Index of the site nearest the centroid; ties go to the smallest (i, j)."""
    xy = np.array([s.position for s in sites])
    d = np.hypot(*(xy - xy.mean(axis=0)).T)
    dmin = d.min()
    tied = [k for k in range(len(sites)) if d[k] <= dmin * (1 + 1e-9) + 1e-18]
    return min(tied, key=lambda k: (sites[k].i, sites[k].j))


def nearest_neighbors(sites: Sequence[SiteIndex], k: int, A: float) -> list[int]:
    p = np.array(sites[k].position)
    out = []
    for m, s in enumerate(sites):
        if m != k and abs(math.dist(p, s.position) - A) <= 1e-9 * A:
            out.append(m)
    return out


def signed_area(vertices) -> float:
    """Shoelace area; positive for counterclockwise loops."""
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def regular_polygon(center, radius, n, orientation=0.0, clockwise=False):
    """Closed (n+1, 2) vertex array of a regular n-gon."""
    k = np.arange(n + 1)
    sign = -1.0 if clockwise else 1.0
    th = orientation + sign * 2 * np.pi * k / n
    v = np.column_stack([center[0] + radius * np.cos(th), center[1] + radius * np.sin(th)])
    v[-1] = v[0]
    return v


@dataclass(frozen=True)
class Contour:
    vertices: np.ndarray
    kind: str  # "outer" or "hole"

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 4:
            raise LayoutError("contour needs at least 3 distinct vertices as (k, 2)")
        if not np.array_equal(v[0], v[-1]):
            raise LayoutError("contour is not closed")
        if self.kind not in ("outer", "hole"):
            raise LayoutError(f"unknown contour kind {self.kind!r}")
        area = signed_area(v[:-1])
        if self.kind == "outer" and area <= 0:
            raise LayoutError("outer contours must be counterclockwise")
        if self.kind == "hole" and area >= 0:
            raise LayoutError("hole contours must be clockwise")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def orientation(self) -> str:
        return "ccw" if self.kind == "outer" else "cw"

    @property
    def area(self) -> float:
        return signed_area(self.vertices[:-1])


@dataclass(frozen=True)
class ElectrodeLayout:
    contours: tuple[Contour, ...]
    rf_amplitude: float = 1.0
    _starts: np.ndarray = field(init=False, repr=False, compare=False)
    _ends: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        cs = tuple(self.contours)
        if not cs:
            raise LayoutError("layout has no contours")
        object.__setattr__(self, "contours", cs)
        starts = np.vstack([c.vertices[:-1] for c in cs])
        ends = np.vstack([c.vertices[1:] for c in cs])
        starts.setflags(write=False)
        ends.setflags(write=False)
        object.__setattr__(self, "_starts", starts)
        object.__setattr__(self, "_ends", ends)

    @property
    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        """(starts, ends), each (S, 2)."""
        return self._starts, self._ends

    def with_amplitude(self, V: float) -> "ElectrodeLayout":
        return ElectrodeLayout(self.contours, V)

    def merged(self, other: "ElectrodeLayout") -> "ElectrodeLayout":
        if other.rf_amplitude != self.rf_amplitude:
            raise LayoutError("cannot merge layouts at different rf amplitudes")
        return ElectrodeLayout(self.contours + other.contours, self.rf_amplitude)

    def validate(self) -> None:
        """Full check: simple contours, each hole inside exactly one outer."""
        from shapely.geometry import Polygon

        outers = [Polygon(c.vertices) for c in self.contours if c.kind == "outer"]
        holes = [Polygon(c.vertices) for c in self.contours if c.kind == "hole"]
        for p in outers + holes:
            if not p.is_valid:
                raise LayoutError("self-intersecting contour")
        for h in holes:
            owners = sum(1 for o in outers if o.contains(h))
            if owners != 1:
                raise LayoutError(f"hole contained by {owners} outer contours")
        for a in range(len(holes)):
            for b in range(a + 1, len(holes)):
                if holes[a].intersects(holes[b]):
                    raise LayoutError("overlapping holes")

    def to_dict(self) -> dict:
        return {
            "contours": [
                {"orientation": c.orientation, "kind": c.kind,
                 "vertices_um": (c.vertices * 1e6).tolist()}
                for c in self.contours
            ],
            "rf_amplitude_V": self.rf_amplitude,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "ElectrodeLayout":
        cs = []
        for c in d["contours"]:
            kind = c.get("kind") or ("outer" if c["orientation"] == "ccw" else "hole")
            cs.append(Contour(np.asarray(c["vertices_um"], dtype=float) * 1e-6, kind))
        return cls(tuple(cs), float(d["rf_amplitude_V"]))


def _rectangle(x0, x1, y0, y1) -> np.ndarray:
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]], dtype=float)


def build_lattice_layout(spec: LatticeSpec, rf_amplitude: float = 1.0,
                         sites: Iterable[SiteIndex] | None = None) -> ElectrodeLayout:
    """Rectangular rf island with one clockwise n-gon hole per site."""
    sites = list(sites) if sites is not None else generate_sites(spec.cell_type, spec.M, spec.A)
    xy = np.array([s.position for s in sites])
    if len(xy) > 1:
        d = np.hypot(*(xy[:, None, :] - xy[None, :, :]).transpose(2, 0, 1))
        np.fill_diagonal(d, np.inf)
        if d.min() <= 2 * spec.R:
            raise LayoutError("polygons overlap")
    holes = [
        Contour(regular_polygon(p, spec.R, spec.n_sides, spec.polygon_orientation, clockwise=True), "hole")
        for p in xy
    ]
    lo = xy.min(axis=0) - spec.R - spec.g
    hi = xy.max(axis=0) + spec.R + spec.g
    outer = Contour(_rectangle(lo[0], hi[0], lo[1], hi[1]), "outer")
    return ElectrodeLayout((outer, *holes), rf_amplitude)


def build_five_wire(rf_rail_width: float, central_width: float,
                    rail_length: float = 3000e-6, rf_amplitude: float = 1.0) -> ElectrodeLayout:
    """Two rf rails either side of a grounded centre electrode, rails along y."""
    if not (rf_rail_width > 0 and central_width > 0 and rail_length > 0):
        raise LayoutError("five-wire dimensions must be positive")
    x_in = central_width / 2
    x_out = x_in + rf_rail_width
    h = rail_length / 2
    left = Contour(_rectangle(-x_out, -x_in, -h, h), "outer")
    right = Contour(_rectangle(x_in, x_out, -h, h), "outer")
    return ElectrodeLayout((left, right), rf_amplitude)
