"""Five-wire surface trap benchmark against the infinite-rail analytic solution."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import UM, YB171_MASS
from .geometry import build_five_wire
from .trap import DriveAndSpecies, characterize_site

__all__ = ["FiveWireRow", "RowResult", "BENCHMARK_ROWS_AS_LISTED", "BENCHMARK_ROWS", "infinite_rail_height", "run_rows",
           "R_TOL", "OMEGA_TOL"]

R_TOL = 0.02
OMEGA_TOL = 0.03


@dataclass(frozen=True)
class FiveWireRow:
    rf_width_um: float
    centre_width_um: float
    V: float
    f_MHz: float
    r_ref_um: float  # reference simulation
    w_ref_MHz: float
    r_analytic_um: float
    w_analytic_MHz: float
    note: str = ""


# Benchmark parameters as originally listed.
BENCHMARK_ROWS_AS_LISTED = (
    FiveWireRow(100, 50, 250, 75, 55.8, 6.86, 55.9, 6.87),
    FiveWireRow(100, 50, 500, 60, 55.8, 4.29, 55.9, 4.29),
    FiveWireRow(200, 100, 250, 30, 110.1, 2.17, 111.8, 2.20),
    FiveWireRow(200, 100, 500, 40, 110.1, 3.26, 111.8, 3.30),
    FiveWireRow(500, 150, 250, 20, 165.4, 1.48, 167.7, 1.52),
    FiveWireRow(500, 150, 500, 25, 165.4, 2.37, 167.7, 2.43),
)

# Parameters consistent with the reference results: the voltages of the
# first two rows are exchanged, and the last two rows use 300 um rails
# (the analytic height sqrt(a/2 (a/2 + b)) gives 167.7 um only for b = 300 um).
BENCHMARK_ROWS = (
    FiveWireRow(100, 50, 500, 75, 55.8, 6.86, 55.9, 6.87, "voltage exchanged with next row"),
    FiveWireRow(100, 50, 250, 60, 55.8, 4.29, 55.9, 4.29, "voltage exchanged with previous row"),
    BENCHMARK_ROWS_AS_LISTED[2],
    BENCHMARK_ROWS_AS_LISTED[3],
    FiveWireRow(300, 150, 250, 20, 165.4, 1.48, 167.7, 1.52, "rf width 300 um"),
    FiveWireRow(300, 150, 500, 25, 165.4, 2.37, 167.7, 2.43, "rf width 300 um"),
)


def infinite_rail_height(rf_width: float, centre_width: float) -> float:
    """Null height above a symmetric five-wire trap with infinitely long rails."""
    a = centre_width / 2
    return math.sqrt(a * (a + rf_width))


@dataclass(frozen=True)
class RowResult:
    row: FiveWireRow
    r_um: float
    w_MHz: float
    secular_MHz: tuple
    r_analytic_calc_um: float
    status: str

    @property
    def r_dev(self) -> float:
        return self.r_um / self.row.r_ref_um - 1

    @property
    def w_dev(self) -> float:
        return self.w_MHz / self.row.w_ref_MHz - 1

    @property
    def passed(self) -> bool:
        return self.status == "trap" and abs(self.r_dev) <= R_TOL and abs(self.w_dev) <= OMEGA_TOL


def run_rows(rows=BENCHMARK_ROWS, mass: float = YB171_MASS, rail_length: float = 3000 * UM) -> list[RowResult]:
    out = []
    for row in rows:
        b, a = row.rf_width_um * UM, row.centre_width_um * UM
        layout = build_five_wire(b, a, rail_length, row.V)
        drive = DriveAndSpecies(row.V, 2 * math.pi * row.f_MHz * 1e6, mass)
        site = characterize_site(layout, drive, (0.0, 0.0, a), with_depth=False)
        sec = tuple(float(w) for w in np.asarray(site.secular) / (2 * math.pi * 1e6))
        out.append(RowResult(row, site.r / UM, site.omega / (2 * math.pi * 1e6), sec,
                             infinite_rail_height(b, a) / UM, site.status))
    return out
