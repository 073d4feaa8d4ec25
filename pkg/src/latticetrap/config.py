"""Run configuration: a flat TOML file of typed keys, overridable from the command line."""

from __future__ import annotations

import dataclasses
import json
import math
import sys
import types
import typing
from dataclasses import dataclass, field, fields

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .constants import AMU, YB171_MASS, YB_ISAT, YB_LINEWIDTH_HZ
from .optimize import DEFAULT_SIDES

__all__ = ["ConfigError", "RunConfig", "load_config"]


class ConfigError(ValueError):
    """Malformed or physically infeasible configuration."""


@dataclass(frozen=True)
class RunConfig:
    # species
    species: str = "171Yb+"
    mass_amu: float = YB171_MASS / AMU
    # noise: preset name, exponent, optional explicit Xi (V^2 m^(x-2))
    noise: str = "cryogenic"
    noise_exponent: float = 4.0
    xi: float | None = None
    # drive constraints
    q: float = 0.5
    t_min_eV: float = 0.1
    # lattice
    cell_type: str = "square"
    M: int = 3
    n_sides_homog: int = 100
    n_sides_scan: int = 25
    rho_ref: float = 0.25
    g_over_L: float | None = None
    g_lo: float = 0.025
    g_hi: float = 1.5
    g_step: float = 0.025
    homog_slices: list[float] = field(default_factory=lambda: [0.1, 0.2, 0.5, 1.0])
    # side sweep at a fixed geometry
    sides: list[int] = field(default_factory=lambda: list(DEFAULT_SIDES))
    sides_R_um: float = 14.0
    sides_A_um: float = 52.0
    # (A, R) scan
    A_min_um: float = 20.0
    A_max_um: float = 200.0
    R_min_um: float | None = None
    resolution_um: float = 5.0
    # scaling study
    scaling_M: list[int] = field(default_factory=lambda: [2, 3, 4, 5])
    scaling_masses_amu: list[float] = field(default_factory=lambda: [YB171_MASS / AMU])
    # case study
    r_min_um: float = 30.0
    detuning_THz: float = 33.0
    fine_structure_THz: float = 100.0
    wavelength_nm: float = 355.0
    linewidth_MHz: float = YB_LINEWIDTH_HZ / 1e6
    isat_W_m2: float = YB_ISAT
    sheet_width_um: float = 25.0
    cyclic_detuning: bool = True
    E0_max: float = 0.25
    M_obs: int = 1
    nbar: float = 0.0
    mag_ksim_target: float = 2.0
    sweep_points: int = 25
    sweep_alpha_min_Vus: float = 0.05
    sweep_alpha_max_Vus: float = 1.5
    sweep_span: float = 10.0
    # field map
    map_points: int = 61
    map_extent: float = 1.5
    map_height_um: float | None = None
    # run
    out_dir: str = "out"
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        errs = []
        if not self.mass_amu > 0:
            errs.append("mass_amu must be positive")
        if not 0 < self.q < 0.9:
            errs.append("q must lie in (0, 0.9)")
        if not self.t_min_eV > 0:
            errs.append("t_min_eV must be positive")
        if self.noise not in ("room-temperature", "cryogenic", "custom"):
            errs.append(f"unknown noise preset {self.noise!r}")
        if self.noise == "custom" and self.xi is None:
            errs.append("noise = 'custom' requires xi")
        if not 2 <= self.noise_exponent <= 4:
            errs.append("noise_exponent must lie in [2, 4]")
        if self.M < 1 or self.n_sides_homog < 3 or self.n_sides_scan < 3:
            errs.append("M >= 1 and polygon sides >= 3 required")
        if not 0 < self.rho_ref < 1 / 3:
            errs.append("rho_ref must lie in (0, 1/3)")
        if not (0 < self.g_lo < self.g_hi <= 1.5 and self.g_step > 0):
            errs.append("g/L range must satisfy 0 < g_lo < g_hi <= 1.5")
        if not self.resolution_um > 0:
            errs.append("resolution_um must be positive")
        if not 0 < self.detuning_THz < self.fine_structure_THz:
            errs.append("detuning must lie in (0, fine_structure)")
        if not self.E0_max > 0:
            errs.append("E0_max must be positive")
        if not self.r_min_um > 0:
            errs.append("r_min_um must be positive")
        if not self.sides_R_um < self.sides_A_um / 3:
            errs.append("sides_R_um must be below sides_A_um / 3")
        if self.threads < 0:
            errs.append("threads must be >= 0")
        if errs:
            raise ConfigError("; ".join(errs))

    def to_dict(self) -> dict:
        return {k: v for k, v in dataclasses.asdict(self).items() if v is not None}

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def replace(self, **kw) -> "RunConfig":
        return dataclasses.replace(self, **kw)

    @property
    def mass(self) -> float:
        return self.mass_amu * AMU

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(d) - set(known))
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        hints = typing.get_type_hints(cls)
        return cls(**{k: _coerce(k, v, hints[k]) for k, v in d.items()})


def _coerce(key, value, tp):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin in (typing.Union, types.UnionType):
        inner = [a for a in args if a is not type(None)]
        return None if value is None else _coerce(key, value, inner[0])
    if origin is list:
        if not isinstance(value, list):
            raise ConfigError(f"{key}: expected a list")
        return [_coerce(key, v, args[0]) for v in value]
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true/false")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(f"{key}: expected a finite number")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string")
        return value
    raise ConfigError(f"{key}: unsupported type")


def load_config(path=None, **overrides) -> RunConfig:
    """Defaults, then the TOML file, then non-None keyword overrides."""
    data = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        nested = [k for k, v in data.items() if isinstance(v, dict)]
        if nested:
            raise ConfigError(f"tables are not supported (keys: {', '.join(nested)})")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_dict(data)
