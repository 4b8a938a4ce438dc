"""Human-readable run configuration with explicit unit suffixes.

The file format is INI-style.  Every dimensional value carries a unit
suffix ("bias = 2050 Oe", "dx = 5 um", "t_end = 3 ns"); the parser
normalizes everything to SI.  Saturation magnetization accepts either
"A/m" directly or "G", the latter interpreted as a 4*pi*Ms value in Gauss.

Sections::

    [grid]        nx, ny, nz, dx, dy, dz
    [background]  optional background material (sigma, eps_r)
    [material:*]  box = i0 i1 j0 j1 k0 k1 (half-open cell ranges) plus
                  sigma, eps_r, Ms, alpha, bias, bias_direction
    [source]      f0, Tp, amplitude, location, polarization
    [boundaries]  per-face x0/x1/y0/y1/z0/z1 in {PEC, PMC, MUR1}
    [run]         cfl_factor, t_end, llg_tol, llg_max_iters
    [probes]      name = component i j k
    [sweep]       bias_start/bias_stop/bias_step or bias_list,
                  direction, spectrum_probe
"""

from __future__ import annotations

import configparser
import re

import numpy as np

from . import em, llg
from .constants import gauss_4piMs_to_si, oersted_to_si
from .grid import GridSpec
from .materials import MaterialCell, MaterialMap
from .sim import SimConfig


class ConfigError(ValueError):
    def __init__(self, message: str, section: str | None = None,
                 option: str | None = None):
        where = f" [{section}]" if section else ""
        where += f" {option}" if option else ""
        super().__init__(f"config error{where}: {message}")
        self.section = section
        self.option = option


_SCALE_UNITS = {
    "m": 1.0, "mm": 1e-3, "um": 1e-6, "nm": 1e-9,
    "s": 1.0, "ms": 1e-3, "ns": 1e-9, "ps": 1e-12, "fs": 1e-15,
    "Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9,
    "A/m": 1.0, "V/m": 1.0, "S/m": 1.0,
}
_CONVERT_UNITS = {
    "Oe": oersted_to_si,
    "G": gauss_4piMs_to_si,
}
_QUANTITY_RE = re.compile(r"^\s*([-+0-9.eE]+)\s*([A-Za-z/]*)\s*$")


def parse_quantity(text: str) -> float:
    """Parse "2050 Oe" / "5 um" / "0.003" into an SI float."""
    m = _QUANTITY_RE.match(text)
    if not m:
        raise ValueError(f"cannot parse quantity {text!r}")
    try:
        value = float(m.group(1))
    except ValueError:
        raise ValueError(f"cannot parse number in {text!r}") from None
    unit = m.group(2)
    if not unit:
        return value
    if unit in _SCALE_UNITS:
        return value * _SCALE_UNITS[unit]
    if unit in _CONVERT_UNITS:
        return _CONVERT_UNITS[unit](value)
    raise ValueError(f"unknown unit {unit!r} in {text!r}")


def _get(cp: configparser.ConfigParser, section: str, option: str,
         default=None, parse=parse_quantity):
    if not cp.has_option(section, option):
        if default is not None:
            return default
        raise ConfigError("missing required option", section, option)
    raw = cp.get(section, option)
    try:
        return parse(raw)
    except ValueError as exc:
        raise ConfigError(str(exc), section, option) from None


def _vector(text: str) -> tuple[float, float, float]:
    parts = text.split()
    if len(parts) != 3:
        raise ValueError(f"expected 3 components, got {text!r}")
    return tuple(float(p) for p in parts)


def _int_triple(text: str) -> tuple[int, int, int]:
    parts = text.split()
    if len(parts) != 3:
        raise ValueError(f"expected 3 indices, got {text!r}")
    return tuple(int(p) for p in parts)


def load_config(path) -> SimConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = cp.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")
    for required in ("grid", "source", "run", "probes"):
        if not cp.has_section(required):
            raise ConfigError("missing required section", required)

    grid = GridSpec(
        nx=int(_get(cp, "grid", "nx", parse=float)),
        ny=int(_get(cp, "grid", "ny", parse=float)),
        nz=int(_get(cp, "grid", "nz", parse=float)),
        dx=_get(cp, "grid", "dx"),
        dy=_get(cp, "grid", "dy"),
        dz=_get(cp, "grid", "dz"),
    )

    background = MaterialCell(
        sigma=_get(cp, "background", "sigma", 0.0) if cp.has_section("background") else 0.0,
        eps_r=_get(cp, "background", "eps_r", 1.0) if cp.has_section("background") else 1.0,
    )
    materials = MaterialMap(grid.cell_shape, background)
    for section in cp.sections():
        if not section.startswith("material:"):
            continue
        box = _get(cp, section, "box", parse=lambda s: [int(p) for p in s.split()])
        if len(box) != 6:
            raise ConfigError("box needs 6 integers (i0 i1 j0 j1 k0 k1)",
                              section, "box")
        bias_mag = _get(cp, section, "bias", 0.0)
        bias_dir = _get(cp, section, "bias_direction", (1.0, 0.0, 0.0),
                        parse=_vector)
        n = np.linalg.norm(bias_dir)
        if n == 0:
            raise ConfigError("bias_direction must be nonzero", section)
        cell = MaterialCell(
            sigma=_get(cp, section, "sigma", 0.0),
            eps_r=_get(cp, section, "eps_r", 1.0),
            Ms=_get(cp, section, "Ms", 0.0),
            alpha=_get(cp, section, "alpha", 0.0),
            Hbias=tuple(bias_mag * d / n for d in bias_dir),
        )
        try:
            materials.fill_box(cell, *box)
        except ValueError as exc:
            raise ConfigError(str(exc), section, "box") from None
    materials.freeze()

    source = em.SourceSpec(
        f0=_get(cp, "source", "f0"),
        Tp=_get(cp, "source", "Tp"),
        amplitude=_get(cp, "source", "amplitude", 1.0),
        location=_get(cp, "source", "location", parse=_int_triple),
        polarization=_get(cp, "source", "polarization", (1.0, 0.0, 0.0),
                          parse=_vector),
    )

    faces = {}
    if cp.has_section("boundaries"):
        for face in ("x0", "x1", "y0", "y1", "z0", "z1"):
            if cp.has_option("boundaries", face):
                faces[face] = cp.get("boundaries", face).strip()
    try:
        boundaries = em.BoundarySpec(**faces)
    except ValueError as exc:
        raise ConfigError(str(exc), "boundaries") from None

    probes = []
    for name, raw in cp.items("probes"):
        parts = raw.split()
        if len(parts) != 4:
            raise ConfigError("probe needs: component i j k", "probes", name)
        probes.append((parts[0], int(parts[1]), int(parts[2]), int(parts[3])))

    bias_sweep: tuple[float, ...] = ()
    bias_direction = (1.0, 0.0, 0.0)
    spectrum_probe = 0
    if cp.has_section("sweep"):
        if cp.has_option("sweep", "bias_list"):
            bias_sweep = tuple(parse_quantity(p) for p in
                               cp.get("sweep", "bias_list").split(","))
        else:
            start = _get(cp, "sweep", "bias_start")
            stop = _get(cp, "sweep", "bias_stop")
            step = _get(cp, "sweep", "bias_step")
            if step <= 0:
                raise ConfigError("bias_step must be > 0", "sweep")
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            bias_sweep = tuple(start + i * step for i in range(n))
        bias_direction = _get(cp, "sweep", "direction", (1.0, 0.0, 0.0),
                              parse=_vector)
        spectrum_probe = int(_get(cp, "sweep", "spectrum_probe", 0, parse=float))

    llg_params = llg.LlgIterationParams(
        tol=_get(cp, "run", "llg_tol", 1e-6),
        max_iters=int(_get(cp, "run", "llg_max_iters", 50, parse=float)),
    )

    try:
        return SimConfig(
            grid=grid,
            materials=materials,
            source=source,
            boundaries=boundaries,
            cfl_factor=_get(cp, "run", "cfl_factor", 0.9),
            t_end=_get(cp, "run", "t_end"),
            probes=tuple(probes),
            bias_sweep=bias_sweep,
            bias_direction=bias_direction,
            llg_params=llg_params,
            spectrum_probe=spectrum_probe,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
