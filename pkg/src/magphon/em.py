"""Explicit leap-frog updates for the electromagnetic fields.

The magnetic-field update here covers non-magnetic cells only; cells with
Ms > 0 are advanced by the coupled iterative update in :mod:`magphon.llg`,
which consumes the same curl(E) arrays computed here.

Update sequence per step (the order the solver follows):

1. ``curl_E`` from E at step n.
2. ``update_H_nonmagnetic`` advances H to n+1 outside magnets; the coupled
   magnetization update advances (H, M) to n+1 inside magnets.
3. ``update_E`` advances E to n+1 from curl(H at n+1), applies conductive
   loss semi-implicitly, injects the soft source, and enforces boundary
   conditions.

Boundary conditions are realized where they act: PMC walls enter as
antisymmetric ghost values inside the curl(H) stencil (so the tangential H
extrapolates to zero on the wall plane), PEC walls zero the tangential E
stored on the wall nodes, and MUR1 applies a first-order outgoing-wave
extrapolation to the wall-node tangential E.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import CONSTANTS
from .grid import FieldLattice, GridSpec

PEC = "PEC"
PMC = "PMC"
MUR1 = "MUR1"
_CONDITIONS = (PEC, PMC, MUR1)
_FACES = ("x0", "x1", "y0", "y1", "z0", "z1")


@dataclass(frozen=True)
class SourceSpec:
    """Soft source added to one E component at one cell each step."""

    kind: str = "modified_gaussian"
    f0: float = 16e9          # carrier frequency, Hz
    Tp: float = 0.0625e-9     # pulse width parameter, s
    amplitude: float = 1.0    # V/m
    location: tuple[int, int, int] = (0, 0, 0)
    polarization: tuple[float, float, float] = (1.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        if self.kind != "modified_gaussian":
            raise ValueError(f"unknown source kind {self.kind!r}")
        if not (self.f0 > 0 and self.Tp > 0):
            raise ValueError("f0 and Tp must be positive")
        n = math.sqrt(sum(p * p for p in self.polarization))
        if not math.isclose(n, 1.0, rel_tol=1e-9):
            raise ValueError("polarization must be a unit vector")


@dataclass(frozen=True)
class BoundarySpec:
    """Per-face boundary condition."""

    x0: str = PEC
    x1: str = PEC
    y0: str = PEC
    y1: str = PEC
    z0: str = PEC
    z1: str = PEC

    def __post_init__(self) -> None:
        for f in _FACES:
            if getattr(self, f) not in _CONDITIONS:
                raise ValueError(f"unknown boundary condition {getattr(self, f)!r} on {f}")

    @classmethod
    def uniform(cls, condition: str) -> "BoundarySpec":
        return cls(**{f: condition for f in _FACES})


def cfl_timestep(spec: GridSpec, factor: float) -> float:
    """Courant-stable time step: factor / (c0 * sqrt(sum of 1/d_i^2)).

    Collapsed axes (cell count 1) carry no derivatives and are excluded.
    """
    if not 0 < factor <= 1:
        raise ValueError(f"CFL factor must be in (0,1], got {factor!r}")
    inv2 = sum(1.0 / d**2 for d, active in zip(spec.spacings, spec.active_axes)
               if active)
    if inv2 == 0.0:
        raise ValueError("grid has no active axis")
    return factor / (CONSTANTS.c0 * math.sqrt(inv2))


def source_value(src: SourceSpec, t: float) -> float:
    """Modified Gaussian drive: amp * exp(-(t-3Tp)^2/(2Tp^2)) * cos(2*pi*f0*t)."""
    if t < 0:
        raise ValueError("t must be >= 0")
    env = math.exp(-((t - 3.0 * src.Tp) ** 2) / (2.0 * src.Tp**2))
    return src.amplitude * env * math.cos(2.0 * math.pi * src.f0 * t)


# ---------------------------------------------------------------------------
# curls
# ---------------------------------------------------------------------------

def _axis_diff(arr: np.ndarray, axis: int, n: int, d: float) -> np.ndarray:
    """Forward difference (arr[i+1]-arr[i])/d over the first n entries of axis."""
    sl_hi = [slice(None)] * 3
    sl_lo = [slice(None)] * 3
    sl_hi[axis] = slice(1, n + 1)
    sl_lo[axis] = slice(0, n)
    return (arr[tuple(sl_hi)] - arr[tuple(sl_lo)]) / d


def curl_E(lat: FieldLattice) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Centered curl of E evaluated at the H component positions.

    Returns full-allocation-shape arrays; entries outside the valid H index
    ranges are left zero and must not be consumed.
    """
    spec = lat.spec
    nx, ny, nz = spec.cell_shape
    ax, ay, az = spec.active_axes
    dx, dy, dz = spec.spacings
    cEx = np.zeros(spec.field_shape)
    cEy = np.zeros(spec.field_shape)
    cEz = np.zeros(spec.field_shape)
    if ay:
        cEx[:, :ny, :] += _axis_diff(lat.Ez, 1, ny, dy)
        cEz[:, :ny, :] -= _axis_diff(lat.Ex, 1, ny, dy)
    if az:
        cEx[:, :, :nz] -= _axis_diff(lat.Ey, 2, nz, dz)
        cEy[:, :, :nz] += _axis_diff(lat.Ex, 2, nz, dz)
    if ax:
        cEy[:nx, :, :] -= _axis_diff(lat.Ez, 0, nx, dx)
        cEz[:nx, :, :] += _axis_diff(lat.Ey, 0, nx, dx)
    return cEx, cEy, cEz


def _h_valid_slices(spec: GridSpec) -> dict[str, tuple[slice, slice, slice]]:
    nx, ny, nz = spec.cell_shape
    full = slice(None)
    return {
        "Hx": (full, slice(0, ny), slice(0, nz)),
        "Hy": (slice(0, nx), full, slice(0, nz)),
        "Hz": (slice(0, nx), slice(0, ny), full),
    }


def _nonmagnetic_H_masks(lat: FieldLattice) -> dict[str, np.ndarray]:
    """Boolean masks (allocation shape) selecting H entries that follow the
    plain Maxwell update: valid index range minus same-index magnetic cells."""
    cached = getattr(lat, "_nm_masks", None)
    if cached is not None:
        return cached
    spec = lat.spec
    nx, ny, nz = spec.cell_shape
    mag = lat.materials.magnetic_mask
    masks = {}
    for name, valid in _h_valid_slices(spec).items():
        m = np.zeros(spec.field_shape, dtype=bool)
        m[valid] = True
        m[:nx, :ny, :nz] &= ~mag
        masks[name] = m
    lat._nm_masks = masks
    return masks


def update_H_nonmagnetic(lat: FieldLattice, dt: float,
                         curlE: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None
                         ) -> None:
    """H <- H - (dt/mu0) * curl(E) in non-magnetic cells."""
    if curlE is None:
        curlE = curl_E(lat)
    masks = _nonmagnetic_H_masks(lat)
    coef = dt / CONSTANTS.mu0
    for name, c in zip(("Hx", "Hy", "Hz"), curlE):
        arr = getattr(lat, name)
        m = masks[name]
        arr[m] -= coef * c[m]


def _ghost_diff(arr: np.ndarray, axis: int, n: int, d: float,
                pmc_low: bool, pmc_high: bool) -> np.ndarray:
    """Backward difference (arr[i]-arr[i-1])/d at the n+1 node positions of
    axis, with PMC faces supplying antisymmetric ghost values (zero otherwise).
    """
    core = [slice(None)] * 3
    core[axis] = slice(0, n)
    core_arr = arr[tuple(core)]
    edge = [slice(None)] * 3
    edge[axis] = slice(0, 1)
    lo = -core_arr[tuple(edge)] if pmc_low else np.zeros_like(core_arr[tuple(edge)])
    edge[axis] = slice(n - 1, n)
    hi = -core_arr[tuple(edge)] if pmc_high else np.zeros_like(core_arr[tuple(edge)])
    padded = np.concatenate([lo, core_arr, hi], axis=axis)
    sl_hi = [slice(None)] * 3
    sl_lo = [slice(None)] * 3
    sl_hi[axis] = slice(1, n + 2)
    sl_lo[axis] = slice(0, n + 1)
    return (padded[tuple(sl_hi)] - padded[tuple(sl_lo)]) / d


def curl_H(lat: FieldLattice, boundaries: BoundarySpec
           ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Centered curl of H at the E component positions, with PMC ghosts."""
    spec = lat.spec
    nx, ny, nz = spec.cell_shape
    ax, ay, az = spec.active_axes
    dx, dy, dz = spec.spacings
    b = boundaries
    cHx = np.zeros(spec.field_shape)
    cHy = np.zeros(spec.field_shape)
    cHz = np.zeros(spec.field_shape)
    if ay:
        dy_Hz = _ghost_diff(lat.Hz, 1, ny, dy, b.y0 == PMC, b.y1 == PMC)
        dy_Hx = _ghost_diff(lat.Hx, 1, ny, dy, b.y0 == PMC, b.y1 == PMC)
        cHx += dy_Hz
        cHz -= dy_Hx
    if az:
        dz_Hy = _ghost_diff(lat.Hy, 2, nz, dz, b.z0 == PMC, b.z1 == PMC)
        dz_Hx = _ghost_diff(lat.Hx, 2, nz, dz, b.z0 == PMC, b.z1 == PMC)
        cHx -= dz_Hy
        cHy += dz_Hx
    if ax:
        dx_Hz = _ghost_diff(lat.Hz, 0, nx, dx, b.x0 == PMC, b.x1 == PMC)
        dx_Hy = _ghost_diff(lat.Hy, 0, nx, dx, b.x0 == PMC, b.x1 == PMC)
        cHy -= dx_Hz
        cHz += dx_Hy
    return cHx, cHy, cHz


# ---------------------------------------------------------------------------
# E update with semi-implicit loss
# ---------------------------------------------------------------------------

def _e_coefficients(lat: FieldLattice, dt: float
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Per-entry coefficients ca = 1/(sigma/2 + eps/dt) and cb = sigma/2 - eps/dt
    on the field allocation shape (edge-adjacent cell values, clamped at the
    outer boundary)."""
    cached = getattr(lat, "_e_coeffs", None)
    if cached is not None and cached[0] == dt:
        return cached[1], cached[2]
    spec = lat.spec
    pad = [(0, 1) if n > 1 else (0, 0) for n in spec.cell_shape]
    sigma = np.pad(lat.materials.sigma, pad, mode="edge")
    eps = CONSTANTS.eps0 * np.pad(lat.materials.eps_r, pad, mode="edge")
    ca = 1.0 / (sigma / 2.0 + eps / dt)
    cb = sigma / 2.0 - eps / dt
    lat._e_coeffs = (dt, ca, cb)
    return ca, cb


def update_E(lat: FieldLattice, dt: float, boundaries: BoundarySpec,
             J_src: dict[str, np.ndarray] | None = None) -> None:
    """E^{n+1} = (sigma/2 + eps/dt)^{-1} [curl(H^{n+1}) - (sigma/2 - eps/dt) E^n - J].

    ``J_src`` optionally maps component names to current-density arrays
    (allocation shape, A/m^2).  Boundary conditions are enforced afterwards.
    """
    ca, cb = _e_coefficients(lat, dt)
    mur_prev = _capture_mur_planes(lat, boundaries)
    curls = curl_H(lat, boundaries)
    for name, c in zip(("Ex", "Ey", "Ez"), curls):
        arr = getattr(lat, name)
        rhs = c - cb * arr
        if J_src and name in J_src:
            rhs = rhs - J_src[name]
        arr[...] = ca * rhs
    apply_boundaries(lat, boundaries, dt=dt, mur_prev=mur_prev)


def inject_soft_source(lat: FieldLattice, src: SourceSpec, t: float) -> None:
    """Add the drive value to E at the source cell along its polarization."""
    v = source_value(src, t)
    i, j, k = src.location
    for comp, p in zip(("Ex", "Ey", "Ez"), src.polarization):
        if p != 0.0:
            getattr(lat, comp)[i, j, k] += p * v


# ---------------------------------------------------------------------------
# boundaries
# ---------------------------------------------------------------------------

# face -> (axis, side) with side 0 = low, 1 = high
_FACE_AXES = {"x0": (0, 0), "x1": (0, 1), "y0": (1, 0), "y1": (1, 1),
              "z0": (2, 0), "z1": (2, 1)}
# tangential E components stored on the wall nodes of each axis
_TANGENTIAL_E = {0: ("Ey", "Ez"), 1: ("Ex", "Ez"), 2: ("Ex", "Ey")}


def _face_index(spec: GridSpec, axis: int, side: int) -> int:
    return 0 if side == 0 else spec.cell_shape[axis]


def _plane(arr: np.ndarray, axis: int, idx: int) -> np.ndarray:
    sl = [slice(None)] * 3
    sl[axis] = idx
    return arr[tuple(sl)]


def _capture_mur_planes(lat: FieldLattice, boundaries: BoundarySpec
                        ) -> dict[tuple[str, str], tuple[np.ndarray, np.ndarray]]:
    """Copy the wall and first-interior tangential-E planes for MUR1 faces."""
    prev = {}
    for face, (axis, side) in _FACE_AXES.items():
        if getattr(boundaries, face) != MUR1:
            continue
        if not lat.spec.active_axes[axis]:
            raise ValueError(f"MUR1 on collapsed axis face {face}")
        wall = _face_index(lat.spec, axis, side)
        inner = wall + (1 if side == 0 else -1)
        for comp in _TANGENTIAL_E[axis]:
            arr = getattr(lat, comp)
            prev[(face, comp)] = (_plane(arr, axis, wall).copy(),
                                  _plane(arr, axis, inner).copy())
    return prev


def apply_boundaries(lat: FieldLattice, boundaries: BoundarySpec,
                     dt: float | None = None,
                     mur_prev: dict | None = None) -> None:
    """Enforce wall conditions on the stored fields.

    PEC zeroes the tangential E on the wall nodes.  PMC needs no stored-field
    action here: its n x H = 0 condition is realized by the antisymmetric
    ghost values inside :func:`curl_H` (no tangential H sample lies on the
    wall plane).  MUR1 requires ``dt`` and the pre-update planes captured by
    ``update_E``.
    """
    spec = lat.spec
    for face, (axis, side) in _FACE_AXES.items():
        cond = getattr(boundaries, face)
        if not spec.active_axes[axis]:
            continue
        wall = _face_index(spec, axis, side)
        if cond == PEC:
            for comp in _TANGENTIAL_E[axis]:
                _plane(getattr(lat, comp), axis, wall)[...] = 0.0
        elif cond == MUR1 and mur_prev is not None:
            if dt is None:
                raise ValueError("MUR1 requires dt")
            inner = wall + (1 if side == 0 else -1)
            d = spec.spacings[axis]
            for comp in _TANGENTIAL_E[axis]:
                arr = getattr(lat, comp)
                prev_wall, prev_inner = mur_prev[(face, comp)]
                eps_wall = CONSTANTS.eps0 * _plane(
                    np.pad(lat.materials.eps_r,
                           [(0, 1) if n > 1 else (0, 0) for n in spec.cell_shape],
                           mode="edge"), axis, wall)
                c_loc = 1.0 / np.sqrt(CONSTANTS.mu0 * eps_wall)
                k = (c_loc * dt - d) / (c_loc * dt + d)
                _plane(arr, axis, wall)[...] = (
                    prev_inner + k * (_plane(arr, axis, inner) - prev_wall))


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def total_energy(lat: FieldLattice) -> float:
    """Discrete energy bookkeeping: electric + magnetic field energy plus the
    Zeeman energy of the magnetization in the static bias.

    Useful as a drift diagnostic for lossless closed boxes; boundary samples
    are weighted like interior ones, which is a constant bookkeeping choice
    and does not affect drift measurements.
    """
    spec = lat.spec
    vol = spec.dx * spec.dy * spec.dz
    pad = [(0, 1) if n > 1 else (0, 0) for n in spec.cell_shape]
    eps = CONSTANTS.eps0 * np.pad(lat.materials.eps_r, pad, mode="edge")
    u_e = 0.5 * float(sum(np.sum(eps * getattr(lat, c) ** 2)
                          for c in ("Ex", "Ey", "Ez")))
    u_h = 0.5 * CONSTANTS.mu0 * float(sum(np.sum(getattr(lat, c) ** 2)
                                          for c in ("Hx", "Hy", "Hz")))
    u_z = -CONSTANTS.mu0 * float(np.sum(lat.M * lat.materials.Hbias))
    return (u_e + u_h + u_z) * vol
