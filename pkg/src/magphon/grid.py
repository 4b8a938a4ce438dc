"""Staggered-lattice storage for E, H and M fields.

Standard staggering on a rectilinear cell lattice of shape (nx, ny, nz):

==========  ================================
component   position (units of cell size)
==========  ================================
Ex          (i+1/2, j,     k)
Ey          (i,     j+1/2, k)
Ez          (i,     j,     k+1/2)
Hx          (i,     j+1/2, k+1/2)
Hy          (i+1/2, j,     k+1/2)
Hz          (i+1/2, j+1/2, k)
==========  ================================

Every component array is allocated with ``n+1`` entries along each
non-collapsed axis (``n == 1`` axes stay size 1), so the centered curls in
the update kernels never index out of range; the few entries beyond the
physical range are never written by the kernels and stay zero.

The magnetization M is stored as a vector per *cell* index and is treated as
collocated with the same-index H components.  On reduced-dimension grids
(the validated 1D configuration) this collocation is exact up to offsets
along invariant axes; in full 3D it is a half-cell approximation, recorded
here as a design decision.

Reduced dimensionality is expressed by setting a cell count to 1; collapsed
axes carry no spatial derivatives and the 1D/2D cases run through the same
kernels as 3D.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .materials import MaterialMap


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int
    nz: int
    dx: float
    dy: float
    dz: float

    def __post_init__(self) -> None:
        for n in (self.nx, self.ny, self.nz):
            if not isinstance(n, int) or n < 1:
                raise ValueError(f"cell counts must be positive integers, got {n!r}")
        for d in (self.dx, self.dy, self.dz):
            if not d > 0:
                raise ValueError(f"cell sizes must be > 0, got {d!r}")

    @property
    def cell_shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def field_shape(self) -> tuple[int, int, int]:
        """Allocation shape of each field-component array."""
        return tuple(n + 1 if n > 1 else 1 for n in self.cell_shape)

    @property
    def active_axes(self) -> tuple[bool, bool, bool]:
        """True for axes that carry spatial derivatives."""
        return tuple(n > 1 for n in self.cell_shape)

    @property
    def spacings(self) -> tuple[float, float, float]:
        return (self.dx, self.dy, self.dz)


_E_COMPONENTS = ("Ex", "Ey", "Ez")
_H_COMPONENTS = ("Hx", "Hy", "Hz")
_M_COMPONENTS = ("Mx", "My", "Mz")


class FieldLattice:
    """Field storage plus the material map.  Created via :func:`allocate`."""

    def __init__(self, spec: GridSpec, materials: MaterialMap):
        if materials.shape != spec.cell_shape:
            raise ValueError(
                f"material map shape {materials.shape} does not match grid "
                f"{spec.cell_shape}")
        self.spec = spec
        self.materials = materials
        fs = spec.field_shape
        self.Ex = np.zeros(fs)
        self.Ey = np.zeros(fs)
        self.Ez = np.zeros(fs)
        self.Hx = np.zeros(fs)
        self.Hy = np.zeros(fs)
        self.Hz = np.zeros(fs)
        self.M = np.zeros((3,) + spec.cell_shape)

    # -- access ------------------------------------------------------------

    def field(self, name: str) -> np.ndarray:
        if name in _E_COMPONENTS or name in _H_COMPONENTS:
            return getattr(self, name)
        if name in _M_COMPONENTS:
            return self.M[_M_COMPONENTS.index(name)]
        raise KeyError(f"unknown field component {name!r}")

    def sample(self, component: str, i: int, j: int, k: int) -> float:
        """Return the stored value at the component's staggered location.

        No interpolation is performed; indices address the arrays directly.
        """
        arr = self.field(component)
        for idx, n in zip((i, j, k), arr.shape):
            if not 0 <= idx < n:
                raise IndexError(
                    f"index ({i},{j},{k}) out of range for {component} "
                    f"with shape {arr.shape}")
        return float(arr[i, j, k])

    # -- serialization for snapshot/restart --------------------------------

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name)
                for name in _E_COMPONENTS + _H_COMPONENTS} | {"M": self.M}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for name in _E_COMPONENTS + _H_COMPONENTS:
            arr = getattr(self, name)
            if state[name].shape != arr.shape:
                raise ValueError(f"snapshot shape mismatch for {name}")
            arr[...] = state[name]
        if state["M"].shape != self.M.shape:
            raise ValueError("snapshot shape mismatch for M")
        self.M[...] = state["M"]


def allocate(spec: GridSpec, materials: MaterialMap) -> FieldLattice:
    """Allocate a zeroed lattice with M relaxed onto the bias direction.

    Magnetic cells start at M = Ms * unit(Hbias) (uniform saturated state);
    cells whose bias is zero default to +x.  Non-magnetic cells keep M = 0.
    """
    lat = FieldLattice(spec, materials)
    mag = materials.magnetic_mask
    if mag.any():
        bias = materials.Hbias[:, mag]
        norm = np.sqrt((bias * bias).sum(axis=0))
        unit = np.zeros_like(bias)
        nz = norm > 0
        unit[:, nz] = bias[:, nz] / norm[nz]
        unit[0, ~nz] = 1.0
        lat.M[:, mag] = materials.Ms[mag] * unit
    return lat
