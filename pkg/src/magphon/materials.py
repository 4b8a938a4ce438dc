"""Per-cell material description.

A :class:`MaterialCell` holds the electromagnetic and micromagnetic
parameters of one cell; a :class:`MaterialMap` stores them as dense arrays
over the whole lattice so the stepping kernels can consume them vectorized.
Cells with ``Ms == 0`` are non-magnetic and are excluded from the
magnetization update entirely.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constants import CONSTANTS


@dataclass(frozen=True)
class MaterialCell:
    """Material parameters of a single cell (SI units)."""

    sigma: float = 0.0          # electrical conductivity, S/m
    eps_r: float = 1.0          # relative permittivity
    Ms: float = 0.0             # saturation magnetization, A/m (0 = non-magnetic)
    alpha: float = 0.0          # Gilbert damping, dimensionless
    Hbias: tuple[float, float, float] = (0.0, 0.0, 0.0)  # static bias, A/m
    gamma_e: float = CONSTANTS.gamma_e  # gyromagnetic ratio, C/kg

    def __post_init__(self) -> None:
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.eps_r < 1:
            raise ValueError(f"eps_r must be >= 1, got {self.eps_r}")
        if self.Ms < 0:
            raise ValueError(f"Ms must be >= 0, got {self.Ms}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0,1], got {self.alpha}")

    @property
    def magnetic(self) -> bool:
        return self.Ms > 0.0


class MaterialMap:
    """Dense per-cell material arrays on an (nx, ny, nz) cell lattice.

    Construction starts from a uniform background and material boxes are
    painted on top with :meth:`fill_box` (half-open cell-index ranges).
    Immutable after :meth:`freeze`; the solver only reads it.
    """

    def __init__(self, shape: tuple[int, int, int],
                 background: MaterialCell | None = None):
        bg = background or MaterialCell()
        self.shape = tuple(int(n) for n in shape)
        if any(n < 1 for n in self.shape):
            raise ValueError(f"invalid cell counts {shape}")
        self.sigma = np.full(self.shape, bg.sigma)
        self.eps_r = np.full(self.shape, bg.eps_r)
        self.Ms = np.full(self.shape, bg.Ms)
        self.alpha = np.full(self.shape, bg.alpha)
        self.Hbias = np.zeros((3,) + self.shape)
        for c in range(3):
            self.Hbias[c] = bg.Hbias[c]
        self.gamma_e = np.full(self.shape, bg.gamma_e)
        self._frozen = False

    def fill_box(self, cell: MaterialCell,
                 i0: int = 0, i1: int | None = None,
                 j0: int = 0, j1: int | None = None,
                 k0: int = 0, k1: int | None = None) -> None:
        if self._frozen:
            raise RuntimeError("MaterialMap is frozen")
        nx, ny, nz = self.shape
        i1 = nx if i1 is None else i1
        j1 = ny if j1 is None else j1
        k1 = nz if k1 is None else k1
        if not (0 <= i0 <= i1 <= nx and 0 <= j0 <= j1 <= ny and 0 <= k0 <= k1 <= nz):
            raise ValueError(f"box ({i0}:{i1},{j0}:{j1},{k0}:{k1}) outside grid {self.shape}")
        box = (slice(i0, i1), slice(j0, j1), slice(k0, k1))
        self.sigma[box] = cell.sigma
        self.eps_r[box] = cell.eps_r
        self.Ms[box] = cell.Ms
        self.alpha[box] = cell.alpha
        for c in range(3):
            self.Hbias[(c,) + box] = cell.Hbias[c]
        self.gamma_e[box] = cell.gamma_e

    def freeze(self) -> "MaterialMap":
        for a in (self.sigma, self.eps_r, self.Ms, self.alpha, self.Hbias,
                  self.gamma_e):
            a.setflags(write=False)
        self._frozen = True
        return self

    @property
    def magnetic_mask(self) -> np.ndarray:
        return self.Ms > 0.0
