"""Closed-form and semi-analytic references for the coupled solver.

Contents:

- Kittel ferromagnetic-resonance law and the two-mode hybrid
  eigenfrequencies.
- A 1D layered-cavity model (cavity / magnet slab / cavity between
  perfect-magnetic-conductor walls): piecewise plane-wave solutions driven
  by a uniform dynamic magnetization, the averaged magnon-photon coupling
  coefficient, the resulting magnetic susceptibility tensor, and the
  absorbed microwave power.
- Floquet analysis of the scalarized (damping-free) magnetization torque
  equation under a cosine drive: fixed-step integration of the fundamental
  matrix over one period and the monodromy eigenvalues.

These functions are pure and independent of the FDTD kernels; the test
suite uses them as oracles for the time-domain solver.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .constants import CONSTANTS


class OracleSingularity(RuntimeError):
    """Raised when a linear system sits numerically on a resonance pole."""


def kittel_frequency(H0: float, Ms: float,
                     gamma: float = CONSTANTS.gamma_eff) -> float:
    """Uniform-precession resonance f = (gamma/2pi) sqrt(H0 (H0 + Ms)).

    ``gamma`` is the precession rate per unit field in Hz*m/A
    (mu0*|gamma_e| by default).
    """
    if H0 < 0:
        raise ValueError("H0 must be >= 0")
    return gamma * math.sqrt(H0 * (H0 + Ms)) / (2.0 * math.pi)


def kittel_crossing_bias(f_target: float, Ms: float,
                         gamma: float = CONSTANTS.gamma_eff) -> float:
    """Bias H0 (A/m) at which the Kittel frequency equals ``f_target``."""
    w = 2.0 * math.pi * f_target / gamma
    return 0.5 * (-Ms + math.sqrt(Ms * Ms + 4.0 * w * w))


def hybrid_eigenfrequencies(omega_p: float, Delta: float, g: float
                            ) -> tuple[float, float]:
    """Coupled two-mode eigenfrequencies.

    omega_pm = omega_p + Delta/2 +- sqrt(Delta^2 + 4 g^2)/2, with ``g`` the
    half-splitting (on resonance the branch separation is exactly 2g).
    Works in any consistent frequency unit.
    """
    if g < 0:
        raise ValueError("g must be >= 0")
    root = math.sqrt(Delta * Delta + 4.0 * g * g) / 2.0
    base = omega_p + Delta / 2.0
    return base + root, base - root


# ---------------------------------------------------------------------------
# 1D layered cavity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CavityModel1D:
    """Cavity / magnet-slab / cavity stack between PMC walls at z=0 and z=d3.

    The magnet occupies (d1, d2).  ``gamma`` is the precession rate per unit
    field (Hz*m/A); ``hdrive`` is the complex drive amplitude vector (A/m)
    used by :func:`absorbed_power`.
    """

    d1: float
    d2: float
    d3: float
    sigma_m: float
    sigma_c: float
    eps_m: float
    eps_c: float
    Ms: float
    gamma: float
    alpha: float
    hdrive: tuple[complex, complex, complex] = (0.0, 1e3, 0.0)

    def __post_init__(self) -> None:
        if not 0.0 < self.d1 < self.d2 < self.d3:
            raise ValueError("layer boundaries must satisfy 0 < d1 < d2 < d3")

    def wavenumber(self, omega: float, region: str) -> complex:
        """Complex k with k^2 = eps0 eps_r mu0 omega^2 + i sigma mu0 omega."""
        eps_r = self.eps_m if region == "m" else self.eps_c
        sigma = self.sigma_m if region == "m" else self.sigma_c
        return cmath.sqrt(CONSTANTS.eps0 * eps_r * CONSTANTS.mu0 * omega**2
                          + 1j * sigma * CONSTANTS.mu0 * omega)


# Reference parameter point for the analytic example; the validation suite
# pins this model to the numeric anchors it must reproduce (wavenumber,
# field coefficients and averaged coupling of the magnet layer).
REFERENCE_CAVITY = CavityModel1D(
    d1=3.67e-3 / 2 - 7e-7 / 2,
    d2=3.67e-3 / 2 + 7e-7 / 2,
    d3=3.67e-3,
    sigma_m=1e-3,
    sigma_c=1.2520467594271872e-4,
    eps_m=1.0,
    eps_c=8.168870103908924,
    Ms=9.7e5,
    gamma=2.23e5,
    alpha=0.003,
    hdrive=(0.0, 1e3, 0.0),
)


@dataclass(frozen=True)
class LayeredSolution:
    """Piecewise H-field coefficients for one transverse component.

    H(z) = c1p e^{i kc z} + c1m e^{-i kc z}                (0   < z < d1)
         = mp  e^{i km z} + mm  e^{-i km z} - M            (d1  < z < d2)
         = c2p e^{i kc z} + c2m e^{-i kc z}                (d2  < z < d3)

    The -M term is the uniform particular solution driven by the dynamic
    magnetization amplitude M; E follows from q * (-dH/dz) with
    q = 1/(sigma - i eps0 eps_r omega) per region.
    """

    km: complex
    kc: complex
    c1p: complex
    c1m: complex
    mp: complex
    mm: complex
    c2p: complex
    c2m: complex
    M: complex
    omega: float

    def H(self, model: CavityModel1D, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, float)
        out = np.empty(z.shape, complex)
        left = z <= model.d1
        right = z >= model.d2
        mid = ~(left | right)
        out[left] = (self.c1p * np.exp(1j * self.kc * z[left])
                     + self.c1m * np.exp(-1j * self.kc * z[left]))
        out[mid] = (self.mp * np.exp(1j * self.km * z[mid])
                    + self.mm * np.exp(-1j * self.km * z[mid]) - self.M)
        out[right] = (self.c2p * np.exp(1j * self.kc * z[right])
                      + self.c2m * np.exp(-1j * self.kc * z[right]))
        return out


def layered_fields_1d(model: CavityModel1D, omega: float,
                      M: complex = 1.0) -> LayeredSolution:
    """Solve the driven boundary-value problem for one transverse component.

    Conditions: H = 0 on the PMC walls z=0 and z=d3; H and E continuous at
    d1 and d2.  ``M`` is the uniform complex magnetization amplitude of the
    slab (A/m); with M = Ms the solution is per unit *relative* dynamic
    magnetization.
    """
    if not omega > 0:
        raise ValueError("omega must be > 0")
    km = model.wavenumber(omega, "m")
    kc = model.wavenumber(omega, "c")
    qm = 1.0 / (model.sigma_m - 1j * CONSTANTS.eps0 * model.eps_m * omega)
    qc = 1.0 / (model.sigma_c - 1j * CONSTANTS.eps0 * model.eps_c * omega)
    d1, d2, d3 = model.d1, model.d2, model.d3

    def e(k: complex, z: float) -> complex:
        return cmath.exp(1j * k * z)

    A = np.zeros((6, 6), complex)
    b = np.zeros(6, complex)
    # H(0) = 0 and H(d3) = 0 (PMC walls)
    A[0, 0] = 1.0
    A[0, 1] = 1.0
    A[1, 4] = e(kc, d3)
    A[1, 5] = e(-kc, d3)
    # continuity of H at d1, d2 (the slab carries the extra -M term)
    A[2, 0] = e(kc, d1)
    A[2, 1] = e(-kc, d1)
    A[2, 2] = -e(km, d1)
    A[2, 3] = -e(-km, d1)
    b[2] = -M
    A[4, 2] = e(km, d2)
    A[4, 3] = e(-km, d2)
    A[4, 4] = -e(kc, d2)
    A[4, 5] = -e(-kc, d2)
    b[4] = M
    # continuity of E ~ q * dH/dz at d1, d2
    A[3, 0] = qc * 1j * kc * e(kc, d1)
    A[3, 1] = -qc * 1j * kc * e(-kc, d1)
    A[3, 2] = -qm * 1j * km * e(km, d1)
    A[3, 3] = qm * 1j * km * e(-km, d1)
    A[5, 2] = qm * 1j * km * e(km, d2)
    A[5, 3] = -qm * 1j * km * e(-km, d2)
    A[5, 4] = -qc * 1j * kc * e(kc, d2)
    A[5, 5] = qc * 1j * kc * e(-kc, d2)
    # row equilibration keeps the condition number meaningful (the E rows
    # carry 1/(eps0*omega) scales)
    scale = np.abs(A).max(axis=1)
    A_s = A / scale[:, None]
    b_s = b / scale
    cond = np.linalg.cond(A_s)
    if not np.isfinite(cond) or cond > 1e13:
        raise OracleSingularity(
            f"layered system is singular at omega={omega:.6e} "
            f"(condition number {cond:.2e}); the drive sits on a lossless "
            "cavity pole")
    x = np.linalg.solve(A_s, b_s)
    return LayeredSolution(km=km, kc=kc, c1p=x[0], c1m=x[1], mp=x[2],
                           mm=x[3], c2p=x[4], c2m=x[5], M=M, omega=omega)


def theta_zy_average(model: CavityModel1D, omega: float) -> complex:
    """Averaged coupling coefficient (Hz) of the magnet layer.

    <theta_zy> = (1/(d2-d1)) * integral over the slab of gamma * H_y(z) per
    unit relative dynamic magnetization, where H_y includes both the cavity
    back-action wave and the uniform -Ms particular term.  The integral of
    the exponentials is evaluated in closed form.
    """
    sol = layered_fields_1d(model, omega, M=model.Ms)
    km = sol.km
    d1, d2 = model.d1, model.d2
    t = d2 - d1
    wave = (sol.mp * (cmath.exp(1j * km * d2) - cmath.exp(1j * km * d1))
            - sol.mm * (cmath.exp(-1j * km * d2) - cmath.exp(-1j * km * d1))
            ) / (1j * km * t)
    return model.gamma * (wave - model.Ms)


@dataclass(frozen=True)
class Susceptibility:
    chi: np.ndarray            # 3x3 complex, dimensionless (dM = chi . h)
    theta_zy_avg: complex      # Hz
    A23: complex               # Hz
    A32: complex               # Hz
    condition_number: float


def susceptibility(model: CavityModel1D, omega: float, H0: float
                   ) -> Susceptibility:
    """Magnetic susceptibility of the cavity-loaded magnet, dM = chi . h.

    The linearized torque dynamics about the +x saturated state, with the
    thin-slab demagnetizing term and the cavity back-action entering through
    <theta_zy>, give

        chi = gamma * inv([[i w, 0, 0], [0, i w, A23], [0, A32 - theta, i w]])
                    . [[0,0,0],[0,0,-1],[0,1,0]]

    with A23 = i alpha w - gamma (H0 + Ms) and A32 = -i alpha w + gamma H0.
    The first row of chi vanishes: the longitudinal component does not
    respond at linear order.
    """
    g = model.gamma
    th = theta_zy_average(model, omega)
    A23 = 1j * model.alpha * omega - g * H0 - g * model.Ms
    A32 = -1j * model.alpha * omega + g * H0
    Mm = np.array([[1j * omega, 0.0, 0.0],
                   [0.0, 1j * omega, A23],
                   [0.0, A32 - th, 1j * omega]], complex)
    cond = float(np.linalg.cond(Mm))
    if not np.isfinite(cond) or cond > 1e15:
        raise OracleSingularity(
            f"susceptibility matrix singular at omega={omega:.6e}, "
            f"H0={H0:.6e} (condition number {cond:.2e})")
    S = np.array([[0.0, 0.0, 0.0],
                  [0.0, 0.0, -1.0],
                  [0.0, 1.0, 0.0]])
    chi = g * np.linalg.inv(Mm) @ S
    return Susceptibility(chi=chi, theta_zy_avg=th, A23=A23, A32=A32,
                          condition_number=cond)


def absorbed_power(model: CavityModel1D, omega: float, H0: float) -> float:
    """Absorbed microwave power Im(h^dagger chi h) for the configured drive."""
    s = susceptibility(model, omega, H0)
    h = np.asarray(model.hdrive, complex)
    return float((np.conj(h) @ s.chi @ h).imag)


def absorption_spectrum(model: CavityModel1D, freqs: np.ndarray, H0: float
                        ) -> np.ndarray:
    """Vector of absorbed power over a frequency grid (Hz)."""
    return np.array([absorbed_power(model, 2.0 * math.pi * f, H0)
                     for f in np.asarray(freqs, float)])


# ---------------------------------------------------------------------------
# Floquet analysis of the scalarized torque equation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FloquetResult:
    times: np.ndarray          # s
    trajectory: np.ndarray     # (N+1, 3), A/m
    monodromy: np.ndarray      # (3, 3)
    eigenvalues: np.ndarray    # (3,) complex


def _floquet_matrix(t: float, H0: float, Hx0: float, Hz0: float,
                    f0: float, gamma: float) -> np.ndarray:
    c = math.cos(2.0 * math.pi * f0 * t)
    return gamma * np.array([
        [0.0, Hz0 * c, -H0],
        [-Hz0 * c, 0.0, Hx0 * c],
        [H0, -Hx0 * c, 0.0],
    ])


def floquet_scalarized(H0: float, Hx0: float, Hz0: float, f0: float,
                       Ms: float, gamma: float = CONSTANTS.gamma_eff,
                       t_end: float | None = None,
                       m0: tuple[float, float, float] = (1.0, 0.0, 0.0),
                       steps_per_period: int = 1000) -> FloquetResult:
    """Integrate dM/dt = gamma * A(t) * M over periodic cosine drive.

    The bias H0 lies along y; the drive components Hx0, Hz0 oscillate at f0.
    A(t) is skew-symmetric, so the flow preserves |M| and the monodromy
    matrix (fundamental solution over one period T = 1/f0) has unit
    determinant; its eigenvalues decide parametric stability.  Integration
    is classical fourth-order Runge-Kutta with a fixed step T/steps_per_period.
    ``gamma`` is the precession rate per unit field (Hz*m/A).
    """
    T = 1.0 / f0
    if t_end is None:
        t_end = T
    h = T / steps_per_period
    n = max(1, int(round(t_end / h)))

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        return _floquet_matrix(t, H0, Hx0, Hz0, f0, gamma) @ y

    def rk4(y: np.ndarray, t: float) -> np.ndarray:
        k1 = rhs(t, y)
        k2 = rhs(t + h / 2, y + h / 2 * k1)
        k3 = rhs(t + h / 2, y + h / 2 * k2)
        k4 = rhs(t + h, y + h * k3)
        return y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)

    # trajectory of M itself
    traj = np.empty((n + 1, 3))
    traj[0] = Ms * np.asarray(m0, float)
    for i in range(n):
        traj[i + 1] = rk4(traj[i], i * h)
    # fundamental matrix over exactly one period
    Phi = np.eye(3)
    for i in range(steps_per_period):
        Phi = np.column_stack([rk4(Phi[:, c], i * h) for c in range(3)])
    eig = np.linalg.eigvals(Phi)
    return FloquetResult(times=np.arange(n + 1) * h, trajectory=traj,
                         monodromy=Phi, eigenvalues=eig)
