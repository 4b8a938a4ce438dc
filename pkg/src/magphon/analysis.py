"""Spectral post-processing: FFT magnitude spectra, subspace (ESPRIT) mode
extraction for superimposed damped sinusoids, and dataset normalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sim import ProbeSeries

Q_CAP = 1e9


@dataclass
class Spectrum:
    freqs: np.ndarray
    mags: np.ndarray
    meta: object = None

    def __post_init__(self) -> None:
        if len(self.freqs) != len(self.mags):
            raise ValueError("freqs and mags must have equal length")


@dataclass(frozen=True)
class ModeEstimate:
    freq: float          # Hz
    Q: float             # pi*f/decay_rate, capped at Q_CAP
    amplitude: complex
    decay_rate: float    # 1/s, negative means growing
    q_capped: bool = False
    growing: bool = False


def _samples_dt(series) -> tuple[np.ndarray, float]:
    if isinstance(series, ProbeSeries):
        return np.asarray(series.samples, float), series.dt_sample
    samples, dt = series
    return np.asarray(samples, float), float(dt)


def fft_magnitude(series, window: str = "none") -> Spectrum:
    """Magnitude of the DFT of a uniformly sampled series.

    ``series`` is a :class:`~magphon.sim.ProbeSeries` or a ``(samples, dt)``
    pair.  Frequency grid k/(N*dt) for the non-negative bins.
    """
    x, dt = _samples_dt(series)
    if len(x) < 2:
        raise ValueError("need at least 2 samples")
    if window == "hann":
        x = x * np.hanning(len(x))
    elif window != "none":
        raise ValueError(f"unknown window {window!r}")
    mags = np.abs(np.fft.rfft(x))
    freqs = np.fft.rfftfreq(len(x), dt)
    return Spectrum(freqs=freqs, mags=mags,
                    meta=series if isinstance(series, ProbeSeries) else None)


def esprit(series, model_order: int, hankel_columns: int | None = None
           ) -> list[ModeEstimate]:
    """Estimate damped sinusoid parameters by rotational invariance.

    ``model_order`` counts complex exponentials; a real tone needs order 2.
    Pipeline: Hankel data matrix -> dominant left/right subspace by singular
    value decomposition -> least-squares shift-invariance solve -> eigenvalue
    map f = arg(lambda)/(2*pi*dt), r = -ln|lambda|/dt, Q = pi*f/r.

    Only the forward data matrix is used: averaging with the time-reversed
    matrix is only consistent for undamped tones and systematically biases
    decay rates toward zero, which the Q accuracy contract here rules out.

    Returns modes with positive frequency (one per conjugate pair), sorted
    by frequency.  Raises if the series is too short or the requested order
    exceeds the numerical rank of the data.
    """
    x, dt = _samples_dt(series)
    N = len(x)
    if N < 4 * model_order:
        raise ValueError(f"series length {N} < 4*model_order")
    L = hankel_columns or min(N // 3, 1024)
    if L <= model_order:
        raise ValueError("hankel_columns must exceed model_order")
    X = np.lib.stride_tricks.sliding_window_view(x, L)
    _, s, Vt = np.linalg.svd(X, full_matrices=False)
    if s[model_order - 1] <= 1e-12 * s[0]:
        raise ValueError(
            f"model order {model_order} exceeds numerical rank of the data "
            f"(singular value ratio {s[model_order - 1] / s[0]:.2e})")
    V = Vt[:model_order].T
    phi = np.linalg.lstsq(V[:-1], V[1:], rcond=None)[0]
    lam = np.linalg.eigvals(phi)

    modes = []
    amp = _mode_amplitudes(x, dt, lam)
    for lv, av in zip(lam, amp):
        f = float(np.angle(lv) / (2.0 * math.pi * dt))
        if f <= 0:
            continue
        r = float(-np.log(np.abs(lv)) / dt)
        growing = np.abs(lv) > 1.0 + 1e-9
        if r > 0:
            q = math.pi * f / r
            capped = q > Q_CAP
        else:
            q, capped = Q_CAP, True
        modes.append(ModeEstimate(freq=f, Q=min(q, Q_CAP), amplitude=av,
                                  decay_rate=r, q_capped=capped,
                                  growing=bool(growing)))
    modes.sort(key=lambda m: m.freq)
    return modes


def _mode_amplitudes(x: np.ndarray, dt: float, lam: np.ndarray) -> np.ndarray:
    """Least-squares complex amplitudes for the estimated poles."""
    n = np.arange(len(x))
    # cap the Vandermonde length to keep the solve well-scaled for decaying poles
    m = min(len(x), 4096)
    V = lam[None, :] ** n[:m, None]
    a, *_ = np.linalg.lstsq(V, x[:m], rcond=None)
    return a


def minmax(samples: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Min-max normalize to [0, 1]; returns (normalized, min, max)."""
    x = np.asarray(samples, float)
    lo, hi = float(x.min()), float(x.max())
    if hi <= lo:
        raise ValueError("constant series cannot be min-max normalized")
    return (x - lo) / (hi - lo), lo, hi


def minmax_invert(normalized: np.ndarray, lo: float, hi: float) -> np.ndarray:
    return np.asarray(normalized, float) * (hi - lo) + lo
