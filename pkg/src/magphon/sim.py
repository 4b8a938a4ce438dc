"""Run orchestration: the coupled time loop, bias sweeps, probe recording,
snapshot/restart, and dataset curation.

Each step follows the coupled scheme:

1. curl(E^n) once for the whole lattice;
2. H -> n+1 in non-magnetic cells; the (H, M) fixed-point iteration in
   magnetic cells (both consume the same curl);
3. E -> n+1 with boundary conditions, then soft-source injection;
4. probe recording.

Runs are deterministic: fixed update order, fixed summation order, no RNG.
Bias sweeps are embarrassingly parallel across runs.
"""

from __future__ import annotations

import multiprocessing
from dataclasses import dataclass, field, replace

import numpy as np

from . import em, llg
from .grid import FieldLattice, GridSpec, allocate
from .materials import MaterialMap


@dataclass(frozen=True)
class SimConfig:
    grid: GridSpec
    materials: MaterialMap
    source: em.SourceSpec
    boundaries: em.BoundarySpec
    cfl_factor: float
    t_end: float
    probes: tuple[tuple[str, int, int, int], ...]
    bias_sweep: tuple[float, ...] = ()          # A/m, applied along bias_direction
    bias_direction: tuple[float, float, float] = (1.0, 0.0, 0.0)
    llg_params: llg.LlgIterationParams = field(default_factory=llg.LlgIterationParams)
    spectrum_probe: int = 0                     # probe index used by sweep()

    def __post_init__(self) -> None:
        if not self.t_end > 0:
            raise ValueError("t_end must be > 0")
        fs = self.grid.field_shape
        cs = self.grid.cell_shape
        for comp, i, j, k in self.probes:
            shape = cs if comp.startswith("M") else fs
            if not all(0 <= idx < n for idx, n in zip((i, j, k), shape)):
                raise ValueError(f"probe {(comp, i, j, k)} outside grid")

    @property
    def dt(self) -> float:
        return em.cfl_timestep(self.grid, self.cfl_factor)

    @property
    def n_steps(self) -> int:
        return int(np.ceil(self.t_end / self.dt))


@dataclass
class ProbeSeries:
    component: str
    location: tuple[int, int, int]
    bias: float            # A/m (0 when the config's materials are used as-is)
    dt_sample: float
    samples: np.ndarray

    def __len__(self) -> int:
        return len(self.samples)


@dataclass
class RunResult:
    probes: dict[tuple[str, tuple[int, int, int]], ProbeSeries]
    lattice: FieldLattice
    iterations: np.ndarray     # fixed-point iterations per step (0 if no magnets)
    steps: int
    bias: float


def _materials_with_bias(materials: MaterialMap, bias: float,
                         direction: tuple[float, float, float]) -> MaterialMap:
    """Copy of the material map with the magnetic cells' bias replaced."""
    out = MaterialMap(materials.shape)
    out.sigma = materials.sigma.copy()
    out.eps_r = materials.eps_r.copy()
    out.Ms = materials.Ms.copy()
    out.alpha = materials.alpha.copy()
    out.gamma_e = materials.gamma_e.copy()
    out.Hbias = materials.Hbias.copy()
    mag = out.Ms > 0
    d = np.asarray(direction, float)
    d = d / np.linalg.norm(d)
    for c in range(3):
        out.Hbias[c][mag] = bias * d[c]
    return out.freeze()


class _MagneticCells:
    """Precomputed gather/scatter indices for the magnetic subdomain."""

    def __init__(self, lat: FieldLattice):
        self.idx = np.nonzero(lat.materials.magnetic_mask)
        self.any = len(self.idx[0]) > 0
        if self.any:
            self.Ms = lat.materials.Ms[self.idx]
            self.alpha = lat.materials.alpha[self.idx]
            self.gamma = lat.materials.gamma_e[self.idx]
            self.Hbias = np.stack([lat.materials.Hbias[c][self.idx]
                                   for c in range(3)])

    def gather_H(self, lat: FieldLattice) -> np.ndarray:
        return np.stack([lat.Hx[self.idx], lat.Hy[self.idx], lat.Hz[self.idx]])

    def gather(self, arrs) -> np.ndarray:
        return np.stack([a[self.idx] for a in arrs])

    def scatter_H(self, lat: FieldLattice, H: np.ndarray) -> None:
        lat.Hx[self.idx] = H[0]
        lat.Hy[self.idx] = H[1]
        lat.Hz[self.idx] = H[2]


def run(config: SimConfig, bias: float | None = None,
        resume: dict | None = None) -> RunResult:
    """Execute a full run; with ``bias`` set, the magnet bias is overridden.

    ``resume`` accepts a snapshot dict from :func:`snapshot_state` and
    continues from its recorded step; the result is bit-identical to an
    uninterrupted run.
    """
    if bias is not None:
        materials = _materials_with_bias(config.materials, bias,
                                         config.bias_direction)
    else:
        materials = config.materials
    lat = allocate(config.grid, materials)
    dt = config.dt
    n_steps = config.n_steps
    mag = _MagneticCells(lat)
    buffers: dict = {(p[0], (p[1], p[2], p[3])): [] for p in config.probes}
    iters: list[int] = []
    start = 0
    if resume is not None:
        lat.load_state(resume["fields"])
        start = int(resume["step"])
        for key, vals in resume["probes"].items():
            buffers[key] = list(vals)
        iters = list(resume["iterations"])
    for n in range(start, n_steps):
        curlE = em.curl_E(lat)
        em.update_H_nonmagnetic(lat, dt, curlE)
        if mag.any:
            Hn = mag.gather_H(lat)
            Mn = lat.M[:, mag.idx[0], mag.idx[1], mag.idx[2]]
            cE = mag.gather(curlE)
            try:
                Hn1, Mn1, it = llg.coupled_cell_step(
                    Hn, Mn, mag.Hbias, cE, dt, mag.alpha, mag.Ms,
                    mag.gamma, config.llg_params)
            except llg.StepFailure as exc:
                exc.step = n
                raise
            mag.scatter_H(lat, Hn1)
            lat.M[:, mag.idx[0], mag.idx[1], mag.idx[2]] = Mn1
            iters.append(it)
        em.update_E(lat, dt, config.boundaries)
        em.inject_soft_source(lat, config.source, (n + 1) * dt)
        for (comp, loc), buf in buffers.items():
            buf.append(lat.sample(comp, *loc))
    probes = {
        key: ProbeSeries(component=key[0], location=key[1],
                         bias=0.0 if bias is None else bias,
                         dt_sample=dt, samples=np.asarray(vals))
        for key, vals in buffers.items()
    }
    return RunResult(probes=probes, lattice=lat,
                     iterations=np.asarray(iters, dtype=int),
                     steps=n_steps, bias=0.0 if bias is None else bias)


# ---------------------------------------------------------------------------
# snapshot / restart
# ---------------------------------------------------------------------------

def snapshot_state(config: SimConfig, bias: float | None,
                   until_step: int) -> dict:
    """Run to ``until_step`` steps and capture a resumable snapshot."""
    partial = replace(config, t_end=until_step * config.dt)
    res = run(partial, bias=bias)
    return {
        "fields": res.lattice.state_arrays(),
        "step": res.steps,
        "probes": {k: v.samples for k, v in res.probes.items()},
        "iterations": res.iterations,
    }


def save_snapshot(path, snap: dict) -> None:
    flat = {f"field_{k}": v for k, v in snap["fields"].items()}
    flat["step"] = np.asarray(snap["step"])
    flat["iterations"] = np.asarray(snap["iterations"])
    for (comp, loc), vals in snap["probes"].items():
        flat[f"probe_{comp}_{loc[0]}_{loc[1]}_{loc[2]}"] = np.asarray(vals)
    np.savez(path, **flat)


def load_snapshot(path) -> dict:
    data = np.load(path)
    fields = {}
    probes = {}
    for key in data.files:
        if key.startswith("field_"):
            fields[key[len("field_"):]] = data[key]
        elif key.startswith("probe_"):
            comp, i, j, k = key[len("probe_"):].rsplit("_", 3)
            probes[(comp, (int(i), int(j), int(k)))] = data[key]
    return {"fields": fields, "step": int(data["step"]),
            "probes": probes, "iterations": data["iterations"]}


# ---------------------------------------------------------------------------
# sweeps and curation
# ---------------------------------------------------------------------------

@dataclass
class SpectrumMap:
    biases: np.ndarray        # A/m
    freqs: np.ndarray         # Hz
    mags: np.ndarray          # (n_bias, n_freq)


def _sweep_one(args) -> tuple[np.ndarray, np.ndarray]:
    config, bias = args
    from .analysis import fft_magnitude
    res = run(config, bias=bias)
    probe = list(res.probes.values())[config.spectrum_probe]
    spec = fft_magnitude(probe, window="hann")
    return spec.freqs, spec.mags


def sweep(config: SimConfig, biases=None, parallel: int = 1) -> SpectrumMap:
    """One run per bias; rows of FFT magnitude of the designated probe.

    Results are assembled in bias order regardless of ``parallel``, so
    serial and parallel sweeps produce identical output.
    """
    biases = np.asarray(config.bias_sweep if biases is None else biases, float)
    if biases.size == 0:
        raise ValueError("bias sweep must be non-empty")
    jobs = [(config, float(b)) for b in biases]
    if parallel > 1:
        with multiprocessing.Pool(parallel) as pool:
            rows = pool.map(_sweep_one, jobs)
    else:
        rows = [_sweep_one(j) for j in jobs]
    freqs = rows[0][0]
    mags = np.stack([r[1] for r in rows])
    return SpectrumMap(biases=biases, freqs=freqs, mags=mags)


@dataclass
class CuratedSeries:
    meta: ProbeSeries
    samples: np.ndarray       # truncated + downsampled, physical units
    vmin: float
    vmax: float
    dt_sample: float          # after downsampling


def export_dataset(series: list[ProbeSeries], truncate: int,
                   downsample: int) -> list[CuratedSeries]:
    """Drop the first ``truncate`` samples, keep every ``downsample``-th one,
    and attach per-series min/max normalization parameters."""
    if truncate < 0 or downsample < 1:
        raise ValueError("truncate must be >= 0 and downsample >= 1")
    out = []
    for s in series:
        if len(s.samples) <= truncate:
            raise ValueError(
                f"series of length {len(s.samples)} empty after truncating "
                f"{truncate} samples")
        kept = s.samples[truncate::downsample]
        out.append(CuratedSeries(
            meta=s, samples=kept, vmin=float(kept.min()),
            vmax=float(kept.max()), dt_sample=s.dt_sample * downsample))
    return out
