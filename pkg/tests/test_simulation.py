import numpy as np
import pytest

from magphon import em, sim
from magphon.constants import oersted_to_si
from magphon.grid import GridSpec
from magphon.materials import MaterialCell, MaterialMap


def small_config(nz=120, t_end=4e-12, with_magnet=True, bias_sweep=()):
    grid = GridSpec(1, 1, nz, 2e-6, 2e-6, 2e-6)
    mm = MaterialMap(grid.cell_shape, MaterialCell(sigma=1e-4, eps_r=8.0))
    if with_magnet:
        mm.fill_box(MaterialCell(sigma=1e-3, eps_r=1.0, Ms=9.7e5, alpha=0.003,
                                 Hbias=(oersted_to_si(1855.3), 0.0, 0.0)),
                    0, 1, 0, 1, nz // 2, nz // 2 + 1)
    mm.freeze()
    source = em.SourceSpec(f0=14.3e9, Tp=1e-12, amplitude=1e3,
                           location=(0, 0, 10), polarization=(1, 0, 0))
    return sim.SimConfig(
        grid=grid, materials=mm, source=source,
        boundaries=em.BoundarySpec(z0="PMC", z1="PMC"),
        cfl_factor=0.9, t_end=t_end,
        probes=(("Ex", 0, 0, 20), ("Mz", 0, 0, nz // 2)),
        bias_sweep=bias_sweep, bias_direction=(1.0, 0.0, 0.0))


# ---------------------------------------------------------------------------
# config validation and derived quantities
# ---------------------------------------------------------------------------

def test_config_rejects_bad_probe_and_t_end():
    cfg = small_config()
    with pytest.raises(ValueError):
        sim.SimConfig(**{**cfg.__dict__, "probes": (("Ex", 0, 0, 10_000),)})
    with pytest.raises(ValueError):
        sim.SimConfig(**{**cfg.__dict__, "t_end": 0.0})


def test_config_dt_and_steps():
    cfg = small_config(t_end=1e-12)
    assert cfg.dt == pytest.approx(0.9 * 2e-6 / 299792458.0, rel=1e-12)
    assert cfg.n_steps == int(np.ceil(1e-12 / cfg.dt))


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------

def test_run_records_probes_and_iterations():
    cfg = small_config()
    res = sim.run(cfg)
    assert res.steps == cfg.n_steps
    ex = res.probes[("Ex", (0, 0, 20))]
    mz = res.probes[("Mz", (0, 0, 60))]
    assert len(ex) == len(mz) == res.steps
    assert ex.dt_sample == cfg.dt
    assert np.abs(ex.samples).max() > 0.0
    assert res.iterations.shape == (res.steps,)
    assert res.iterations.max() >= 1


def test_run_without_magnets_has_no_iterations():
    cfg = small_config(with_magnet=False)
    res = sim.run(cfg)
    assert res.iterations.size == 0


def test_run_is_deterministic():
    cfg = small_config()
    a = sim.run(cfg).probes[("Ex", (0, 0, 20))].samples
    b = sim.run(cfg).probes[("Ex", (0, 0, 20))].samples
    np.testing.assert_array_equal(a, b)


def test_bias_override_changes_magnon_dynamics():
    cfg = small_config(t_end=8e-12)
    lo = sim.run(cfg, bias=oersted_to_si(1000.0))
    hi = sim.run(cfg, bias=oersted_to_si(2400.0))
    assert lo.bias != hi.bias
    a = lo.probes[("Mz", (0, 0, 60))].samples
    b = hi.probes[("Mz", (0, 0, 60))].samples
    assert np.abs(a - b).max() > 0.0


# ---------------------------------------------------------------------------
# snapshot / restart
# ---------------------------------------------------------------------------

def test_snapshot_resume_is_bit_identical(tmp_path):
    cfg = small_config(t_end=6e-12)
    full = sim.run(cfg, bias=oersted_to_si(1855.3))
    snap = sim.snapshot_state(cfg, oersted_to_si(1855.3),
                              until_step=cfg.n_steps // 2)
    path = tmp_path / "snap.npz"
    sim.save_snapshot(path, snap)
    resumed = sim.run(cfg, bias=oersted_to_si(1855.3),
                      resume=sim.load_snapshot(path))
    for key in full.probes:
        np.testing.assert_array_equal(resumed.probes[key].samples,
                                      full.probes[key].samples)
    np.testing.assert_array_equal(resumed.iterations, full.iterations)
    for name, arr in full.lattice.state_arrays().items():
        np.testing.assert_array_equal(resumed.lattice.state_arrays()[name],
                                      arr)


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def test_sweep_serial_parallel_identical():
    biases = [oersted_to_si(b) for b in (1700.0, 1855.3)]
    cfg = small_config(t_end=3e-12, bias_sweep=tuple(biases))
    serial = sim.sweep(cfg, parallel=1)
    par = sim.sweep(cfg, parallel=2)
    np.testing.assert_array_equal(serial.mags, par.mags)
    np.testing.assert_array_equal(serial.freqs, par.freqs)
    assert serial.mags.shape == (2, len(serial.freqs))


def test_sweep_rejects_empty_bias_list():
    cfg = small_config(t_end=3e-12)
    with pytest.raises(ValueError):
        sim.sweep(cfg)


# ---------------------------------------------------------------------------
# dataset curation
# ---------------------------------------------------------------------------

def test_export_dataset_truncates_and_downsamples():
    s = sim.ProbeSeries(component="Mx", location=(0, 0, 1), bias=1.0,
                        dt_sample=1e-12, samples=np.arange(100, dtype=float))
    (cur,) = sim.export_dataset([s], truncate=10, downsample=5)
    np.testing.assert_array_equal(cur.samples, np.arange(10, 100, 5.0))
    assert cur.dt_sample == 5e-12
    assert cur.vmin == 10.0 and cur.vmax == 95.0


def test_export_dataset_validation():
    s = sim.ProbeSeries(component="Mx", location=(0, 0, 1), bias=1.0,
                        dt_sample=1e-12, samples=np.arange(5, dtype=float))
    with pytest.raises(ValueError):
        sim.export_dataset([s], truncate=-1, downsample=1)
    with pytest.raises(ValueError):
        sim.export_dataset([s], truncate=5, downsample=1)
