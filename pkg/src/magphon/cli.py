"""Command-line entry point.

Subcommands: ``simulate``, ``sweep``, ``oracle``, ``curate``, ``train``,
``predict``.  Global flags: ``--seed``, ``--parallel``, ``--dry-run``,
``--out`` (default output directory also via the MAGPHON_OUT environment
variable).  Exit codes: 0 success, 1 usage/config error, 2 runtime failure.

All numeric outputs are plain columnar text with at least 9 significant
digits; every command writes a manifest listing the produced files with
content digests, so runs are auditable and idempotent up to timestamps.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, analysis, oracle, sim, surrogate
from .config import ConfigError, load_config, parse_quantity
from .constants import CONSTANTS
from .llg import StepFailure

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

_FMT = "%.12e"


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out: Path, command: str, config_path: str | None,
                    files: list[Path], started: float,
                    diagnostics: dict) -> Path:
    manifest = {
        "command": command,
        "engine_version": __version__,
        "config": config_path,
        "config_sha256": _sha256(Path(config_path)) if config_path else None,
        "started_unix": started,
        "finished_unix": time.time(),
        "outputs": [{"path": str(p.relative_to(out)), "sha256": _sha256(p)}
                    for p in files],
        "diagnostics": diagnostics,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get("MAGPHON_OUT", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _probe_filename(key) -> str:
    comp, (i, j, k) = key
    return f"probe_{comp}_{i}_{j}_{k}.txt"


def _write_probe(path: Path, series: sim.ProbeSeries) -> None:
    i, j, k = series.location
    with open(path, "w") as f:
        f.write(f"# component={series.component} i={i} j={j} k={k} "
                f"bias_Apm={series.bias:.12e} dt_s={series.dt_sample:.12e}\n")
        for v in series.samples:
            f.write(_FMT % v + "\n")


def read_probe_file(path) -> sim.ProbeSeries:
    with open(path) as f:
        header = f.readline()
        if not header.startswith("#"):
            raise ValueError(f"{path}: missing probe header")
        meta = dict(tok.split("=", 1) for tok in header[1:].split())
        samples = np.array([float(line) for line in f if line.strip()])
    return sim.ProbeSeries(
        component=meta["component"],
        location=(int(meta["i"]), int(meta["j"]), int(meta["k"])),
        bias=float(meta["bias_Apm"]), dt_sample=float(meta["dt_s"]),
        samples=samples)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    started = time.time()
    config = load_config(args.config)
    if args.dry_run:
        est_bytes = 8 * (6 * np.prod(config.grid.field_shape)
                         + 3 * np.prod(config.grid.cell_shape))
        print(f"dt = {config.dt:.6e} s")
        print(f"steps = {config.n_steps}")
        print(f"cells = {config.grid.cell_shape} "
              f"({np.prod(config.grid.cell_shape)} total)")
        print(f"field memory ~ {est_bytes / 1e6:.1f} MB")
        print(f"probes = {len(config.probes)}")
        return EXIT_OK
    out = _out_dir(args)
    result = sim.run(config)
    files = []
    for key, series in result.probes.items():
        p = out / _probe_filename(key)
        _write_probe(p, series)
        files.append(p)
    diag = {
        "steps": result.steps,
        "llg_iterations_median": float(np.median(result.iterations))
        if result.iterations.size else None,
        "llg_iterations_max": int(result.iterations.max())
        if result.iterations.size else None,
    }
    _write_manifest(out, "simulate", args.config, files, started, diag)
    print(f"wrote {len(files)} probe files to {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    started = time.time()
    config = load_config(args.config)
    biases = None
    if args.bias_start is not None:
        start = parse_quantity(args.bias_start)
        stop = parse_quantity(args.bias_stop)
        step = parse_quantity(args.bias_step)
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        biases = [start + i * step for i in range(n)]
    if args.dry_run:
        n = len(biases if biases is not None else config.bias_sweep)
        print(f"sweep of {n} runs, {config.n_steps} steps each, "
              f"dt = {config.dt:.6e} s")
        return EXIT_OK
    out = _out_dir(args)
    smap = sim.sweep(config, biases=biases, parallel=args.parallel)
    path = out / "spectrum_map.txt"
    with open(path, "w") as f:
        f.write("# bias_Apm frequency_Hz magnitude\n")
        for bi, b in enumerate(smap.biases):
            for fr, mg in zip(smap.freqs, smap.mags[bi]):
                f.write(f"{b:.12e} {fr:.12e} {mg:.12e}\n")
    _write_manifest(out, "sweep", args.config, [path], started,
                    {"n_bias": len(smap.biases), "n_freq": len(smap.freqs)})
    print(f"wrote {path}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    out = _out_dir(args)
    started = time.time()
    if args.oracle_cmd == "kittel":
        H0 = parse_quantity(args.h0)
        Ms = parse_quantity(args.ms)
        gamma = float(args.gamma) if args.gamma else CONSTANTS.gamma_eff
        f = oracle.kittel_frequency(H0, Ms, gamma)
        print(f"{f:.9e}")
        return EXIT_OK
    if args.oracle_cmd == "eigenfreq":
        wp = parse_quantity(args.omega_p)
        delta = parse_quantity(args.delta)
        g = parse_quantity(args.g)
        hi, lo = oracle.hybrid_eigenfrequencies(wp, delta, g)
        print(f"{hi:.9e} {lo:.9e}")
        return EXIT_OK
    if args.oracle_cmd == "pabs-map":
        model = oracle.REFERENCE_CAVITY
        fmin = parse_quantity(args.fmin)
        fmax = parse_quantity(args.fmax)
        freqs = np.linspace(fmin, fmax, args.nf)
        biases = [parse_quantity(b) for b in args.bias.split(",")]
        path = out / "pabs_map.txt"
        with open(path, "w") as f:
            f.write("# bias_Apm frequency_Hz P_abs\n")
            for b in biases:
                for fr in freqs:
                    p = oracle.absorbed_power(model, 2 * math.pi * fr, b)
                    f.write(f"{b:.12e} {fr:.12e} {p:.12e}\n")
        _write_manifest(out, "oracle pabs-map", None, [path], started, {})
        print(f"wrote {path}")
        return EXIT_OK
    if args.oracle_cmd == "floquet":
        res = oracle.floquet_scalarized(
            H0=parse_quantity(args.h0), Hx0=parse_quantity(args.hx0),
            Hz0=parse_quantity(args.hz0), f0=parse_quantity(args.f0),
            Ms=parse_quantity(args.ms),
            gamma=float(args.gamma) if args.gamma else CONSTANTS.gamma_eff)
        for ev in res.eigenvalues:
            print(f"{ev.real:.9e} {ev.imag:+.9e}j |ev|={abs(ev):.9e}")
        path = out / "floquet_trajectory.txt"
        with open(path, "w") as f:
            f.write("# t_s Mx_Apm My_Apm Mz_Apm\n")
            for t, m in zip(res.times, res.trajectory):
                f.write(f"{t:.12e} {m[0]:.12e} {m[1]:.12e} {m[2]:.12e}\n")
        _write_manifest(out, "oracle floquet", None, [path], started, {})
        return EXIT_OK
    raise ValueError(f"unknown oracle subcommand {args.oracle_cmd!r}")


def cmd_curate(args) -> int:
    started = time.time()
    out = _out_dir(args)
    files = sorted(Path(args.data).glob("probe_*.txt"))
    if not files:
        print(f"no probe files found in {args.data}", file=sys.stderr)
        return EXIT_USAGE
    series = [read_probe_file(p) for p in files]
    curated = sim.export_dataset(series, truncate=args.truncate,
                                 downsample=args.downsample)
    written = []
    for src, cur in zip(files, curated):
        path = out / f"curated_{src.name}"
        i, j, k = cur.meta.location
        with open(path, "w") as f:
            f.write(f"# component={cur.meta.component} i={i} j={j} k={k} "
                    f"bias_Apm={cur.meta.bias:.12e} dt_s={cur.dt_sample:.12e} "
                    f"vmin={cur.vmin:.12e} vmax={cur.vmax:.12e}\n")
            for v in cur.samples:
                f.write(_FMT % v + "\n")
        written.append(path)
    _write_manifest(out, "curate", None, written, started,
                    {"truncate": args.truncate, "downsample": args.downsample})
    print(f"wrote {len(written)} curated files to {out}")
    return EXIT_OK


def _read_curated_pairs(data_dir: Path):
    """Group curated files into (Mx, Mz) channel pairs per probe location."""
    groups: dict = {}
    metas: dict = {}
    for path in sorted(data_dir.glob("curated_*.txt")):
        with open(path) as f:
            header = f.readline()
            meta = dict(tok.split("=", 1) for tok in header[1:].split())
            samples = np.array([float(line) for line in f if line.strip()])
        loc = (int(meta["i"]), int(meta["j"]), int(meta["k"]))
        groups.setdefault(loc, {})[meta["component"]] = samples
        metas[loc] = meta
    sequences = []
    for loc, chans in groups.items():
        if "Mx" not in chans or "Mz" not in chans:
            continue   # only (Mx, Mz) pairs feed the surrogate
        n = min(len(chans["Mx"]), len(chans["Mz"]))
        seq = np.stack([chans["Mx"][:n], chans["Mz"][:n]], axis=1)
        sequences.append((seq, metas[loc]))
    return sequences


def cmd_train(args) -> int:
    started = time.time()
    out = _out_dir(args)
    pairs = _read_curated_pairs(Path(args.data))
    if not pairs:
        print("no curated (Mx, Mz) pairs found", file=sys.stderr)
        return EXIT_USAGE
    dt_ml = float(pairs[0][1]["dt_s"])
    physical = surrogate.PhysicalParams(
        Ms=parse_quantity(args.ms), H0=parse_quantity(args.h0),
        alpha=float(args.alpha), dt_ml=dt_ml,
        gamma=float(args.gamma) if args.gamma else abs(CONSTANTS.gamma_e))
    seqs, los, his = [], [], []
    for seq, _meta in pairs:
        norm = np.empty_like(seq)
        for c in range(2):
            norm[:, c], lo, hi = analysis.minmax(seq[:, c])
            los.append(lo), his.append(hi)
        seqs.append(norm)
    model = surrogate.SurrogateModel(
        channels=2, hidden=args.hidden, physical=physical,
        norm_lo=np.array(los[:2]), norm_hi=np.array(his[:2]))
    schedule = surrogate.default_schedule(args.epochs)
    if args.max_window:
        schedule = [surrogate.CurriculumStage(
            lr=s.lr, pred_len=min(s.pred_len, args.max_window),
            batch=s.batch, lambda_phy=s.lambda_phy,
            input_len=min(s.input_len, args.max_window), epochs=s.epochs)
            for s in schedule]
    history = surrogate.train(model, seqs, schedule, seed=args.seed)
    ckpt = out / "model.ckpt"
    surrogate.save_checkpoint(ckpt, model, history)
    loss_path = out / "loss_history.txt"
    with open(loss_path, "w") as f:
        f.write("# stage epoch total reconstruction prediction physics\n")
        for r in history:
            f.write(f"{r.stage} {r.epoch} {r.loss:.12e} "
                    f"{r.reconstruction:.12e} {r.prediction:.12e} "
                    f"{r.physics:.12e}\n")
    _write_manifest(out, "train", None, [ckpt, loss_path], started,
                    {"final_loss": history[-1].loss if history else None,
                     "seed": args.seed})
    print(f"wrote {ckpt}")
    return EXIT_OK


def cmd_predict(args) -> int:
    import torch
    started = time.time()
    out = _out_dir(args)
    model, _history = surrogate.load_checkpoint(args.checkpoint)
    pairs = _read_curated_pairs(Path(args.data))
    if not pairs:
        print("no curated (Mx, Mz) pairs found", file=sys.stderr)
        return EXIT_USAGE
    seq, meta = pairs[0]
    if seq.shape[1] != model.channels:
        print(f"channel count {seq.shape[1]} does not match checkpoint "
              f"({model.channels})", file=sys.stderr)
        return EXIT_USAGE
    lo = model.norm_lo.numpy()
    hi = model.norm_hi.numpy()
    norm = (seq - lo) / (hi - lo)
    n_prefix = max(1, int(len(norm) * args.prefix_frac))
    n_pred = len(norm) - n_prefix
    with torch.no_grad():
        states = model.encode(torch.as_tensor(norm[None, :n_prefix],
                                              dtype=surrogate.DTYPE))
        pred = model.decode(states, n_pred)[0].numpy()
    pred_phys = pred * (hi - lo) + lo
    dt_ml = float(meta["dt_s"])
    path = out / "prediction.txt"
    with open(path, "w") as f:
        f.write(f"# t_s Mx_pred Mz_pred Mx_true Mz_true dt_s={dt_ml:.12e} "
                f"prefix={n_prefix}\n")
        for n in range(n_pred):
            t = (n_prefix + n) * dt_ml
            f.write(f"{t:.12e} {pred_phys[n, 0]:.12e} {pred_phys[n, 1]:.12e} "
                    f"{seq[n_prefix + n, 0]:.12e} {seq[n_prefix + n, 1]:.12e}\n")
    spec = analysis.fft_magnitude((pred_phys[:, 0], dt_ml))
    spath = out / "prediction_spectrum.txt"
    with open(spath, "w") as f:
        f.write("# frequency_Hz magnitude\n")
        for fr, mg in zip(spec.freqs, spec.mags):
            f.write(f"{fr:.12e} {mg:.12e}\n")
    _write_manifest(out, "predict", None, [path, spath], started,
                    {"prefix_samples": n_prefix, "predicted_samples": n_pred})
    print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="magphon",
        description="Coupled electromagnetic-micromagnetic simulation engine")
    p.add_argument("--seed", type=int, default=0, help="RNG seed")
    p.add_argument("--parallel", type=int, default=1,
                   help="worker processes for sweeps")
    p.add_argument("--dry-run", action="store_true",
                   help="validate inputs and print derived quantities only")
    p.add_argument("--out", default=None,
                   help="output directory (default: $MAGPHON_OUT or .)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one simulation from a config")
    s.add_argument("config")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep", help="run a bias sweep and emit a spectrum map")
    s.add_argument("config")
    s.add_argument("--bias-start")
    s.add_argument("--bias-stop")
    s.add_argument("--bias-step")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("oracle", help="closed-form reference evaluations")
    osub = s.add_subparsers(dest="oracle_cmd", required=True)
    k = osub.add_parser("kittel")
    k.add_argument("--h0", default="2050 Oe")
    k.add_argument("--ms", default="12000 G")
    k.add_argument("--gamma", default=None, help="Hz*m/A override")
    e = osub.add_parser("eigenfreq")
    e.add_argument("--omega-p", required=True)
    e.add_argument("--delta", required=True)
    e.add_argument("--g", required=True)
    m = osub.add_parser("pabs-map")
    m.add_argument("--fmin", default="13 GHz")
    m.add_argument("--fmax", default="16 GHz")
    m.add_argument("--nf", type=int, default=601)
    m.add_argument("--bias", default="1800 Oe",
                   help="comma-separated bias list")
    fl = osub.add_parser("floquet")
    fl.add_argument("--h0", required=True)
    fl.add_argument("--hx0", default="0 A/m")
    fl.add_argument("--hz0", default="0 A/m")
    fl.add_argument("--f0", required=True)
    fl.add_argument("--ms", default="9.7e5 A/m")
    fl.add_argument("--gamma", default=None)
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("curate", help="truncate/downsample probe files")
    s.add_argument("data", help="directory with probe_*.txt files")
    s.add_argument("--truncate", type=int, default=160)
    s.add_argument("--downsample", type=int, default=1000)
    s.set_defaults(func=cmd_curate)

    s = sub.add_parser("train", help="train the forecasting surrogate")
    s.add_argument("data", help="directory with curated_*.txt files")
    s.add_argument("--ms", default="9.7e5 A/m")
    s.add_argument("--h0", required=True)
    s.add_argument("--alpha", default="0.003")
    s.add_argument("--gamma", default=None)
    s.add_argument("--hidden", type=int, default=64)
    s.add_argument("--epochs", type=int, default=1250)
    s.add_argument("--max-window", type=int, default=None,
                   help="cap curriculum window lengths (small datasets)")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict", help="forecast from a trained checkpoint")
    s.add_argument("checkpoint")
    s.add_argument("data", help="directory with curated_*.txt files")
    s.add_argument("--prefix-frac", type=float, default=0.2)
    s.set_defaults(func=cmd_predict)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (StepFailure, FloatingPointError, RuntimeError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
