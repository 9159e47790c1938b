"""Command-line surface for the calibration pipeline.

Subcommands map to the pipeline stages: simulate, pairs, symcheck,
mirror, train, recover, reconstruct, eval, ablate, render. Every
subcommand is deterministic for a fixed config and seed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import kaczmarz, metrics, phantoms, physics, sampling, smio, sr, symmetry
from .core import (
    DomainError,
    Grid3,
    ParticleModel,
    ScanSequence,
    SystemMatrix,
)

SIMULATE_KEYS = {
    "nx", "ny", "nz", "fov_x", "fov_y", "fov_z",
    "gradient", "amplitude", "base_period", "dividers",
    "n_time_samples", "k_max",
    "m_sat", "beta",
    "channels", "k_start", "k_stop",
}

_SIM_DEFAULTS = {
    "nx": "37", "ny": "37", "nz": "1",
    "fov_x": "0.02", "fov_y": "0.02", "fov_z": "0.001",
    "gradient": "2.0", "amplitude": "0.024",
    "base_period": "4e-5", "dividers": "16,17",
    "n_time_samples": "4096", "k_max": "512",
    "m_sat": "1.0", "beta": "150.0",
    "channels": "x,y", "k_start": "16", "k_stop": "115",
}


def benchmark_setup():
    """Scan setup of the default simulated benchmark.

    Returns (sequence, particle model, grid, channels, harmonic range).
    The moderate beta keeps low-order intermodulation dominant, so the
    rows vary slowly enough across the grid for super-resolution from
    stride-decimated measurements to be well-posed.
    """
    return _simulate_setup({})


def _simulate_setup(cfg: dict[str, str]):
    merged = dict(_SIM_DEFAULTS)
    merged.update(cfg)
    dividers = [int(v) for v in merged["dividers"].split(",") if v.strip()]
    dividers += [0] * (3 - len(dividers))
    amp = float(merged["amplitude"])
    amps = tuple(amp if d > 0 else 0.0 for d in dividers)
    g = float(merged["gradient"])
    seq = ScanSequence(
        gradient=(g, g, g),
        amplitude=amps,
        base_period=float(merged["base_period"]),
        freq_dividers=tuple(dividers),
        n_time_samples=int(merged["n_time_samples"]),
        k_max=int(merged["k_max"]),
    )
    pm = ParticleModel(m_sat=float(merged["m_sat"]), beta=float(merged["beta"]))
    grid = Grid3(
        nx=int(merged["nx"]), ny=int(merged["ny"]), nz=int(merged["nz"]),
        fov_x=float(merged["fov_x"]), fov_y=float(merged["fov_y"]),
        fov_z=float(merged["fov_z"]),
    )
    channels = [c.strip() for c in merged["channels"].split(",") if c.strip()]
    ks = range(int(merged["k_start"]), int(merged["k_stop"]) + 1)
    return seq, pm, grid, channels, ks


def cmd_simulate(args) -> int:
    cfg = smio.load_config(args.config, SIMULATE_KEYS) if args.config else {}
    for key, val in args.set or []:
        if key not in SIMULATE_KEYS:
            raise DomainError(f"unknown config key {key!r}")
        cfg[key] = val
    seq, pm, grid, channels, ks = _simulate_setup(cfg)
    sm = physics.simulate_system_matrix(seq, pm, grid, channels, ks)
    smio.write_sm(args.out, sm)
    print(f"wrote {args.out}: {len(sm)} rows on {grid.dims}")
    return 0


def cmd_pairs(args) -> int:
    sm = smio.read_sm(args.sm)
    padded = sampling.zero_pad(sm, pre=args.pad_pre, post=args.pad_post)
    pairs = sampling.make_pairs(padded, args.ratio)
    pairs = sampling.split_pairs(pairs, args.val_fraction, seed=args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lr = SystemMatrix(pairs.lr_rows[0].grid, pairs.lr_rows, provenance=padded.provenance)
    hr = SystemMatrix(pairs.hr_rows[0].grid, pairs.hr_rows, provenance=padded.provenance)
    smio.write_sm(out / "lr.smb", lr)
    smio.write_sm(out / "hr.smb", hr)
    rows = []
    for i, (l, h, tag) in enumerate(zip(pairs.lr_rows, pairs.hr_rows, pairs.split)):
        rows.append((i, l.channel, l.freq_index, tag,
                     *l.grid.dims, *h.grid.dims))
    smio.write_csv(
        out / "manifest.csv",
        ["index", "channel", "freq_index", "split",
         "lr_nx", "lr_ny", "lr_nz", "hr_nx", "hr_ny", "hr_nz"],
        rows,
    )
    n_train = sum(1 for t in pairs.split if t == "train")
    print(f"wrote {out}: {len(pairs)} pairs (ratio {args.ratio}), "
          f"{n_train} train / {len(pairs) - n_train} validation")
    return 0


def _infer_dim(grid: Grid3) -> int:
    return len(grid.spatial_axes())


def cmd_symcheck(args) -> int:
    sm = smio.read_sm(args.sm)
    dim = args.dim or _infer_dim(sm.grid)
    rows = []
    for row in sm.rows:
        desc = symmetry.expected_parity(row.channel, row.freq_index, dim)
        if not desc.axis_rules:
            continue
        for axis, res in symmetry.symmetry_residual(row, desc).items():
            rows.append((row.channel, row.freq_index, axis,
                         desc.axis_rules[axis], res))
    smio.write_csv(args.out, ["channel", "freq_index", "axis", "rule", "residual"], rows)
    worst = max((r[-1] for r in rows), default=0.0)
    print(f"wrote {args.out}: {len(rows)} residuals, worst {worst:.3e}")
    return 0


def cmd_mirror(args) -> int:
    sm = smio.read_sm(args.sm)
    dim = args.dim or _infer_dim(sm.grid)
    out_rows = []
    completed = 0
    for row in sm.rows:
        desc = symmetry.expected_parity(row.channel, row.freq_index, dim)
        if not desc.axis_rules:
            out_rows.append(row)
            continue
        mask = symmetry.fundamental_domain_mask(row.grid, desc)
        out_rows.append(symmetry.mirror_complete(row, mask, desc))
        completed += 1
    smio.write_sm(args.out, SystemMatrix(sm.grid, tuple(out_rows), "recovered"))
    print(f"wrote {args.out}: {completed}/{len(sm)} rows mirror-completed")
    return 0


def _load_pairs(pairs_dir, ratio: int) -> sampling.PairSet:
    d = Path(pairs_dir)
    lr = smio.read_sm(d / "lr.smb")
    hr = smio.read_sm(d / "hr.smb")
    tags = []
    for line in (d / "manifest.csv").read_text().splitlines()[1:]:
        tags.append(line.split(",")[3])
    return sampling.PairSet(lr.rows, hr.rows, ratio, tuple(tags))


def _train_one(pairs, mode, upsample, ratio, args, seed):
    ndim = _infer_dim(pairs.hr_rows[0].grid)
    cfg = sr.SRConfig(mode=mode, ratio=ratio, ndim=ndim, upsample=upsample,
                      blocks=args.blocks, dense_stages=args.dense_stages,
                      channels=args.feat_channels, growth=args.feat_channels)
    import torch

    torch.manual_seed(seed)
    model = sr.SRModel(cfg)
    tcfg = sr.TrainConfig(learning_rate=args.lr, batch_size=args.batch,
                          max_epochs=args.epochs, seed=seed, augment=not args.no_augment)
    return sr.train(model, pairs, tcfg)


def cmd_train(args) -> int:
    pairs = _load_pairs(args.pairs_dir, args.ratio)
    model, history = _train_one(pairs, args.mode, args.upsample, args.ratio,
                                args, args.seed)
    sr.save_checkpoint(args.out, model)
    if args.history:
        smio.write_csv(args.history, ["epoch", "train_loss", "val_nrmse"],
                       [(h["epoch"], h["train_loss"], h["val_nrmse"]) for h in history])
    best = min((h["val_nrmse"] for h in history), default=float("nan"))
    print(f"wrote {args.out}: best validation NRMSE {best:.5f}")
    return 0


def cmd_recover(args) -> int:
    lr = smio.read_sm(args.sm)
    if args.model:
        model = sr.load_checkpoint(args.model)
        out = sr.recover(model, lr, args.ratio)
    elif args.method:
        out = sr.baseline_interpolate(lr, args.ratio, args.method)
    else:
        raise DomainError("recover needs either --model or --method")
    smio.write_sm(args.out, out)
    print(f"wrote {args.out}: {len(out)} rows on {out.grid.dims}")
    return 0


def cmd_reconstruct(args) -> int:
    sm = smio.read_sm(args.sm)
    truth = smio.read_sm(args.truth) if args.truth else sm
    phantom = smio.read_phantom(args.phantom)
    cfg = kaczmarz.KaczmarzConfig(lam=args.lam, sweeps=args.sweeps)
    u = physics.forward_signal(truth, phantom)
    log: list[float] = []
    recon = kaczmarz.kaczmarz_solve(sm, u, cfg, residual_log=log)
    smio.write_phantom(args.out, recon)
    if args.residual_log:
        smio.write_csv(args.residual_log, ["sweep", "relative_residual"],
                       list(enumerate(log)))
    print(f"wrote {args.out}: final residual {log[-1] if log else float('nan'):.4e}")
    return 0


def cmd_eval(args) -> int:
    est_path, truth_path = Path(args.estimate), Path(args.truth)
    if est_path.suffix == ".phb":
        est, truth = smio.read_phantom(est_path), smio.read_phantom(truth_path)
        report = metrics.MetricReport(
            method=args.method, ratio=args.ratio, seed=args.seed,
            per_row_nrmse=(metrics.nrmse(est, truth),),
            psnr_db=metrics.psnr(est, truth),
            ssim=metrics.ssim(est, truth),
        )
    else:
        est, truth = smio.read_sm(est_path), smio.read_sm(truth_path)
        report = metrics.sm_nrmse_report(args.method, args.ratio, args.seed,
                                         est.rows, truth.rows)
    smio.atomic_write_text(args.out, metrics.benchmark_report([report]))
    print(f"wrote {args.out}: mean NRMSE {report.mean_nrmse:.5f}")
    return 0


ABLATION_MODES = (
    ("M1", "none", "nearest"),
    ("M2", "normalized", "nearest"),
    ("M3", "symmetric", "nearest"),
    ("PPG", "symmetric", "linear"),
)


def cmd_ablate(args) -> int:
    sm = smio.read_sm(args.sm)
    padded = sampling.zero_pad(sm, pre=args.pad_pre, post=args.pad_post)
    ratios = [int(r) for r in args.ratios.split(",")]
    seeds = list(range(args.seed, args.seed + args.seeds))
    rows = []
    for ratio in ratios:
        pairs = sampling.make_pairs(padded, ratio)
        for name, mode, upsample in ABLATION_MODES:
            vals = []
            for seed in seeds:
                split = sampling.split_pairs(pairs, args.val_fraction, seed=seed)
                _, history = _train_one(split, mode, upsample, ratio, args, seed)
                vals.append(min(h["val_nrmse"] for h in history))
            rows.append((name, ratio, len(seeds), float(np.mean(vals))))
            print(f"{name} ratio {ratio}: mean val NRMSE {np.mean(vals):.5f}")
    smio.write_csv(args.out, ["method", "ratio", "seeds", "mean_val_nrmse"], rows)
    print(f"wrote {args.out}")
    return 0


def cmd_render(args) -> int:
    path = Path(args.infile)
    if path.suffix == ".phb":
        field = smio.read_phantom(path).concentration
    else:
        sm = smio.read_sm(path)
        field = sm.rows[args.row].values
    if args.part == "real":
        field = np.real(field)
    elif args.part == "imag":
        field = np.imag(field)
    else:
        field = np.abs(field)
    smio.write_pgm(args.out, smio.central_slice(field))
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smcal",
                                description="MPI system-matrix calibration toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate a ground-truth system matrix")
    s.add_argument("--config", help="key = value config file")
    s.add_argument("--set", nargs=2, action="append", metavar=("KEY", "VALUE"),
                   help="override a config key")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("pairs", help="build padded LR/HR training pairs")
    s.add_argument("--sm", required=True)
    s.add_argument("--ratio", type=int, required=True, choices=(2, 4))
    s.add_argument("--out-dir", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--val-fraction", type=float, default=0.10)
    s.add_argument("--pad-pre", type=int, default=1)
    s.add_argument("--pad-post", type=int, default=2)
    s.set_defaults(func=cmd_pairs)

    s = sub.add_parser("symcheck", help="parity residual report")
    s.add_argument("--sm", required=True)
    s.add_argument("--dim", type=int, choices=(1, 2))
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_symcheck)

    s = sub.add_parser("mirror", help="mirror-complete rows from a fundamental domain")
    s.add_argument("--sm", required=True)
    s.add_argument("--dim", type=int, choices=(1, 2))
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_mirror)

    def train_flags(s):
        s.add_argument("--epochs", type=int, default=60)
        s.add_argument("--batch", type=int, default=8)
        s.add_argument("--lr", type=float, default=1e-3)
        s.add_argument("--blocks", type=int, default=2)
        s.add_argument("--dense-stages", type=int, default=3)
        s.add_argument("--feat-channels", type=int, default=16)
        s.add_argument("--no-augment", action="store_true")
        s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("train", help="fit the super-resolution model")
    s.add_argument("--pairs-dir", required=True)
    s.add_argument("--ratio", type=int, required=True)
    s.add_argument("--mode", default="symmetric", choices=sr.MODES)
    s.add_argument("--upsample", default="linear", choices=sr.UPSAMPLES)
    s.add_argument("--out", required=True)
    s.add_argument("--history")
    train_flags(s)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("recover", help="recover a HR SM (learned or baseline)")
    s.add_argument("--sm", required=True)
    s.add_argument("--ratio", type=int, required=True)
    s.add_argument("--model")
    s.add_argument("--method", choices=sr.BASELINES)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_recover)

    s = sub.add_parser("reconstruct", help="Kaczmarz phantom reconstruction")
    s.add_argument("--sm", required=True)
    s.add_argument("--truth", help="SM used to generate the signal (default: --sm)")
    s.add_argument("--phantom", required=True)
    s.add_argument("--lam", type=float, default=0.75)
    s.add_argument("--sweeps", type=int, default=3)
    s.add_argument("--out", required=True)
    s.add_argument("--residual-log")
    s.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("eval", help="metric report (SMB or PHB inputs)")
    s.add_argument("--estimate", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--method", default="estimate")
    s.add_argument("--ratio", type=int, default=0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("ablate", help="run the M1/M2/M3/PPG ablation grid")
    s.add_argument("--sm", required=True)
    s.add_argument("--ratios", default="2,4")
    s.add_argument("--seeds", type=int, default=5)
    s.add_argument("--val-fraction", type=float, default=0.10)
    s.add_argument("--pad-pre", type=int, default=1)
    s.add_argument("--pad-post", type=int, default=2)
    s.add_argument("--out", required=True)
    train_flags(s)
    s.set_defaults(func=cmd_ablate)

    s = sub.add_parser("render", help="export a central slice as PGM")
    s.add_argument("--infile", required=True)
    s.add_argument("--row", type=int, default=0)
    s.add_argument("--part", default="abs", choices=("abs", "real", "imag"))
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_render)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DomainError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
