#!/usr/bin/env python3
"""Super-resolution benchmark: train the position-prior model on the
simulated system matrix and compare against interpolation baselines.

Writes a CSV with one line per (method, ratio) and prints it.
"""

import argparse
import sys

import numpy as np
import torch

from smcal import physics, sampling, smio, sr
from smcal.cli import benchmark_setup
from smcal.metrics import MetricReport, benchmark_report, nrmse


def evaluate(est_rows, truth_rows):
    return [nrmse(a.values, b.values) for a, b in zip(est_rows, truth_rows)]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ratios", default="2,4")
    ap.add_argument("--epochs", type=int, default=150)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", default="benchmark.csv")
    args = ap.parse_args(argv)

    seq, pm, grid, channels, ks = benchmark_setup()
    print(f"simulating {len(channels) * len(list(ks))} rows on {grid.dims} ...")
    sm = physics.simulate_system_matrix(seq, pm, grid, channels, ks)
    padded = sampling.zero_pad(sm)

    reports = []
    for ratio in (int(r) for r in args.ratios.split(",")):
        pairs = sampling.split_pairs(sampling.make_pairs(padded, ratio),
                                     seed=args.seed)
        val = pairs.subset("validation")
        val_lr = padded.with_rows(val.lr_rows, grid=val.lr_rows[0].grid)

        for method in ("nearest", "trilinear", "zero-order"):
            est = sr.baseline_interpolate(val_lr, ratio, method)
            reports.append(MetricReport(
                method, ratio, args.seed,
                per_row_nrmse=tuple(evaluate(est.rows, val.hr_rows))))

        torch.manual_seed(args.seed)
        model = sr.SRModel(sr.SRConfig(mode="symmetric", ratio=ratio,
                                       ndim=2, upsample="linear"))
        model, history = sr.train(
            model, pairs, sr.TrainConfig(max_epochs=args.epochs, seed=args.seed))
        est = sr.recover(model, val_lr, ratio)
        reports.append(MetricReport(
            "PPG", ratio, args.seed,
            per_row_nrmse=tuple(evaluate(est.rows, val.hr_rows))))
        print(f"ratio {ratio}: trained ({len(history)} epochs)")

    table = benchmark_report(reports)
    smio.atomic_write_text(args.out, table)
    print(table)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
