#!/usr/bin/env python3
"""Reproduce the headline comparison on synthetic shifted domains:
per-domain z-scoring (Z2) with a plain SVM versus unnormalized data with
and without TCA. Writes a full report directory and prints the table.
"""

import argparse
import sys
import time

from normda.bench import ExperimentConfig, MethodSpec, emit_table, run_experiment, write_report
from normda.dataset import SyntheticShiftConfig
from normda.normalize import NormStrategy


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="headline_report")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--subjects", type=int, default=6)
    parser.add_argument("--shift", type=float, default=10.0)
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()

    cfg = ExperimentConfig(
        dataset=SyntheticShiftConfig(
            n_subjects=args.subjects, n_sessions=1, n_classes=2,
            samples_per_class_per_domain=100, dim=8, class_separation=4.0,
            domain_shift_scale=args.shift, noise_std=1.0, seed=args.seed,
        ),
        protocol="loso",
        strategies=(NormStrategy.NO_NORM, NormStrategy.Z0, NormStrategy.Z2),
        methods=(MethodSpec("noDA-SVM"), MethodSpec("TCA-SVM"), MethodSpec("KPCA-SVM")),
        seed=args.seed,
        output_dir=args.out,
        emit_projections=True,
    )
    start = time.perf_counter()
    report = run_experiment(cfg, jobs=args.jobs)
    print(emit_table(report, "markdown"))
    write_report(report, cfg.output_dir)
    print(f"report written to {cfg.output_dir}/ in {time.perf_counter() - start:.0f}s")

    z2 = report.cell("Z2", "noDA-SVM").mean
    raw_tca = report.cell("noNorm", "TCA-SVM").mean
    raw_svm = report.cell("noNorm", "noDA-SVM").mean
    print(
        f"\nZ2 + plain SVM: {z2:.3f} | noNorm + TCA-SVM: {raw_tca:.3f} | "
        f"noNorm + plain SVM: {raw_svm:.3f}"
    )
    if z2 >= raw_tca and z2 >= raw_svm:
        print("per-domain normalization alone beats the unnormalized DA pipeline here")
    return 0


if __name__ == "__main__":
    sys.exit(main())
