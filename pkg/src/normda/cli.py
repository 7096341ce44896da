"""Command-line entry point.

Subcommands: synth (write a synthetic dataset CSV), run (execute an
experiment config and write a report directory), project (2-D projection
CSV for one fold and strategy), table (re-render a report directory),
validate (dataset diagnostics). Exit codes: 0 ok, 2 configuration,
3 I/O, 4 experiment failure under --strict.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bench, dataset
from .errors import NormdaError
from .normalize import NormStrategy

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_EXPERIMENT = 4


def _load_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise _CliIoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise _CliConfigError(f"{path}: invalid JSON: {exc}") from exc


class _CliConfigError(Exception):
    pass


class _CliIoError(Exception):
    pass


def cmd_synth(args) -> int:
    raw = _load_json(args.config)
    try:
        cfg = dataset.SyntheticShiftConfig(**raw)
    except (TypeError, NormdaError) as exc:
        raise _CliConfigError(f"bad synthetic config: {exc}") from exc
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    ds = dataset.generate_synthetic(cfg)
    try:
        dataset.save_csv(ds, args.out)
    except OSError as exc:
        raise _CliIoError(f"cannot write {args.out}: {exc}") from exc
    print(f"wrote {args.out}: n={ds.n} m={ds.m} domains={len(ds.domain_keys())}")
    return EXIT_OK


def cmd_run(args) -> int:
    raw = _load_json(args.config)
    try:
        cfg = bench.config_from_dict(raw)
    except (TypeError, NormdaError) as exc:
        raise _CliConfigError(f"bad experiment config: {exc}") from exc
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, output_dir=args.out)

    # Surface protocol violations as configuration errors before running.
    try:
        ds = bench.resolve_dataset(cfg)
        bench.folds_for(ds, cfg.protocol)
    except NormdaError as exc:
        raise _CliConfigError(str(exc)) from exc

    jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)
    report = bench.run_experiment(cfg, jobs=jobs)
    try:
        outdir = bench.write_report(report, cfg.output_dir)
    except OSError as exc:
        raise _CliIoError(f"cannot write report: {exc}") from exc
    print(bench.emit_table(report, "markdown"), end="")
    failed = [c for c in report.cells if not c.ok]
    for cell in failed:
        print(f"FAILED {cell.strategy}/{cell.method}: {cell.error}", file=sys.stderr)
    print(f"report written to {outdir}")
    if failed and args.strict:
        return EXIT_EXPERIMENT
    return EXIT_OK


def cmd_project(args) -> int:
    ds = _read_dataset(args.data)
    try:
        strategy = NormStrategy.from_name(args.strategy)
        folds = (
            dataset.loso_folds(ds) if args.protocol == "loso" else dataset.hlso_folds(ds)
        )
    except (ValueError, NormdaError) as exc:
        raise _CliConfigError(str(exc)) from exc
    if not 0 <= args.fold_index < len(folds):
        raise _CliConfigError(f"fold index {args.fold_index} out of range [0, {len(folds)})")
    fold = folds[args.fold_index]
    rows = bench.emit_projection(ds, fold, strategy)
    text = bench.projection_csv(rows)
    if args.out:
        try:
            Path(args.out).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise _CliIoError(f"cannot write {args.out}: {exc}") from exc
        print(f"wrote {args.out}: {len(rows)} rows ({fold.name}, {strategy.value})")
    else:
        print(text, end="")
    return EXIT_OK


def cmd_table(args) -> int:
    folds_path = Path(args.report) / "folds.csv"
    try:
        lines = folds_path.read_text(encoding="utf-8").strip().splitlines()
    except OSError as exc:
        raise _CliIoError(f"cannot read {folds_path}: {exc}") from exc
    if not lines or lines[0] != "strategy,method,fold,accuracy":
        raise _CliConfigError(f"{folds_path}: unexpected header")
    by_cell: dict[tuple[str, str], list] = {}
    for line in lines[1:]:
        strategy, method, _, acc = line.split(",")
        by_cell.setdefault((strategy, method), []).append(acc)

    strategies = [s for s in bench.STRATEGY_ORDER if any(k[0] == s for k in by_cell)]
    methods = [m for m in bench.METHOD_ORDER if any(k[1] == m for k in by_cell)]
    out = ["| strategy | " + " | ".join(methods) + " |", "| --- |" + " --- |" * len(methods)]
    for s in strategies:
        row = [s]
        for m in methods:
            accs = by_cell.get((s, m), [])
            if not accs or "FAIL" in accs:
                row.append("FAIL")
            else:
                mean, std = bench.aggregate([float(a) for a in accs])
                row.append(bench.format_cell(mean, std))
        out.append("| " + " | ".join(row) + " |")
    print("\n".join(out))
    return EXIT_OK


def _read_dataset(path: str) -> dataset.DomainDataset:
    if not os.path.exists(path):
        raise _CliIoError(f"no such file: {path}")
    try:
        return dataset.load_csv(path)
    except NormdaError as exc:
        raise _CliConfigError(str(exc)) from exc


def cmd_validate(args) -> int:
    ds = _read_dataset(args.data)
    print(f"rows={ds.n} features={ds.m} classes={ds.n_classes}")
    counts = np.bincount(ds.labels, minlength=ds.n_classes)
    print("label counts: " + ", ".join(f"{c}:{int(n)}" for c, n in enumerate(counts)))
    single_row_domains = []
    for key in ds.domain_keys():
        rows = ds.rows_of(key)
        print(f"domain subject={key.subject} session={key.session}: {rows.size} rows")
        if rows.size < 2:
            single_row_domains.append(key)
    constant = [
        (ds.feature_names[j] if ds.feature_names else f"f{j}")
        for j in range(ds.m)
        if float(ds.features[:, j].std()) == 0.0
    ]
    for name in constant:
        print(f"warning: feature {name} is constant")
    for key in single_row_domains:
        print(
            f"warning: domain subject={key.subject} session={key.session} has 1 row; "
            "incompatible with Z2/Z3 per-domain statistics on the test side"
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="normda",
        description="Benchmark split-aware normalization strategies against DA methods.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic shifted-domain dataset CSV")
    p.add_argument("--config", required=True, help="JSON file of generator settings")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="run an experiment config and write a report directory")
    p.add_argument("--config", required=True, help="JSON experiment configuration")
    p.add_argument("--out", default=None, help="override the report directory")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--jobs", type=int, default=None, help="parallel fold groups (default: cores)")
    p.add_argument("--strict", action="store_true", help="exit 4 if any cell failed")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("project", help="emit a 2-D projection CSV for one fold")
    p.add_argument("--data", required=True, help="dataset CSV")
    p.add_argument("--protocol", choices=("loso", "hlso"), default="loso")
    p.add_argument("--fold-index", type=int, default=0)
    p.add_argument("--strategy", default="Z2")
    p.add_argument("--out", default=None, help="output CSV (default: stdout)")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("table", help="re-render the markdown table from a report directory")
    p.add_argument("--report", required=True, help="report directory containing folds.csv")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("validate", help="check a dataset CSV against the format contract")
    p.add_argument("--data", required=True, help="dataset CSV")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _CliConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _CliIoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NormdaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EXPERIMENT


if __name__ == "__main__":
    sys.exit(main())
