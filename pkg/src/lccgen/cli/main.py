"""``lccgen`` command line.

Exit codes: 0 success, 2 configuration error, 3 stage failure.
"""
from __future__ import annotations

import argparse
import csv
import os
import subprocess
import sys
from pathlib import Path
from typing import List, Optional

from threadpoolctl import threadpool_limits

from ..data import ConfigError
from .config import ExperimentConfig, apply_override, load_config, save_config, serialize
from .pipeline import StageOrderError, read_metrics, run_pipeline, stage_sample

EXIT_OK, EXIT_CONFIG, EXIT_STAGE = 0, 2, 3

STAGE_COMMANDS = ("train-ae", "learn-lcc", "train-gan", "eval", "gap")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config file (flat 'section.key = value' lines)")
    common.add_argument("--seed", type=int, help="overrides the config seed")
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a single config key, e.g. --set gan.iterations=200")
    parser = argparse.ArgumentParser(prog="lccgen", description="GANs fed by local coordinate coding samples.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="train-ae, learn-lcc, train-gan, eval (and gap) in order")
    for name in STAGE_COMMANDS:
        sub.add_parser(name, parents=[common], help=f"run the {name} stage only")
    p = sub.add_parser("sample", parents=[common], help="write generated points as CSV (and a PGM grid for images)")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--file", help="CSV path (default OUT/samples.csv)")
    p = sub.add_parser("sweep", parents=[common], help="run the pipeline for several seeds, one process each")
    p.add_argument("--seeds", required=True, help="comma-separated seeds")
    p.add_argument("--jobs", type=int, default=1)
    sub.add_parser("show-config", parents=[common], help="print the resolved config")
    return parser


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        apply_override(cfg, key.strip(), value.strip())
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out:
        cfg.out = args.out
    return cfg.validate()


def _report(result) -> int:
    if result.status:
        print(f"lccgen: stage {result.failed} failed: {result.error}", file=sys.stderr)
    else:
        print(f"lccgen: completed {', '.join(result.completed)} -> {result.out}")
    return result.status


def cmd_sweep(cfg: ExperimentConfig, args) -> int:
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    root = Path(cfg.out)
    root.mkdir(parents=True, exist_ok=True)
    base = root / "sweep_config.txt"
    save_config(cfg, base)
    procs, status = [], {}
    cmd = [sys.executable, "-m", "lccgen.cli.main", "run", "--config", str(base)]
    pending = list(seeds)
    while pending or procs:
        while pending and len(procs) < max(1, args.jobs):
            s = pending.pop(0)
            procs.append((s, subprocess.Popen(cmd + ["--seed", str(s), "--out", str(root / f"seed_{s}")])))
        s, proc = procs.pop(0)
        status[s] = proc.wait()
    rows = []
    for s in seeds:
        m = read_metrics(root / f"seed_{s}") if (root / f"seed_{s}" / "metrics.json").is_file() else {}
        ev = m.get("eval", {})
        rows.append([s, status[s], ev.get("mode_coverage", ""), ev.get("diversity_msssim", ""),
                     m.get("gap", {}).get("gap", ""), m.get("gap", {}).get("bound_value", "")])
    with open(root / "sweep_summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "exit_status", "mode_coverage", "diversity_msssim", "gap", "bound_value"])
        w.writerows(rows)
    print(f"lccgen: sweep of {len(seeds)} seeds -> {root / 'sweep_summary.csv'}")
    return EXIT_OK if all(v == 0 for v in status.values()) else EXIT_STAGE


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"lccgen: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    threads = int(os.environ.get("LCCGEN_THREADS", "1"))
    with threadpool_limits(limits=threads):
        if args.command == "show-config":
            sys.stdout.write(serialize(cfg))
            return EXIT_OK
        if args.command == "sweep":
            return cmd_sweep(cfg, args)
        if args.command == "run":
            return _report(run_pipeline(cfg))
        if args.command == "sample":
            out = Path(cfg.out)
            try:
                path = stage_sample(cfg, out, args.n, Path(args.file) if args.file else None)
            except StageOrderError as exc:
                print(f"lccgen: {exc}", file=sys.stderr)
                return EXIT_STAGE
            print(f"lccgen: wrote {args.n} samples -> {path}")
            return EXIT_OK
        return _report(run_pipeline(cfg, stages=[args.command], merge=True))


if __name__ == "__main__":
    sys.exit(main())
