"""Shared helper for the figure scripts: run one committed config and print a table."""
from __future__ import annotations

import argparse
import os
import sys

from nearcs.cli import committed_config_text
from nearcs.config import parse_config
from nearcs.harness import run_sweep, table


def run_figure(config_name: str, metrics: tuple[str, ...], argv=None) -> None:
    ap = argparse.ArgumentParser(description=f"Run the sweep in {config_name}.")
    ap.add_argument("--trials", type=int, help="override trials per point")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--out", default=os.path.join("results", config_name.replace(".cfg", ".csv")))
    args = ap.parse_args(argv)

    cfg, _ = parse_config(committed_config_text(config_name), config_name)
    cfg = cfg.with_(master_seed=args.seed, out_path=args.out,
                    **({"trials": args.trials} if args.trials else {}))
    records = run_sweep(cfg, workers=args.workers)
    for m in metrics:
        t = table(records, m)
        values = sorted(next(iter(t.values())))
        print(f"\n{m} vs {cfg.sweep_axis}")
        print(f"{'':>10} " + " ".join(f"{v:>8g}" for v in values))
        for est in sorted(t):
            print(f"{est:>10} " + " ".join(f"{t[est][v]:8.3f}" for v in values))
    print(f"\nwrote {args.out}", file=sys.stderr)
