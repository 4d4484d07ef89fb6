"""Run every config in scripts/configs through the CLI and tabulate pass/fail.

    python3 scripts/run_experiments.py [--out out/experiments] [--threads 4] [names ...]
"""
from __future__ import annotations

import argparse
import json
from pathlib import Path

from poisson_boundary.cli import EXIT_THRESHOLD, parse_config, run

CONFIGS = Path(__file__).with_name("configs")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("names", nargs="*", help="config stems to run (default: all)")
    ap.add_argument("--out", default="out/experiments")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    paths = sorted(CONFIGS.glob("*.json"))
    if args.names:
        paths = [p for p in paths if p.stem in args.names]
    worst = 0
    for path in paths:
        raw = json.loads(path.read_text())
        raw["output_dir"] = str(Path(args.out) / path.stem)
        code = run(parse_config(raw), threads=args.threads)
        worst = max(worst, code)
        status = "ok" if code == 0 else ("threshold" if code == EXIT_THRESHOLD else "error")
        print(f"{path.stem:28s} {status}")
    return worst


if __name__ == "__main__":
    raise SystemExit(main())
