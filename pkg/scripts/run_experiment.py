#!/usr/bin/env python3
"""Run preset experiments end to end and combine their reports.

Each preset becomes one run directory under the output root (generate,
compromise, detect, evaluate). When every run finishes, the per-dataset
reports are joined into ``summary.csv``: one row per detector, one
TP/FP/TN/FN column block per dataset.

    python scripts/run_experiment.py --out runs/              # d1 + d2-desk
    python scripts/run_experiment.py --out runs/ d2-full
    python scripts/run_experiment.py --out runs/ --seed 31 d1
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

from gcodeguard.cli import PRESETS
from gcodeguard.cli import main as cli_main


def write_summary(run_dirs: dict[str, Path], out_path: Path) -> None:
    """Join run reports into a detector x dataset confusion table."""
    reports = {}
    for preset, run_dir in run_dirs.items():
        report = json.loads((run_dir / "report" / "report.json").read_text())
        reports[preset] = report
    detectors: list[str] = []
    for report in reports.values():
        for name in report["detectors"]:
            if name not in detectors:
                detectors.append(name)
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["detector"]
        for preset in reports:
            header += [f"{preset}_{k}" for k in ("tp", "fp", "tn", "fn")]
        writer.writerow(header)
        for name in detectors:
            row: list[object] = [name]
            for report in reports.values():
                cm = report["detectors"].get(name, {}).get("confusion")
                if cm is None:
                    row += ["", "", "", ""]
                else:
                    row += [cm["tp"], cm["fp"], cm["tn"], cm["fn"]]
            writer.writerow(row)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "presets",
        nargs="*",
        default=["d1", "d2-desk"],
        choices=sorted(PRESETS),
        help="presets to run (default: d1 d2-desk)",
    )
    parser.add_argument("--out", required=True, help="root directory for run outputs")
    parser.add_argument("--seed", type=int, help="master seed override for every run")
    args = parser.parse_args(argv)

    root = Path(args.out)
    root.mkdir(parents=True, exist_ok=True)
    run_dirs: dict[str, Path] = {}
    for preset in args.presets:
        run_dir = root / preset
        cli_args = ["run-all", "--preset", preset, "--out", str(run_dir)]
        if args.seed is not None:
            cli_args += ["--seed", str(args.seed)]
        print(f"== {preset} ==")
        started = time.monotonic()
        rc = cli_main(cli_args)
        if rc != 0:
            print(f"{preset} failed with exit code {rc}", file=sys.stderr)
            return rc
        print(f"{preset} finished in {time.monotonic() - started:.1f}s")
        run_dirs[preset] = run_dir

    summary = root / "summary.csv"
    write_summary(run_dirs, summary)
    print(f"summary -> {summary}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
