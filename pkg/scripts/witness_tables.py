"""Two-state witness tables for the single-photon and two-photon presets."""
import argparse
import json
from pathlib import Path

from nmk import runner
from nmk.config import build_config


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("out/tables"))
    ap.add_argument("--scan", type=int, default=21, help="calibration scan points (0 disables)")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    jobs = [("two_peak", {"t2": 60, "division": 40}), ("cond_I", {}), ("cond_II", {}),
            ("cond_III", {}), ("cond_IV", {})]
    for preset, extra in jobs:
        cfg = build_config({"preset": preset, **extra})
        rec, rows = runner.table(cfg, args.scan)
        (args.out / f"{preset}.txt").write_text(runner.format_table(rec))
        (args.out / f"{preset}.csv").write_text(runner.table_csv(rows))
        (args.out / f"{preset}.json").write_text(json.dumps(rec, indent=2, sort_keys=True, default=float))
        print(runner.format_table(rec))


if __name__ == "__main__":
    main()
