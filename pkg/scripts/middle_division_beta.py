"""Robustness of the middle-time intermediate map for each two-photon condition.

Writes beta(t1 = 199, t2 = 398) for global and local dynamics, plus the
grid of beta against t1 at t2 = 398 for every preset.
"""
import argparse
import csv
from pathlib import Path

import numpy as np

from nmk import dephasing as dp
from nmk.capability import robustness
from nmk.matcore import NonInvertibleSubprocess
from nmk.procrep import intermediate


def beta_at(ev, t1, t2):
    try:
        return robustness(intermediate(ev(t2), ev(t1))).beta
    except NonInvertibleSubprocess:
        return float("nan")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("out/middle_beta"))
    ap.add_argument("--points", type=int, default=40)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    with open(args.out / "beta_mid.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["condition", "global", "local"])
        for name, m in dp.PRESETS.items():
            g = beta_at(dp.global_dynamics(m), 199.0, 398.0)
            loc = beta_at(dp.local_dynamics(m), 199.0, 398.0)
            w.writerow([name, f"{g:.6g}", f"{loc:.3g}"])
            print(f"{name:9s} global {g:.4f}  local {loc:.1e}")

    t1s = np.linspace(0, 398, args.points, endpoint=False)
    with open(args.out / "beta_vs_t1.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t1", *dp.PRESETS])
        evs = [dp.global_dynamics(m) for m in dp.PRESETS.values()]
        for t1 in t1s:
            w.writerow([f"{t1:.3f}", *(f"{beta_at(ev, t1, 398.0):.6g}" for ev in evs)])
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
