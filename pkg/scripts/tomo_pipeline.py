"""Shot-noise spread of beta when both processes are estimated by tomography."""
import argparse
import csv
from pathlib import Path

import numpy as np

from nmk import dephasing as dp
from nmk import tomo
from nmk.capability import robustness
from nmk.procrep import intermediate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("out/tomo"))
    ap.add_argument("--shots", type=int, default=10**6)
    ap.add_argument("--seeds", type=int, default=10)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "beta_tomo.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["condition", "seed", "beta_exact", "beta_tomo"])
        for name, m in dp.PRESETS.items():
            e1, e2 = dp.chi_two(m, 199, 0), dp.chi_two(m, 199, 199)
            exact = robustness(intermediate(e2, e1)).beta
            est = []
            for seed in range(args.seeds):
                b = robustness(intermediate(tomo.tomography_of_process(e2, args.shots, 2 * seed + 1),
                                            tomo.tomography_of_process(e1, args.shots, 2 * seed))).beta
                est.append(b)
                w.writerow([name, seed, exact, b])
            err = np.array(est) - exact
            print(f"{name:9s} exact {exact:.4f}  bias {err.mean():+.4f}  max |err| {np.abs(err).max():.4f}")


if __name__ == "__main__":
    main()
