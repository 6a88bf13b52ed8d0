"""Trace-distance curves D(t) for (phi+, phi-) and the resulting N_BLP."""
import argparse
from pathlib import Path

from nmk import dephasing as dp
from nmk import measures as ms
from nmk.states import state


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("out/blp"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for name, m in dp.PRESETS.items():
        rep = ms.n_blp(ms.family_from_model(m), state("phi+"), state("phi-"))
        ms.write_series_csv(rep.series, str(args.out / f"{name}.csv"))
        print(f"{name:9s} N_BLP {rep.value:.4f}  ({rep.grid_size} points)")


if __name__ == "__main__":
    main()
