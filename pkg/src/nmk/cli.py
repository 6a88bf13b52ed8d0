"""``nmk`` command-line interface.

Exit codes: 0 success, 1 configuration error, 2 analysis error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import fitkit, measures, runner, tomo
from .capability import SolverFailure
from .config import ConfigError, build_config, load_model, load_yaml, model_record
from .matcore import NonInvertibleSubprocess, ShapeError

EXIT_OK, EXIT_CONFIG, EXIT_ANALYSIS = 0, 1, 2


def _json_default(o):
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def dumps(rec: dict) -> str:
    return json.dumps(rec, indent=2, sort_keys=True, default=_json_default) + "\n"


def _write(out: Path | None, name: str, text: str) -> None:
    if out is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def _model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", help="built-in model name (see `nmk presets`)")
    p.add_argument("--model", help="preset name or YAML file describing a model")
    p.add_argument("--config", help="YAML run configuration; flags override its entries")
    p.add_argument("--t2", type=float, help="final time in units of the reference wavelength")
    p.add_argument("--division", help="'half', 'grid' or an explicit t1")
    p.add_argument("--grid-points", type=int, dest="grid_points", help="divisions for --division grid")
    p.add_argument("--dynamics", choices=["global", "local"], help="two-photon map or its one-photon marginal")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="directory for JSON/CSV artifacts")


def _gather(args: argparse.Namespace, extra: Sequence[str] = ()) -> dict:
    m: dict = load_yaml(args.config) if args.config else {}
    if args.preset and args.model:
        raise ConfigError("use either --preset or --model, not both")
    if args.preset:
        m["model"] = args.preset
    elif args.model:
        m["model"] = model_record(load_model(args.model))
    elif "preset" in m and "model" not in m:
        m["model"] = m.pop("preset")
    keys = ["t2", "division", "grid_points", "dynamics", "seed", *extra]
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            m[k] = v
    if args.out:
        m["output_dir"] = args.out
    m.pop("preset", None)
    return m


def cmd_run(args) -> int:
    cfg = build_config(_gather(args, ("analysis", "shots", "beta_method", "noise")))
    rec, series = runner.run(cfg)
    text = dumps(rec)
    sys.stdout.write(text)
    _write(cfg.output_dir, "result.json", text)
    for name, s in series.items():
        _write(cfg.output_dir, f"{name}.csv", measures.series_to_csv(s))
    return EXIT_OK


def cmd_table(args) -> int:
    cfg = build_config(_gather(args))
    rec, rows = runner.table(cfg, scan_points=args.scan)
    txt = runner.format_table(rec)
    sys.stdout.write(dumps(rec) if args.json else txt)
    _write(cfg.output_dir, "table.txt", txt)
    _write(cfg.output_dir, "table.csv", runner.table_csv(rows))
    _write(cfg.output_dir, "table.json", dumps(rec))
    if "calibration_scan" in rec:
        pts = [tuple(p) for p in rec["calibration_scan"]["points"]]
        _write(cfg.output_dir, "calibration_scan.csv", measures.series_to_csv(pts))
    return EXIT_OK


def cmd_fit(args) -> int:
    files = (args.spectrum, args.plate1, args.plate2)
    if any(files) and not all(files):
        raise ConfigError("--spectrum, --plate1 and --plate2 must be given together")
    if all(files):
        try:
            data = [fitkit.load_series(f) for f in files]
        except OSError as e:
            raise ConfigError(f"cannot read data: {e}") from None
        source = {"files": list(files)}
        switchover = args.switchover
    else:
        m = load_model(args.preset or args.model or "")
        if not hasattr(m, "K"):
            raise ConfigError("synthetic fit data needs a two-photon model")
        seed = args.seed if args.seed is not None else 0
        d = fitkit.synthesize(m, args.noise, seed)
        data = [d.spectrum, d.plate1, d.plate2]
        source = {"synthetic": model_record(m), "noise": args.noise, "seed": seed}
        switchover = m.switchover
    res = fitkit.fit_pipeline(*data, switchover=switchover)
    rec = {"schema": runner.SCHEMA, "command": "fit", "source": source, **res.to_record()}
    text = dumps(rec)
    sys.stdout.write(text)
    _write(Path(args.out) if args.out else None, "fit.json", text)
    return EXIT_OK


def cmd_tomo(args) -> int:
    budget = {p.value: tomo.settings_budget(p).settings for p in tomo.Protocol}
    rec = {"schema": runner.SCHEMA, "command": "tomo", "settings_budget": budget}
    if args.preset or args.model or args.config:
        m = _gather(args, ("shots",))
        m["analysis"] = ["tomo_sim"]
        cfg = build_config(m)
        rec["config"] = cfg.to_record()
        rec["pipeline"] = runner.run_tomo_sim(cfg).record
        out = cfg.output_dir
    else:
        out = Path(args.out) if args.out else None
    text = dumps(rec)
    sys.stdout.write(text)
    _write(out, "tomo.json", text)
    return EXIT_OK


def cmd_presets(args) -> int:
    sys.stdout.write(dumps(runner.presets_record()))
    return EXIT_OK


def parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nmk", description="Non-Markovianity identification for dephasing models.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run analyses on one model")
    _model_args(p)
    p.add_argument("--analysis", help="comma-separated: robustness, witness, n_beta, n_blp, n_rhp, tomo_sim, fit")
    p.add_argument("--shots", type=int, help="shots per measurement setting for tomo_sim")
    p.add_argument("--beta-method", dest="beta_method", choices=["sdp", "spectral"])
    p.add_argument("--noise", type=float, help="relative noise of synthetic fit data")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("table", help="witness values over the state-pair catalog")
    _model_args(p)
    p.add_argument("--scan", type=int, default=0, metavar="N", help="add an N-point t2 calibration scan")
    p.add_argument("--json", action="store_true", help="print JSON instead of the aligned table")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("fit", help="fit spectrum and trace-distance data")
    p.add_argument("--spectrum", help="CSV x,y of the pump spectrum")
    p.add_argument("--plate1", help="CSV x,y of the trace distance with plate 1 active")
    p.add_argument("--plate2", help="CSV x,y of the trace distance with plate 2 active")
    p.add_argument("--switchover", type=float, default=199.0)
    p.add_argument("--preset", help="synthesise data from this preset instead")
    p.add_argument("--model", help="synthesise data from this model file instead")
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("tomo", help="settings budget and a simulated tomography pipeline")
    _model_args(p)
    p.add_argument("--shots", type=int)
    p.set_defaults(func=cmd_tomo)

    p = sub.add_parser("presets", help="list built-in models")
    p.set_defaults(func=cmd_presets)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, KeyError) as e:
        print(f"nmk: configuration error: {e.args[0] if e.args else e}", file=sys.stderr)
        return EXIT_CONFIG
    except (runner.AnalysisError, SolverFailure, NonInvertibleSubprocess, ShapeError, ValueError) as e:
        print(f"nmk: analysis error: {e}", file=sys.stderr)
        return EXIT_ANALYSIS


if __name__ == "__main__":
    sys.exit(main())
