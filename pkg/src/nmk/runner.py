"""Analyses behind the command-line front end.

Every function returns plain JSON-ready records; nothing here writes files.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from . import dephasing as dp
from . import fitkit, measures, tomo
from .capability import DETECTION_TOL, robustness, witness_two
from .config import Division, RunConfig, model_record
from .matcore import NonInvertibleSubprocess
from .procrep import apply, intermediate
from .states import REFERENCE_CLASSES_1Q, REFERENCE_CLASSES_2Q, single_qubit_pairs, state, two_qubit_pairs

SCHEMA = "nmk/1"
EQUAL_TOL = 1e-6


class AnalysisError(RuntimeError):
    """An analysis could not be carried out; the CLI maps it to exit code 2."""


@dataclass
class Outcome:
    record: dict
    series: dict[str, list[tuple[float, float]]] = field(default_factory=dict)


def _evaluator(cfg_model, dynamics: str):
    if isinstance(cfg_model, dp.SinglePhotonModel):
        return dp.single_dynamics(cfg_model)
    return dp.local_dynamics(cfg_model) if dynamics == "local" else dp.global_dynamics(cfg_model)


def family(cfg: RunConfig) -> measures.DynamicsFamily:
    return measures.DynamicsFamily(_evaluator(cfg.model, cfg.dynamics), cfg.t2,
                                   np.linspace(0.0, cfg.t2, 129), name=cfg.model.name)


def _dim(cfg: RunConfig) -> int:
    return 4 if cfg.is_two_photon and cfg.dynamics == "global" else 2


def default_pair(dim: int) -> tuple[str, str]:
    return ("phi+", "phi-") if dim == 4 else ("+", "-")


# -- analyses ------------------------------------------------------------------------


def run_robustness(cfg: RunConfig) -> Outcome:
    f = family(cfg)
    rows, series, skipped = [], [], []
    for t1 in cfg.t1_values:
        try:
            r = robustness(f.intermediate(cfg.t2, t1))
        except NonInvertibleSubprocess:
            skipped.append(t1)
            continue
        rows.append({"t1": t1, "beta": r.beta, "oracle_beta": r.oracle_beta, "gap": r.gap,
                     "violated": r.beta > DETECTION_TOL})
        series.append((t1, r.beta))
    if not rows:
        raise AnalysisError(f"every division was non-invertible: {skipped}")
    if cfg.division.mode != "grid":
        rec = dict(rows[0], t2=cfg.t2)
    else:
        best = max(rows, key=lambda r: r["beta"])
        rec = {"t2": cfg.t2, "max_beta": best["beta"], "argmax_t1": best["t1"],
               "violated": any(r["violated"] for r in rows), "points": len(rows)}
    if skipped:
        rec["non_invertible_t1"] = skipped
    return Outcome(rec, {"beta_vs_t1": series} if cfg.division.mode == "grid" else {})


def evolved_pair(cfg: RunConfig, a: str, b: str, t1: float):
    ev = _evaluator(cfg.model, cfg.dynamics)
    ra, rb = state(a), state(b)
    e1, e2 = ev(t1), ev(cfg.t2)
    return apply(e1, ra), apply(e1, rb), apply(e2, ra), apply(e2, rb)


def run_witness(cfg: RunConfig) -> Outcome:
    a, b = default_pair(_dim(cfg))
    rows = []
    for t1 in cfg.t1_values:
        w = witness_two(*evolved_pair(cfg, a, b, t1))
        rows.append({"t1": t1, **w.to_record()})
    if cfg.division.mode != "grid":
        return Outcome({"pair": [a, b], "t2": cfg.t2, **rows[0]})
    best = max(rows, key=lambda r: r["value"])
    return Outcome(
        {"pair": [a, b], "t2": cfg.t2, "max_value": best["value"], "argmax_t1": best["t1"],
         "threshold": 2.0, "violated": any(r["violated"] for r in rows)},
        {"witness_vs_t1": [(r["t1"], r["value"]) for r in rows]},
    )


def run_n_beta(cfg: RunConfig) -> Outcome:
    rep = measures.n_beta(family(cfg), cfg.t2, method=cfg.beta_method)
    return Outcome(rep.to_record(), {"n_beta_integrand": rep.series})


def run_n_blp(cfg: RunConfig) -> Outcome:
    f = family(cfg)
    if _dim(cfg) == 4:
        a, b = default_pair(4)
        rep = measures.n_blp(f, state(a), state(b))
        label = f"{a},{b}"
    else:
        label, rep = measures.blp_pair_search(f)
    return Outcome({**rep.to_record(), "pair": label}, {"trace_distance": rep.series})


def run_n_rhp(cfg: RunConfig) -> Outcome:
    rep = measures.n_rhp(family(cfg))
    return Outcome(rep.to_record(), {"n_rhp_integrand": rep.series})


def run_tomo_sim(cfg: RunConfig) -> Outcome:
    shots = cfg.shots if cfg.shots is not None else 10**6
    seed = cfg.seed if cfg.seed is not None else 0
    ev = _evaluator(cfg.model, cfg.dynamics)
    rows = []
    for k, t1 in enumerate(cfg.t1_values):
        e1, e2 = ev(t1), ev(cfg.t2)
        exact = robustness(intermediate(e2, e1)).beta
        ss = np.random.SeedSequence([seed, k]).generate_state(2)
        p1 = tomo.tomography_of_process(e1, shots, int(ss[0]))
        p2 = tomo.tomography_of_process(e2, shots, int(ss[1]))
        est = robustness(intermediate(p2, p1)).beta
        rows.append({"t1": t1, "beta_noiseless": exact, "beta_tomography": est, "difference": est - exact})
    proto = "Criterion11_2q" if _dim(cfg) == 4 else "Criterion11_1q"
    rec = {"shots_per_setting": shots, "seed": seed, "settings": tomo.settings_budget(proto).settings,
           "t2": cfg.t2, "divisions": rows}
    return Outcome(rec)


def run_fit(cfg: RunConfig) -> Outcome:
    if not cfg.is_two_photon:
        raise AnalysisError("the fit analysis needs a two-photon model")
    seed = cfg.seed if cfg.seed is not None else 0
    data = fitkit.synthesize(cfg.model, cfg.noise, seed)
    res = fitkit.fit_pipeline(data.spectrum, data.plate1, data.plate2, cfg.model.switchover)
    rec = res.to_record()
    rec["reference"] = {k: v for k, v in model_record(cfg.model).items() if k in ("K", "omega0", "delta_fwhm", "C", "delta_n")}
    rec["noise"] = cfg.noise
    rec["seed"] = seed
    return Outcome(rec)


RUNNERS = {
    "robustness": run_robustness,
    "witness": run_witness,
    "n_beta": run_n_beta,
    "n_blp": run_n_blp,
    "n_rhp": run_n_rhp,
    "tomo_sim": run_tomo_sim,
    "fit": run_fit,
}


def run(cfg: RunConfig) -> tuple[dict, dict[str, list[tuple[float, float]]]]:
    results, series = {}, {}
    for name in cfg.analysis:
        out = RUNNERS[name](cfg)
        results[name] = out.record
        series.update(out.series)
    return {"schema": SCHEMA, "command": "run", "config": cfg.to_record(), "results": results}, series


# -- witness tables ---------------------------------------------------------------


def table_rows(cfg: RunConfig, t1: float) -> list[dict]:
    pairs = two_qubit_pairs() if _dim(cfg) == 4 else single_qubit_pairs()
    rows = []
    for p in pairs:
        w = witness_two(*evolved_pair(cfg, p.a, p.b, t1))
        rows.append({"a": p.a, "b": p.b, "label": p.label, "value": w.value, "violated": w.violated})
    return rows


def degeneracy(rows: list[dict], dim: int) -> list[dict]:
    """Spread of each reference equal-value class over the computed rows."""
    classes = REFERENCE_CLASSES_2Q if dim == 4 else REFERENCE_CLASSES_1Q
    by_pair = {(r["a"], r["b"]): r["value"] for r in rows}
    out = []
    for name, members in classes.items():
        vals = [by_pair[m] for m in members]
        spread = max(vals) - min(vals)
        out.append({"class": name, "rows": len(members), "min": min(vals), "max": max(vals),
                    "spread": spread, "equal": spread <= EQUAL_TOL})
    return out


def observed_classes(rows: list[dict], tol: float = EQUAL_TOL) -> list[list[str]]:
    """Rows grouped by value (ascending); catalog order is kept inside a group."""
    order = sorted(range(len(rows)), key=lambda i: rows[i]["value"])
    groups: list[list[int]] = []
    for i in order:
        if groups and abs(rows[i]["value"] - rows[groups[-1][0]]["value"]) <= tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    return [[rows[i]["label"] for i in sorted(g)] for g in groups]


def calibration_scan(cfg: RunConfig, points: int = 21) -> list[tuple[float, float]]:
    """Witness of the default pair against ``t2`` with ``t1 = t2 / 2``."""
    dim = _dim(cfg)
    a, b = default_pair(dim)
    t_end = 2 * cfg.model.switchover if cfg.is_two_photon else cfg.t2
    out = []
    for t2 in np.linspace(t_end / points, t_end, points):
        c = _with_t2(cfg, float(t2))
        out.append((float(t2), witness_two(*evolved_pair(c, a, b, float(t2) / 2)).value))
    return out


def _with_t2(cfg: RunConfig, t2: float) -> RunConfig:
    return replace(cfg, t2=t2, division=Division("half"))


def table(cfg: RunConfig, scan_points: int = 0) -> tuple[dict, list[dict]]:
    if cfg.division.mode == "grid":
        raise AnalysisError("tables need a single division (half or explicit t1)")
    t1 = cfg.t1_values[0]
    rows = table_rows(cfg, t1)
    dim = _dim(cfg)
    rec = {
        "schema": SCHEMA,
        "command": "table",
        "config": {k: v for k, v in cfg.to_record().items() if k not in ("analysis", "shots", "beta_method")},
        "t1": t1,
        "rows": rows,
        "reference_classes": degeneracy(rows, dim),
        "observed_classes": observed_classes(rows),
    }
    if scan_points:
        scan = calibration_scan(cfg, scan_points)
        best = max(scan, key=lambda p: p[1])
        rec["calibration_scan"] = {"pair": list(default_pair(dim)), "division": "half",
                                   "points": [list(p) for p in scan], "max_value": best[1], "argmax_t2": best[0]}
    return rec, rows


def format_table(rec: dict) -> str:
    rows = rec["rows"]
    width = max(len(r["label"]) for r in rows)
    head = f"{'pair':<{width}}  {'W':>10}  violated"
    lines = [f"# {rec['config']['model']['name']}  t2={rec['config']['t2']:g}  t1={rec['t1']:g}", head, "-" * len(head)]
    for r in rows:
        lines.append(f"{r['label']:<{width}}  {r['value']:>10.4f}  {'yes' if r['violated'] else 'no'}")
    lines.append("")
    lines.append("reference equal-value classes:")
    for c in rec["reference_classes"]:
        tag = "equal" if c["equal"] else f"split, spread {c['spread']:.4g}"
        lines.append(f"  {c['class']:<20} {c['rows']:>2} rows  [{c['min']:.4f}, {c['max']:.4f}]  {tag}")
    lines.append("observed classes (|dW| <= 1e-6):")
    for g in rec["observed_classes"]:
        lines.append(f"  {len(g):>2}: " + "; ".join(g))
    if "calibration_scan" in rec:
        s = rec["calibration_scan"]
        lines.append(f"calibration scan ({s['pair'][0]}, {s['pair'][1]}), t1 = t2/2: "
                     f"max W = {s['max_value']:.4f} at t2 = {s['argmax_t2']:g}")
    return "\n".join(lines) + "\n"


def table_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["state_a", "state_b", "label", "value", "violated"])
    for r in rows:
        w.writerow([r["a"], r["b"], r["label"], repr(r["value"]), str(r["violated"]).lower()])
    return buf.getvalue()


def presets_record() -> dict:
    return {
        "schema": SCHEMA,
        "command": "presets",
        "presets": {name: model_record(m) for name, m in {**dp.PRESETS, **dp.SINGLE_PRESETS}.items()},
    }
