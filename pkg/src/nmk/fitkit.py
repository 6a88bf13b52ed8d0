"""Parameter extraction from pump spectra and trace-distance curves.

Three model curves are fitted by damped Gauss-Newton (scipy's MINPACK
Levenberg-Marquardt) with analytic Jacobians and a small deterministic
multistart:

* ``f1(x) = A exp(-Y x^2)`` for the first plate alone,
* ``f2(x) = A exp(-Y (T^2 + (x-T)^2 - 2|K| T (x-T)))`` once the second plate
  takes over at ``x = T``,
* ``f3(w) = a exp(-(w - w0)^2 / (2 s^2))`` for the pump spectrum.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, TextIO

import numpy as np
from scipy.optimize import least_squares

from .dephasing import DEFAULT_SWITCHOVER, TwoPhotonModel

FWHM_PER_SIGMA = math.sqrt(8.0 * math.log(2.0))
# Down-converted photons are taken to be twice as broad as the pump.
SPDC_BANDWIDTH_FACTOR = 2.0
N_STARTS = 5


@dataclass(frozen=True)
class XYSeries:
    x: np.ndarray
    y: np.ndarray
    meta: str = ""

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise ValueError("x and y must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("series values must be finite")
        if np.any(np.diff(x) <= 0):
            k = int(np.argmax(np.diff(x) <= 0)) + 1
            raise ValueError(f"x must be strictly increasing (point {k}: {x[k]} after {x[k - 1]})")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_points(cls, points: Sequence[tuple[float, float]], meta: str = "") -> "XYSeries":
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        return cls(pts[:, 0], pts[:, 1], meta)

    def __len__(self) -> int:
        return self.x.size


@dataclass
class FitResult:
    params: dict[str, float]
    residual_rms: float
    iterations: int
    converged: bool
    notes: dict[str, object] = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "params": dict(self.params),
            "residual_rms": self.residual_rms,
            "iterations": self.iterations,
            "converged": self.converged,
            **({"notes": dict(self.notes)} if self.notes else {}),
        }


def _lm(residual: Callable, jac: Callable, starts: Sequence[np.ndarray]):
    """Best of several LM runs; ties are broken by start order."""
    best = None
    evals = 0
    for p0 in starts:
        r = least_squares(residual, np.asarray(p0, dtype=float), jac=jac, method="lm",
                          xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
        evals += r.nfev
        if best is None or r.cost < best.cost - 1e-300:
            best = r
    return best, evals


def _result(best, evals: int, params: dict[str, float], n: int, notes=None) -> FitResult:
    rms = float(math.sqrt(2.0 * best.cost / n))
    return FitResult(params, rms, evals, bool(best.success), notes or {})


# -- f1 --------------------------------------------------------------------------


def f1(x, a: float, y: float):
    return a * np.exp(-y * np.asarray(x, dtype=float) ** 2)


def fit_f1(data: XYSeries) -> FitResult:
    """Fit ``A exp(-Y x^2)``; ``Y`` equals ``delta_n**2 * C / 2`` for the model."""
    if len(data) < 3:
        raise ValueError("fit_f1 needs at least 3 points")
    if np.any(data.y <= 0):
        raise ValueError("fit_f1 needs positive y values")
    x, yv = data.x, data.y
    x2 = x * x

    def res(p):
        return f1(x, p[0], p[1]) - yv

    def jac(p):
        e = np.exp(-p[1] * x2)
        return np.column_stack([e, -p[0] * x2 * e])

    # log-linear estimate seeds the multistart
    slope, icpt = np.polyfit(x2, np.log(yv), 1) if np.ptp(x2) > 0 else (0.0, float(np.log(yv.mean())))
    a0, y0 = math.exp(icpt), max(-slope, 0.0)
    scale = 1.0 / max(float(x2.max()), 1e-300)
    starts = [(a0, y0), (a0, 0.0), (yv[0], scale), (yv.max(), 0.1 * scale), (1.0, 10 * scale)]
    best, n = _lm(res, jac, starts[:N_STARTS])
    a, y = (float(v) for v in best.x)
    return _result(best, n, {"X_tilde": a, "Y_tilde": y}, len(data),
                   {"identity": "Y_tilde = delta_n^2 * C / 2"})


# -- f2 --------------------------------------------------------------------------


def f2(x, a: float, y: float, k: float, switchover: float = DEFAULT_SWITCHOVER):
    s = np.asarray(x, dtype=float) - switchover
    t = switchover
    return a * np.exp(-y * (t * t + s * s - 2.0 * abs(k) * t * s))


def fit_f2(data: XYSeries, x_tilde: float, y_tilde: float,
           switchover: float = DEFAULT_SWITCHOVER) -> FitResult:
    """One-parameter fit of the correlation; ``K`` is reported as ``-|K|``."""
    if len(data) < 2:
        raise ValueError("fit_f2 needs at least 2 points")
    s = data.x - switchover
    t = switchover

    def res(p):
        return f2(data.x, x_tilde, y_tilde, p[0], switchover) - data.y

    def jac(p):
        val = f2(data.x, x_tilde, y_tilde, p[0], switchover)
        sgn = 1.0 if p[0] >= 0 else -1.0
        return (val * y_tilde * 2.0 * t * s * sgn)[:, None]

    best, n = _lm(res, jac, [np.array([k]) for k in np.linspace(0.05, 0.95, N_STARTS)])
    k = min(abs(float(best.x[0])), 1.0)
    return _result(best, n, {"K": -k}, len(data), {"switchover": switchover, "sign": "anti-correlated"})


# -- f3 --------------------------------------------------------------------------


def f3(w, a: float, w0: float, sigma: float):
    return a * np.exp(-((np.asarray(w, dtype=float) - w0) ** 2) / (2.0 * sigma * sigma))


def fit_f3(data: XYSeries) -> FitResult:
    """Gaussian spectrum fit; also returns the FWHM ``delta``."""
    if len(data) < 4:
        raise ValueError("fit_f3 needs at least 4 points")
    w, yv = data.x, data.y

    def res(p):
        return f3(w, *p) - yv

    def jac(p):
        a, w0, sg = p
        d = w - w0
        e = np.exp(-d * d / (2 * sg * sg))
        return np.column_stack([e, a * e * d / sg**2, a * e * d * d / sg**3])

    wt = np.clip(yv, 0.0, None)
    mu = float(np.sum(wt * w) / wt.sum()) if wt.sum() > 0 else float(w.mean())
    sd = float(math.sqrt(max(np.sum(wt * (w - mu) ** 2) / max(wt.sum(), 1e-300), 1e-300)))
    span = float(np.ptp(w))
    starts = [
        (yv.max(), mu, sd),
        (yv.max(), float(w[np.argmax(yv)]), sd),
        (yv.max(), mu, 0.5 * sd),
        (yv.max(), mu, 2.0 * sd),
        (yv.max(), mu, span / 4),
    ]
    best, n = _lm(res, jac, starts[:N_STARTS])
    a, w0, sg = (float(v) for v in best.x)
    sg = abs(sg)
    return _result(best, n, {"amplitude": a, "omega0": w0, "sigma0": sg, "delta": sg * FWHM_PER_SIGMA},
                   len(data))


def derive_params(y_tilde: float, delta: float) -> dict[str, float]:
    """Single-photon variance ``C`` from the pump FWHM and ``delta_n`` from ``Y``."""
    if not (y_tilde > 0 and delta > 0):
        raise ValueError("y_tilde and delta must be positive")
    c = (SPDC_BANDWIDTH_FACTOR * delta / FWHM_PER_SIGMA) ** 2
    return {"C": c, "delta_n": math.sqrt(2.0 * y_tilde / c)}


# -- end-to-end ------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticData:
    spectrum: XYSeries
    plate1: XYSeries
    plate2: XYSeries


def synthesize(m: TwoPhotonModel, noise: float = 0.0, seed: int | None = None,
               spectrum_points: int = 121, plate_points: int = 41) -> SyntheticData:
    """Spectrum and trace-distance curves of a model with multiplicative noise."""
    rng = np.random.default_rng(seed)
    sigma = m.delta_fwhm / FWHM_PER_SIGMA
    w = np.linspace(m.omega0 - 4 * sigma, m.omega0 + 4 * sigma, spectrum_points)
    t = m.switchover
    x1 = np.linspace(0.0, t, plate_points)
    x2 = np.linspace(t, 2 * t, plate_points)
    y = m.y_tilde

    def noisy(v):
        return v * (1.0 + noise * rng.standard_normal(v.shape)) if noise else v

    return SyntheticData(
        XYSeries(w, noisy(f3(w, 1.0, m.omega0, sigma)), "spectrum"),
        XYSeries(x1, noisy(f1(x1, 1.0, y)), "plate 1"),
        XYSeries(x2, noisy(f2(x2, 1.0, y, m.K, t)), "plate 2"),
    )


@dataclass
class PipelineResult:
    f3: FitResult
    f1: FitResult
    f2: FitResult
    derived: dict[str, float]

    def table_row(self) -> dict[str, float]:
        return {
            "K": self.f2.params["K"],
            "omega0": self.f3.params["omega0"],
            "delta": self.f3.params["delta"],
            "C": self.derived["C"],
            "delta_n": self.derived["delta_n"],
        }

    def to_record(self) -> dict:
        return {
            "row": self.table_row(),
            "fits": {"f3": self.f3.to_record(), "f1": self.f1.to_record(), "f2": self.f2.to_record()},
            "assumptions": {"spdc_bandwidth_factor": SPDC_BANDWIDTH_FACTOR},
        }


def fit_pipeline(spectrum: XYSeries, plate1: XYSeries, plate2: XYSeries,
                 switchover: float = DEFAULT_SWITCHOVER) -> PipelineResult:
    r3 = fit_f3(spectrum)
    r1 = fit_f1(plate1)
    r2 = fit_f2(plate2, r1.params["X_tilde"], r1.params["Y_tilde"], switchover)
    return PipelineResult(r3, r1, r2, derive_params(r1.params["Y_tilde"], r3.params["delta"]))


# -- CSV -------------------------------------------------------------------------


def load_series(source: str | TextIO, meta: str | None = None) -> XYSeries:
    """Read a CSV with header ``x,y``; errors name the offending line."""
    if isinstance(source, str):
        with open(source, newline="") as fh:
            return load_series(fh, meta if meta is not None else source)
    rows = list(csv.reader(source))
    if not rows:
        raise ValueError("no data rows")
    if [h.strip() for h in rows[0]] != ["x", "y"]:
        raise ValueError(f"line 1: expected header 'x,y', got {','.join(rows[0])!r}")
    xs, ys = [], []
    for n, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise ValueError(f"line {n}: expected 2 fields, got {len(row)}")
        try:
            x, y = float(row[0]), float(row[1])
        except ValueError:
            raise ValueError(f"line {n}: non-numeric value in {','.join(row)!r}") from None
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError(f"line {n}: values must be finite")
        if xs and x <= xs[-1]:
            raise ValueError(f"line {n}: x = {x:g} is not greater than the previous x = {xs[-1]:g}")
        xs.append(x)
        ys.append(y)
    if not xs:
        raise ValueError("no data rows")
    return XYSeries(np.array(xs), np.array(ys), meta or "")


def series_to_csv(s: XYSeries) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y"])
    for x, y in zip(s.x, s.y):
        w.writerow([repr(float(x)), repr(float(y))])
    return buf.getvalue()
