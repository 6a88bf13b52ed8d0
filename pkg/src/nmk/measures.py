"""Non-Markovianity measures evaluated on a family of dynamical maps.

* :func:`n_beta` integrates the robustness of ``L(t2, t)`` over the division
  time ``t`` with an adaptive composite trapezoid.
* :func:`n_blp` accumulates the increases of the trace distance between two
  evolving states; :func:`blp_pair_search` maximises it over a finite set of
  initial pairs, which gives a lower bound on the full measure.
* :func:`n_rhp` adds up the excess trace norm of the normalised Choi matrices
  of short intermediate maps.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Sequence, TextIO

import numpy as np

from .capability import negative_eigenvalue_sum, robustness
from .matcore import NonInvertibleSubprocess, ket, projector, trace_distance, trace_norm
from .procrep import ProcessRep, apply, identity_process, intermediate

CSV_HEADER = ("t_lambda0", "value")


class MeasureKind(str, Enum):
    NBETA = "NBeta"
    NBLP = "NBlp"
    NRHP = "NRhp"


@dataclass
class MeasureReport:
    kind: MeasureKind
    value: float
    grid_size: int
    discretization_note: str
    series: list[tuple[float, float]] = field(default_factory=list, repr=False)
    excluded: list[float] = field(default_factory=list)

    def to_record(self) -> dict:
        return {
            "kind": self.kind.value,
            "value": self.value,
            "grid_size": self.grid_size,
            "discretization_note": self.discretization_note,
            "excluded": list(self.excluded),
        }


class DynamicsFamily:
    """Total maps ``t -> E_t`` on ``[0, t_max]`` with a sampling grid.

    Evaluations are memoised, so refinement passes reuse earlier points.
    """

    def __init__(self, evaluator: Callable[[float], ProcessRep], t_max: float,
                 grid: Sequence[float] | None = None, name: str = ""):
        if not t_max > 0:
            raise ValueError(f"t_max must be positive, got {t_max}")
        self.evaluator = evaluator
        self.t_max = float(t_max)
        self.name = name
        g = np.linspace(0.0, self.t_max, 129) if grid is None else np.asarray(grid, dtype=float)
        if g.ndim != 1 or g.size < 2 or np.any(np.diff(g) <= 0):
            raise ValueError("grid must be a strictly increasing sequence of at least two times")
        if g[0] < 0 or g[-1] > self.t_max:
            raise ValueError(f"grid must lie in [0, {self.t_max}]")
        self.grid = g
        self._cache: dict[float, ProcessRep] = {}
        e0 = self(0.0)
        if np.max(np.abs(e0.superop - identity_process(e0.dim).superop)) > 1e-10:
            raise ValueError("the map at t = 0 must be the identity")

    @property
    def dim(self) -> int:
        return self(0.0).dim

    def __call__(self, t: float) -> ProcessRep:
        key = float(t)
        if key < 0 or key > self.t_max * (1 + 1e-12):
            raise ValueError(f"time {t} outside [0, {self.t_max}]")
        if key not in self._cache:
            self._cache[key] = self.evaluator(key)
        return self._cache[key]

    def intermediate(self, t2: float, t1: float) -> ProcessRep:
        return intermediate(self(t2), self(t1))


def family_from_model(model, kind: str = "global", t_max: float | None = None,
                      points: int = 129) -> DynamicsFamily:
    """Build a family from a dephasing model (``kind``: global, local or single)."""
    from . import dephasing as dp

    if isinstance(model, dp.SinglePhotonModel):
        ev, default_max = dp.single_dynamics(model), 100.0
    elif kind == "local":
        ev, default_max = dp.local_dynamics(model), 2 * model.switchover
    elif kind == "global":
        ev, default_max = dp.global_dynamics(model), 2 * model.switchover
    else:
        raise ValueError(f"unknown dynamics kind {kind!r}; expected 'global' or 'local'")
    t_max = default_max if t_max is None else t_max
    return DynamicsFamily(ev, t_max, np.linspace(0.0, t_max, points), name=getattr(model, "name", ""))


# -- quadrature helpers ----------------------------------------------------------


def _uniform(a: float, b: float, n: int) -> np.ndarray:
    return np.linspace(a, b, n)


def _refine(evaluate: Callable[[np.ndarray], float], a: float, b: float, start: int, cap: int,
            rtol: float) -> tuple[float, int, bool]:
    """Halve the step of a uniform grid until the estimate settles."""
    n = start
    prev = evaluate(_uniform(a, b, n))
    while True:
        nxt = 2 * (n - 1) + 1
        if nxt > cap:
            return prev, n, False
        cur = evaluate(_uniform(a, b, nxt))
        n = nxt
        if abs(cur - prev) <= rtol * abs(cur) or abs(cur - prev) <= 1e-12:
            return cur, n, True
        prev = cur


# -- N_beta --------------------------------------------------------------------


def n_beta(f: DynamicsFamily, t2: float | None = None, *, method: str = "sdp", start: int = 17,
           cap: int = 1025, rtol: float = 1e-3) -> MeasureReport:
    """Integral over ``t in [0, t2]`` of the robustness of ``L(t2, t)``.

    ``method="spectral"`` replaces the SDP by the negative-eigenvalue sum,
    which is the same number for trace-preserving maps and far cheaper.
    """
    t2 = f.t_max if t2 is None else float(t2)
    if method == "sdp":
        def beta(lam):
            return robustness(lam).beta
    elif method == "spectral":
        def beta(lam):
            return negative_eigenvalue_sum(lam.chi)
    else:
        raise ValueError(f"unknown method {method!r}")

    values: dict[float, float | None] = {}

    def point(t: float):
        if t not in values:
            try:
                values[t] = beta(f.intermediate(t2, t))
            except NonInvertibleSubprocess:
                values[t] = None
        return values[t]

    def estimate(grid):
        ts = [t for t in grid if point(float(t)) is not None]
        ys = [values[float(t)] for t in ts]
        return float(np.trapezoid(ys, ts)) if len(ts) > 1 else 0.0

    value, n, converged = _refine(estimate, 0.0, t2, start, cap, rtol)
    grid = _uniform(0.0, t2, n)
    excluded = [float(t) for t in grid if values.get(float(t)) is None]
    note = (f"trapezoid on {n} uniform divisions of [0, {t2:g}], {method} robustness; "
            + ("converged" if converged else f"refinement cap {cap} reached"))
    if excluded:
        note += f"; {len(excluded)} non-invertible division(s) skipped"
    series = [(float(t), values[float(t)]) for t in grid if values.get(float(t)) is not None]
    return MeasureReport(MeasureKind.NBETA, max(0.0, value), n, note, series, excluded)


# -- trace distance and N_BLP ----------------------------------------------------


def d_trace_dynamics(f: DynamicsFamily, rho1, rho2, grid: Iterable[float] | None = None):
    ts = f.grid if grid is None else grid
    return [(float(t), trace_distance(apply(f(t), rho1), apply(f(t), rho2))) for t in ts]


def d_closed_form(m, tau1: float, tau2: float) -> float:
    """Trace distance of the two Bell states ``phi+`` and ``phi-`` in the two-photon model."""
    if tau1 < 0 or tau2 < 0:
        raise ValueError("plate times must be nonnegative")
    q = tau1 * tau1 + tau2 * tau2 - 2.0 * abs(m.K) * tau1 * tau2
    return math.exp(-0.5 * m.delta_n**2 * m.C * q)


def _positive_increments(d: Sequence[float]) -> float:
    inc = np.diff(np.asarray(d, dtype=float))
    return float(np.sum(inc[inc > 0]))


def n_blp(f: DynamicsFamily, rho1, rho2, *, start: int = 33, cap: int = 1025,
          rtol: float = 1e-3) -> MeasureReport:
    cache: dict[float, float] = {}

    def dist(t):
        if t not in cache:
            cache[t] = trace_distance(apply(f(t), rho1), apply(f(t), rho2))
        return cache[t]

    def estimate(grid):
        return _positive_increments([dist(float(t)) for t in grid])

    value, n, converged = _refine(estimate, 0.0, f.t_max, start, cap, rtol)
    grid = _uniform(0.0, f.t_max, n)
    note = (f"sum of positive trace-distance increments on {n} uniform points of [0, {f.t_max:g}]; "
            + ("converged" if converged else f"refinement cap {cap} reached"))
    return MeasureReport(MeasureKind.NBLP, value, n, note, [(float(t), dist(float(t))) for t in grid])


def bloch_pair_grid(n_theta: int = 12, n_phi: int = 12):
    """Antipodal pure single-qubit pairs on a Bloch-angle grid."""
    pairs = []
    for th in np.linspace(0.0, np.pi / 2, n_theta):
        for ph in np.linspace(0.0, 2 * np.pi, n_phi, endpoint=False):
            up = ket(np.cos(th / 2), np.exp(1j * ph) * np.sin(th / 2))
            down = ket(-np.exp(-1j * ph) * np.sin(th / 2), np.cos(th / 2))
            pairs.append((f"theta={th:.4f},phi={ph:.4f}", projector(up), projector(down)))
    return pairs


def blp_pair_search(f: DynamicsFamily, pairs=None, **kw):
    """Best ``n_blp`` over a finite list of ``(label, rho1, rho2)`` pairs.

    The default is a 12 x 12 Bloch grid for one qubit and the Bell/product
    catalog for two qubits.
    """
    if pairs is None:
        if f.dim == 2:
            pairs = bloch_pair_grid()
        else:
            from .states import two_qubit_pairs

            pairs = [(p.label, p.rho_a, p.rho_b) for p in two_qubit_pairs()]
    best = None
    for label, r1, r2 in pairs:
        rep = n_blp(f, r1, r2, **kw)
        if best is None or rep.value > best[1].value + 1e-12:
            best = (label, rep)
    label, rep = best
    rep.discretization_note += f"; maximised over {len(pairs)} pairs (lower bound)"
    return label, rep


# -- N_RHP ---------------------------------------------------------------------


def n_rhp(f: DynamicsFamily, eps: float | None = None) -> MeasureReport:
    """Sum over the grid of ``||J(L(t+eps, t))||_1 / d - 1``.

    ``eps`` defaults to the grid step; the grid is the family's and the upper
    limit is ``t_max``.
    """
    grid = f.grid
    step = float(np.min(np.diff(grid)))
    eps = step if eps is None else float(eps)
    if not 0 < eps:
        raise ValueError("eps must be positive")
    d = f.dim
    series, excluded, total = [], [], 0.0
    ts = [t for t in grid if t + eps <= f.t_max * (1 + 1e-12)]
    for k, t in enumerate(ts):
        t_next = min(t + eps, f.t_max)
        try:
            lam = f.intermediate(t_next, t)
        except NonInvertibleSubprocess:
            excluded.append(float(t))
            continue
        excess = max(0.0, trace_norm(lam.choi) / d - 1.0)
        # Weight by the grid spacing in units of eps so that the sum approximates the integral.
        width = (ts[k + 1] - t) if k + 1 < len(ts) else eps
        total += excess * width / eps
        series.append((float(t), excess))
    note = (f"eps = {eps:g} on {len(ts)} grid points of [0, {f.t_max:g}]; "
            "integral truncated at t_max")
    if excluded:
        note += f"; {len(excluded)} non-invertible point(s) skipped"
    return MeasureReport(MeasureKind.NRHP, total, len(ts), note, series, excluded)


# -- CSV -------------------------------------------------------------------------


def write_series_csv(series: Iterable[tuple[float, float]], out: TextIO | str) -> None:
    if isinstance(out, str):
        with open(out, "w", newline="") as fh:
            write_series_csv(series, fh)
        return
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for t, v in series:
        w.writerow([repr(float(t)), repr(float(v))])


def series_to_csv(series: Iterable[tuple[float, float]]) -> str:
    buf = io.StringIO()
    write_series_csv(series, buf)
    return buf.getvalue()
