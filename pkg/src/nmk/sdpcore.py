"""Small dense semidefinite programs.

Problems are stated over Hermitian (or real symmetric) matrix variables::

    minimise    sum_v Re tr(C_v X_v) + const
    subject to  sum_v A_cv(X_v) + B_c  >= 0     for every constraint c

Each variable is expanded in an orthonormal real coordinate basis, every
constraint is compiled into a dense matrix mapping coordinates to the
row-major ``vec`` of its block, and the resulting linear matrix inequality is
solved with a homogeneous self-dual primal-dual interior-point method using
Nesterov-Todd scaling and a Mehrotra predictor-corrector.

Complex Hermitian blocks are handled natively by default. Setting
``SolverOptions.embed_real`` maps every complex block ``S + iK`` to the real
symmetric ``[[S, -K], [K, S]]`` first, which solves the same problem in twice
the block size; the two routes are compared in the test-suite.
"""
from __future__ import annotations

import sys
import time
from dataclasses import asdict, dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Callable, Mapping, Sequence, TextIO, Union

import numpy as np
from scipy import sparse as sp
from scipy.linalg import cho_factor, cho_solve

from .matcore import ShapeError

LinearMap = Callable[[np.ndarray], np.ndarray]
Term = Union[LinearMap, str]

IDENTITY = "identity"
MAX_REFINEMENT = 4


class SolveStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    MAX_ITERATIONS = "MaxIterations"


@dataclass(frozen=True)
class SolverOptions:
    gap_tol: float = 1e-7
    feas_tol: float = 1e-8
    max_iterations: int = 200
    infeasibility_ratio: float = 1e-9
    step_fraction: float = 0.99
    refinement: int = 1
    polish_steps: int = 2
    embed_real: bool = False
    verbose: bool = False
    log_stream: TextIO | None = field(default=None, compare=False)

    def metadata(self) -> dict:
        d = asdict(self)
        d.pop("log_stream")
        return d


@dataclass(frozen=True)
class Variable:
    name: str
    dim: int
    complex: bool = True


@dataclass
class Constraint:
    """``sum_v terms[v](X_v) + constant >= 0`` on a ``dim x dim`` block.

    A term is either a linear callable acting on the variable's matrix or the
    string ``"identity"``.
    """

    dim: int
    terms: Mapping[str, Term]
    constant: np.ndarray | None = None
    complex: bool = True
    name: str = ""


@dataclass
class SdpProblem:
    variables: Sequence[Variable]
    objective: Mapping[str, np.ndarray]
    constraints: Sequence[Constraint]
    objective_constant: float = 0.0

    def scaled(self, factor: float) -> "SdpProblem":
        """Same feasible set with the objective multiplied by ``factor``."""
        return SdpProblem(
            self.variables,
            {k: factor * np.asarray(v) for k, v in self.objective.items()},
            self.constraints,
            factor * self.objective_constant,
        )


@dataclass
class SdpSolution:
    status: SolveStatus
    primal_value: float
    dual_value: float
    values: dict[str, np.ndarray]
    duals: list[np.ndarray]
    gap: float
    primal_residual: float
    dual_residual: float
    iterations: int
    min_constraint_eigenvalue: float
    message: str = ""
    options: dict = field(default_factory=dict)
    solve_time: float = 0.0

    @property
    def optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL


# -- coordinates ---------------------------------------------------------------


def coordinate_count(dim: int, complex_: bool = True) -> int:
    return dim * dim if complex_ else dim * (dim + 1) // 2


@lru_cache(maxsize=None)
def _basis_array(dim: int, complex_: bool) -> np.ndarray:
    a = np.array(_make_basis(dim, complex_))
    a.setflags(write=False)
    return a


def coordinate_basis(dim: int, complex_: bool = True) -> np.ndarray:
    """Orthonormal basis (under ``Re tr(A B)``) of Hermitian/symmetric matrices.

    Returned as a read-only ``(k, dim, dim)`` array.
    """
    return _basis_array(dim, bool(complex_))


def _make_basis(dim: int, complex_: bool) -> list[np.ndarray]:
    out = []
    dtype = complex if complex_ else float
    for k in range(dim):
        e = np.zeros((dim, dim), dtype=dtype)
        e[k, k] = 1.0
        out.append(e)
    r = 1.0 / np.sqrt(2.0)
    for k in range(dim):
        for l in range(k + 1, dim):
            e = np.zeros((dim, dim), dtype=dtype)
            e[k, l] = e[l, k] = r
            out.append(e)
    if complex_:
        for k in range(dim):
            for l in range(k + 1, dim):
                e = np.zeros((dim, dim), dtype=complex)
                e[k, l] = 1j * r
                e[l, k] = -1j * r
                out.append(e)
    return out


def from_coordinates(x: np.ndarray, dim: int, complex_: bool = True) -> np.ndarray:
    return np.tensordot(np.asarray(x), coordinate_basis(dim, complex_), axes=1)


def embed(m: np.ndarray) -> np.ndarray:
    """Real symmetric image ``[[Re, -Im], [Im, Re]]`` of a Hermitian matrix."""
    re, im = m.real, m.imag
    return np.block([[re, -im], [im, re]])


# -- compiled form -------------------------------------------------------------


@dataclass
class _Block:
    n: int  # block size
    cplx: bool
    M: np.ndarray  # (n*n, nvar) column j = vec(A_j)
    B: np.ndarray  # (n, n)
    sparse: tuple | None = None  # gather indices for <= 2 nnz columns
    Mh: np.ndarray | None = None

    def __post_init__(self):
        self.Mh = np.ascontiguousarray(self.M.conj().T)


def _compile(p: SdpProblem, embed_real: bool):
    offsets, total = {}, 0
    for v in p.variables:
        if v.name in offsets:
            raise ShapeError(f"duplicate variable {v.name!r}")
        offsets[v.name] = total
        total += coordinate_count(v.dim, v.complex)
    bases = {v.name: coordinate_basis(v.dim, v.complex) for v in p.variables}
    dims = {v.name: v.dim for v in p.variables}

    c = np.zeros(total)
    for name, cm in p.objective.items():
        if name not in offsets:
            raise ShapeError(f"objective refers to unknown variable {name!r}")
        cm = np.asarray(cm)
        if cm.shape != (dims[name], dims[name]):
            raise ShapeError(f"objective matrix for {name!r} has shape {cm.shape}")
        o = offsets[name]
        for i, e in enumerate(bases[name]):
            c[o + i] = np.real(np.trace(cm @ e))

    blocks = []
    for k, con in enumerate(p.constraints):
        n = con.dim
        dtype = complex if con.complex else float
        M = np.zeros((n * n, total), dtype=dtype)
        for name, term in con.terms.items():
            if name not in offsets:
                raise ShapeError(f"constraint {k} refers to unknown variable {name!r}")
            o = offsets[name]
            for i, e in enumerate(bases[name]):
                a = e if term == IDENTITY else np.asarray(term(e))
                if a.shape != (n, n):
                    raise ShapeError(
                        f"constraint {k} ({con.name or 'unnamed'}): term for {name!r} "
                        f"returns shape {a.shape}, expected {(n, n)}"
                    )
                if np.max(np.abs(a - a.conj().T), initial=0.0) > 1e-10 * max(1.0, np.max(np.abs(a))):
                    raise ShapeError(f"constraint {k}: term for {name!r} is not Hermiticity preserving")
                if not con.complex and np.max(np.abs(np.imag(a)), initial=0.0) > 1e-12:
                    raise ShapeError(f"constraint {k} is declared real but has complex terms")
                M[:, o + i] += (a if con.complex else a.real).reshape(-1)
        B = np.zeros((n, n), dtype=dtype) if con.constant is None else np.asarray(con.constant, dtype=dtype)
        if B.shape != (n, n):
            raise ShapeError(f"constraint {k}: constant has shape {B.shape}, expected {(n, n)}")
        B = 0.5 * (B + B.conj().T)
        if embed_real and con.complex:
            cols = [embed(M[:, j].reshape(n, n)).reshape(-1) for j in range(total)]
            M = np.column_stack(cols) if cols else np.zeros((4 * n * n, 0))
            B = embed(B)
            n, cplx = 2 * n, False
        else:
            cplx = con.complex
        blocks.append(_Block(n, cplx, M, B, _sparse_pattern(M)))
    return c, blocks, offsets


def _sparse_pattern(M: np.ndarray):
    if M.shape[0] < 16 or np.any(np.count_nonzero(M, axis=0) > 2):
        return None
    p = sp.csr_matrix(M)
    return p, sp.csr_matrix(p.conj().T)


# -- cone helpers --------------------------------------------------------------


def _h(a):
    return a.conj().T


def _inner(u, v) -> float:
    return float(sum(np.real(np.vdot(a, b)) for a, b in zip(u, v)))


def _norm(u) -> float:
    return float(np.sqrt(sum(np.real(np.vdot(a, a)) for a in u)))


def _herm(a):
    return 0.5 * (a + _h(a))


def _nt_scaling(s, z):
    l1 = np.linalg.cholesky(_herm(s))
    l2 = np.linalg.cholesky(_herm(z))
    u, lam, vh = np.linalg.svd(_h(l2) @ l1)
    isq = 1.0 / np.sqrt(lam)
    r = (l1 @ _h(vh)) * isq
    rti = (l2 @ u) * isq
    return r, rti, lam


def _lam_div(lam, u):
    """Solve ``lam o v = u`` for ``v`` (Jordan product with diagonal ``lam``)."""
    return 2.0 * u / (lam[:, None] + lam[None, :])


def _jordan(a, b):
    return 0.5 * (a @ b + b @ a)


def _max_step(lam, d) -> float:
    isq = 1.0 / np.sqrt(lam)
    w = np.linalg.eigvalsh(_herm(d * isq[:, None] * isq[None, :]))
    return np.inf if w[0] >= 0 else -1.0 / w[0]


# -- solver --------------------------------------------------------------------


class _Lmi:
    def __init__(self, c, blocks):
        self.c = c
        self.blocks = blocks
        self.m = sum(b.n for b in blocks)

    def amap(self, x):
        return [(b.M @ x).reshape(b.n, b.n) for b in self.blocks]

    def aadj(self, u):
        out = np.zeros_like(self.c)
        for b, ub in zip(self.blocks, u):
            if b.M.shape[1]:
                out += np.real(b.Mh @ ub.reshape(-1))
        return out

    def schur(self, qs):
        nvar = self.c.size
        h = np.zeros((nvar, nvar))
        for b, q in zip(self.blocks, qs):
            if b.sparse is not None:
                p, ph = b.sparse
                kp = (p.T @ np.kron(q.T, q)).T  # kron(q, q.T) @ P
                h += np.real(ph @ kp)
            else:
                a = b.M.T.reshape(nvar, b.n, b.n)
                y = q @ a @ q
                h += np.real(b.Mh @ y.reshape(nvar, -1).T)
        return 0.5 * (h + h.T)


def _log(opts: SolverOptions, msg: str):
    if opts.verbose:
        stream = opts.log_stream or sys.stderr
        stream.write(msg + "\n")


def solve(p: SdpProblem, opts: SolverOptions | None = None) -> SdpSolution:
    """Solve ``p``; never raises for infeasible or stalled problems (see ``status``)."""
    opts = opts or SolverOptions()
    t0 = time.perf_counter()
    c, blocks, offsets = _compile(p, opts.embed_real)
    lmi = _Lmi(c, blocks)
    x, s, z, status, info = _hsd(lmi, opts)

    values = {}
    for v in p.variables:
        o = offsets[v.name]
        k = coordinate_count(v.dim, v.complex)
        values[v.name] = from_coordinates(x[o : o + k], v.dim, v.complex)

    fx = [a + b.B for a, b in zip(lmi.amap(x), blocks)]
    mins = [float(np.linalg.eigvalsh(_herm(f))[0]) for f in fx if f.size]
    duals = []
    for b, zb, con in zip(blocks, z, p.constraints):
        if b.cplx == con.complex:
            duals.append(zb)
        else:
            n = con.dim
            duals.append(zb[:n, :n] + zb[n:, n:] + 1j * (zb[n:, :n] - zb[:n, n:]))

    primal = float(c @ x) + p.objective_constant
    dual = -_inner([b.B for b in blocks], z) + p.objective_constant
    _log(opts, f"status {status.value} after {info['iterations']} iterations, value {primal:.10g}")
    return SdpSolution(
        status=status,
        primal_value=primal,
        dual_value=dual,
        values=values,
        duals=duals,
        gap=max(0.0, info["gap"]),
        primal_residual=info["pres"],
        dual_residual=info["dres"],
        iterations=info["iterations"],
        min_constraint_eigenvalue=min(mins) if mins else 0.0,
        message=info["message"],
        options=opts.metadata(),
        solve_time=time.perf_counter() - t0,
    )


def _hsd(lmi: _Lmi, opts: SolverOptions):
    c, blocks = lmi.c, lmi.blocks
    nvar = c.size
    B = [b.B for b in blocks]
    eye = [np.eye(b.n) for b in blocks]
    resx0 = max(1.0, float(np.linalg.norm(c)))
    resz0 = max(1.0, _norm(B))

    # Initial point: least-squares primal/dual with identity scaling, shifted into the cone.
    h0 = lmi.schur(eye)
    h0 += 1e-14 * max(1.0, np.trace(h0) / max(nvar, 1)) * np.eye(nvar)
    if nvar:
        x = np.linalg.solve(h0, -lmi.aadj(B))
        y = np.linalg.solve(h0, c)
    else:
        x, y = np.zeros(0), np.zeros(0)
    s = [a + b for a, b in zip(lmi.amap(x), B)]
    z = lmi.amap(y)
    for u in (s, z):
        nrm = _norm(u)
        for k, ub in enumerate(u):
            lmin = np.linalg.eigvalsh(_herm(ub))[0]
            if lmin <= 1e-8 * max(nrm, 1.0):
                u[k] = _herm(ub) + (1.0 - lmin) * eye[k]
            else:
                u[k] = _herm(ub)
    tau = kappa = 1.0

    info = {"iterations": 0, "gap": np.inf, "pres": np.inf, "dres": np.inf, "message": ""}

    best = None  # last certified iterate while polishing
    fallback = None  # meets the acceptance rule with residuals within 100x tolerance
    fallback_score = np.inf

    def snapshot(status, it, msg):
        return x / tau, [sb / tau for sb in s], [zb / tau for zb in z], status, dict(info, iterations=it, message=msg)

    def finish(status, it, msg=""):
        if best is not None:
            return best
        return snapshot(status, it, msg)

    def constraints_hold():
        # The acceptance rule proper: every constraint block has min eigenvalue >= -feas_tol.
        fx = [a / tau + bb for a, bb in zip(lmi.amap(x), B)]
        return all(np.linalg.eigvalsh(_herm(f))[0] >= -opts.feas_tol for f in fx if f.size)

    def breakdown(it, msg):
        if best is None and fallback is not None:
            return fallback
        return finish(SolveStatus.MAX_ITERATIONS, it, msg)

    try:
        scal = [_nt_scaling(sb, zb) for sb, zb in zip(s, z)]
    except np.linalg.LinAlgError:
        return finish(SolveStatus.MAX_ITERATIONS, 0, "could not form initial scaling")

    polished = 0
    _log(opts, f"{'it':>4} {'pcost':>14} {'dcost':>14} {'gap':>10} {'pres':>10} {'dres':>10} {'k/t':>10}")
    for it in range(opts.max_iterations + 1):
        ax = lmi.amap(x)
        az = lmi.aadj(z)
        rx = -az + tau * c
        rz = [sb - a - tau * bb for sb, a, bb in zip(s, ax, B)]
        cx = float(c @ x)
        bz = _inner(B, z)
        rt = kappa + cx + bz
        gap_h = _inner(s, z)
        mu = (gap_h + tau * kappa) / (lmi.m + 1)

        pres = _norm(rz) / tau / resz0
        dres = float(np.linalg.norm(rx)) / tau / resx0
        gap = gap_h / tau**2
        info.update(gap=gap, pres=pres, dres=dres)
        _log(
            opts,
            f"{it:4d} {cx / tau:14.7e} {-bz / tau:14.7e} {gap:10.3e} {pres:10.3e} {dres:10.3e} {kappa / tau:10.3e}",
        )

        # Degenerate problems can stall with residual norms slightly above feas_tol. Close to
        # the tolerances the eigenvalue test decides, and the best such iterate is kept
        # in case the remaining steps break down.
        near = gap <= opts.gap_tol and max(pres, dres) <= 100 * opts.feas_tol and constraints_hold()
        if near and max(pres, dres) < fallback_score:
            fallback = snapshot(SolveStatus.OPTIMAL, it, "accepted after stagnation: constraints hold, "
                                "residuals within 100x tolerance")
            fallback_score = max(pres, dres)
        if (pres <= opts.feas_tol or near) and dres <= opts.feas_tol and gap <= opts.gap_tol:
            if best is None or gap < best[4]["gap"]:
                best = snapshot(SolveStatus.OPTIMAL, it, "")
            if it - best[4]["iterations"] >= 1 or polished >= opts.polish_steps:
                return best
            polished += 1
        elif best is not None:
            return best
        if bz < 0 and float(np.linalg.norm(az)) / resx0 / (-bz) <= opts.feas_tol:
            return finish(SolveStatus.INFEASIBLE, it, "primal infeasible (dual certificate found)")
        if cx < 0:
            hz = _norm([sb - a for sb, a in zip(s, ax)])
            if hz / resz0 / (-cx) <= opts.feas_tol:
                return finish(SolveStatus.INFEASIBLE, it, "dual infeasible (primal unbounded ray found)")
        if tau / kappa < opts.infeasibility_ratio:
            which = "primal" if bz < 0 else "dual" if cx < 0 else "primal or dual"
            return finish(SolveStatus.INFEASIBLE, it, f"{which} infeasible (tau/kappa below threshold)")
        if it == opts.max_iterations:
            return breakdown(it, "iteration limit reached")

        qs = [rti @ _h(rti) for _, rti, _ in scal]
        ws = [r @ _h(r) for r, _, _ in scal]

        def tmul(u):
            return [w @ ub @ w for w, ub in zip(ws, u)]
        H = lmi.schur(qs)
        try:
            chol = cho_factor(H, lower=True, check_finite=False) if nvar else None
        except np.linalg.LinAlgError:
            H += 1e-13 * max(1.0, np.max(np.abs(np.diag(H)))) * np.eye(nvar)
            try:
                chol = cho_factor(H, lower=True, check_finite=False)
            except np.linalg.LinAlgError:
                return breakdown(it, "Schur complement lost definiteness")

        def hsolve(v):
            return cho_solve(chol, v, check_finite=False) if nvar else v

        def kkt_once(bx, bzp):
            # G^T dz = bx, G dx - W^T W dz = bzp  with  G = -A.
            tinv = [q @ u @ q for q, u in zip(qs, bzp)]
            dx = hsolve(bx - lmi.aadj(tinv))
            adx = lmi.amap(dx)
            dz = [-(q @ (a + u) @ q) for q, a, u in zip(qs, adx, bzp)]
            return dx, dz

        def kkt(bx, bzp):
            dx, dz = kkt_once(bx, bzp)
            last = np.inf
            # at least opts.refinement passes; more while the residual keeps dropping
            for k in range(max(opts.refinement, MAX_REFINEMENT)):
                ex = bx + lmi.aadj(dz)
                ez = [u + a + t for u, a, t in zip(bzp, lmi.amap(dx), tmul(dz))]
                err = float(np.linalg.norm(ex)) + _norm(ez)
                small = err <= 1e-12 * (float(np.linalg.norm(bx)) + _norm(bzp))
                if k >= opts.refinement and (err >= 0.5 * last or small):
                    break
                last = err
                cx_, cz_ = kkt_once(ex, ez)
                dx = dx + cx_
                dz = [a + b for a, b in zip(dz, cz_)]
            return dx, dz

        x1, z1 = kkt(-c, B)
        den1 = float(c @ x1) + _inner(B, z1)
        lams = [lam for _, _, lam in scal]

        sigma, aff = 0.0, None
        for phase in (0, 1):
            if phase == 0:
                bs = [-np.diag(lam * lam) for lam in lams]
                bk = -tau * kappa
            else:
                dsa, dza, dta, dka = aff
                bs = [
                    -np.diag(lam * lam) - _jordan(a, b) + sigma * mu * np.eye(lam.size)
                    for lam, a, b in zip(lams, dsa, dza)
                ]
                bk = -tau * kappa - dta * dka + sigma * mu
            eta = 1.0 - sigma
            bx = -eta * rx
            bzv = [-eta * r for r in rz]
            bt = -eta * rt
            ld = [_lam_div(lam, u) for lam, u in zip(lams, bs)]
            wt = [r @ v @ _h(r) for (r, _, _), v in zip(scal, ld)]
            x2, z2 = kkt(bx, [u - w for u, w in zip(bzv, wt)])
            dtau = (bt - bk / tau - float(c @ x2) - _inner(B, z2)) / (den1 - kappa / tau)
            dx = x2 + dtau * x1
            dz = [a + dtau * b for a, b in zip(z2, z1)]
            dz_sc = [_h(r) @ d @ r for (r, _, _), d in zip(scal, dz)]
            ds_sc = [v - d for v, d in zip(ld, dz_sc)]
            dkappa = (bk - kappa * dtau) / tau

            amax = np.inf
            for lam, a, b in zip(lams, ds_sc, dz_sc):
                amax = min(amax, _max_step(lam, a), _max_step(lam, b))
            if dtau < 0:
                amax = min(amax, -tau / dtau)
            if dkappa < 0:
                amax = min(amax, -kappa / dkappa)
            if phase == 0:
                step_aff = min(1.0, amax)
                sigma = (1.0 - step_aff) ** 3
                aff = (ds_sc, dz_sc, dtau, dkappa)
        step = min(1.0, opts.step_fraction * amax)

        x = x + step * dx
        tau += step * dtau
        kappa += step * dkappa
        # ds from the linearised primal equality keeps the residual update exact.
        ds = [u + a + dtau * bb for u, a, bb in zip(bzv, lmi.amap(dx), B)]
        s = [_herm(sb + step * d) for sb, d in zip(s, ds)]
        z = [_herm(zb + step * d) for zb, d in zip(z, dz)]
        try:
            scal = [_nt_scaling(sb, zb) for sb, zb in zip(s, z)]
        except np.linalg.LinAlgError:
            return breakdown(it, "lost positive definiteness while updating scaling")

    return breakdown(opts.max_iterations, "iteration limit reached")
