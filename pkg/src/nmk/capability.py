"""Process-capability robustness of intermediate maps and the witness kernel.

``robustness`` finds the least trace excess of a CP process dominating the
process matrix of a (possibly non-CP) map::

    beta = min tr(X) - 1   s.t.  X >= 0,  X - chi >= 0,  tr X >= 1

and reports it next to the negative-eigenvalue sum of ``chi`` computed by an
unrelated route. ``witness_two``/``witness_one`` search over CP maps (as Choi
matrices) whose outputs dominate the observed later states; a minimum above
the number of input states certifies that no CP intermediate map exists.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .matcore import DEFAULT_TOL, ShapeError, check_hermitian, density_matrix, eigvals_hermitian
from .procrep import ProcessRep, choi_apply
from .sdpcore import (
    IDENTITY,
    Constraint,
    SdpProblem,
    SdpSolution,
    SolveStatus,
    SolverOptions,
    Variable,
    solve,
)

DETECTION_TOL = DEFAULT_TOL.detection


class SolverFailure(RuntimeError):
    """The SDP did not reach an optimal, certified solution."""

    def __init__(self, what: str, sol: SdpSolution):
        super().__init__(
            f"{what}: solver stopped with status {sol.status.value} after {sol.iterations} iterations "
            f"(gap {sol.gap:.2e}, primal residual {sol.primal_residual:.2e}, "
            f"dual residual {sol.dual_residual:.2e}) {sol.message}".rstrip()
        )
        self.solution = sol


@dataclass
class RobustnessResult:
    beta: float
    oracle_beta: float
    chi_cp_witness: ProcessRep = field(repr=False)
    gap: float
    raw_value: float
    iterations: int

    @property
    def agreement(self) -> float:
        return abs(self.beta - self.oracle_beta)

    def to_record(self) -> dict:
        return {"beta": self.beta, "oracle_beta": self.oracle_beta, "gap": self.gap}


@dataclass
class WitnessResult:
    value: float
    threshold: float
    violated: bool
    lambda_tilde: np.ndarray = field(repr=False)
    gap: float = 0.0
    solver_value: float = float("nan")

    def to_record(self) -> dict:
        return {"value": self.value, "threshold": self.threshold, "violated": self.violated}


def negative_eigenvalue_sum(chi) -> float:
    """Oracle: sum of |lambda| over negative eigenvalues of a Hermitian ``chi``."""
    w = eigvals_hermitian(check_hermitian(chi, 1e-8))
    return float(-np.sum(w[w < 0])) + 0.0


def robustness_problem(chi: np.ndarray) -> SdpProblem:
    n = chi.shape[0]
    return SdpProblem(
        variables=[Variable("X", n)],
        objective={"X": np.eye(n)},
        constraints=[
            Constraint(n, {"X": IDENTITY}, name="X >= 0"),
            Constraint(n, {"X": IDENTITY}, -chi, name="X - chi >= 0"),
            Constraint(1, {"X": lambda x: np.array([[np.trace(x).real]])}, np.array([[-1.0]]),
                       complex=False, name="tr X >= 1"),
        ],
        objective_constant=-1.0,
    )


def robustness(lam: ProcessRep, opts: SolverOptions | None = None) -> RobustnessResult:
    """Robustness ``beta`` of ``lam`` with the eigenvalue oracle attached.

    Raises
    ------
    ShapeError
        If ``chi`` is not Hermitian or its trace differs from 1 by more than 1e-8.
    SolverFailure
        If the interior-point solve does not finish with status Optimal.
    """
    chi = check_hermitian(lam.chi, 1e-8)
    chi = 0.5 * (chi + chi.conj().T)
    tr = np.trace(chi)
    if abs(tr - 1.0) > 1e-8:
        raise ShapeError(f"robustness needs a trace-preserving map: tr(chi) = {tr.real:.10g}")
    sol = solve(robustness_problem(chi), opts)
    if sol.status is not SolveStatus.OPTIMAL:
        raise SolverFailure("robustness", sol)
    x = sol.values["X"]
    witness = ProcessRep.from_chi(x / np.trace(x).real, lam.basis)
    return RobustnessResult(
        beta=max(0.0, sol.primal_value),
        oracle_beta=negative_eigenvalue_sum(chi),
        chi_cp_witness=witness,
        gap=sol.gap,
        raw_value=sol.primal_value,
        iterations=sol.iterations,
    )


def identify(lam: ProcessRep, detection_tol: float = DETECTION_TOL, opts: SolverOptions | None = None) -> bool:
    """True when ``lam`` is detected as non-CP (``beta > detection_tol``)."""
    return robustness(lam, opts).beta > detection_tol


def _witness(pairs, threshold: float, detection_tol: float, opts) -> WitnessResult:
    states = [(density_matrix(a), density_matrix(b)) for a, b in pairs]
    d = states[0][0].shape[0]
    if any(s.shape != (d, d) for pair in states for s in pair):
        raise ShapeError("witness inputs must all have the same dimension")
    c = sum(np.kron(r1.T, np.eye(d)) for r1, _ in states)
    cons = [Constraint(d * d, {"J": IDENTITY}, name="J >= 0")]
    for k, (r1, r2) in enumerate(states):
        cons.append(Constraint(d, {"J": lambda j, r=r1: choi_apply(j, r)}, -r2, name=f"output {k} dominates"))
    sol = solve(SdpProblem([Variable("J", d * d)], {"J": c}, cons), opts)
    if sol.status is not SolveStatus.OPTIMAL:
        raise SolverFailure("witness", sol)
    j = _repair_choi(sol.values["J"], states)
    value = float(sum(np.trace(choi_apply(j, r1)).real for r1, _ in states))
    return WitnessResult(
        value=value,
        threshold=threshold,
        violated=bool(value > threshold + detection_tol),
        lambda_tilde=j,
        gap=sol.gap,
        solver_value=sol.primal_value,
    )


def _repair_choi(j: np.ndarray, states) -> np.ndarray:
    """Move an interior-point Choi matrix onto the feasible set.

    Negative eigenvalues are clipped and ``2 * eps * tr(rho) * I`` is added to the
    map, with ``eps`` the largest remaining violation of the output
    constraints. The returned map is exactly feasible, so its objective is an
    upper bound on the optimum that exceeds it by about the solver residual.
    """
    d = states[0][0].shape[0]
    w, v = np.linalg.eigh(0.5 * (j + j.conj().T))
    j = (v * np.clip(w, 0.0, None)) @ v.conj().T
    eps = 0.0
    for r1, r2 in states:
        out = choi_apply(j, r1) - r2
        eps = max(eps, -float(np.linalg.eigvalsh(0.5 * (out + out.conj().T))[0]))
    if eps > 0:
        j = j + 2.0 * eps * np.eye(d * d)
    return j


def witness_two(rho_a_t1, rho_b_t1, rho_a_t2, rho_b_t2, detection_tol: float = DETECTION_TOL,
                opts: SolverOptions | None = None) -> WitnessResult:
    """Two-state witness kernel; values above 2 certify a non-CP intermediate map."""
    return _witness([(rho_a_t1, rho_a_t2), (rho_b_t1, rho_b_t2)], 2.0, detection_tol, opts)


def witness_one(rho_t1, rho_t2, detection_tol: float = DETECTION_TOL,
                opts: SolverOptions | None = None) -> WitnessResult:
    """Single-state witness kernel with threshold 1."""
    return _witness([(rho_t1, rho_t2)], 1.0, detection_tol, opts)
