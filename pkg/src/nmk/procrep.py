"""Quantum operations as process (chi), Choi and superoperator matrices.

Conventions
-----------
* ``vec`` is row-major: ``vec(A @ X @ B) == kron(A, B.T) @ vec(X)``.
* The superoperator ``S`` acts on ``vec(rho)``; composition is ``S2 @ S1``.
* The Choi matrix is input-first, ``J = sum_ij |i><j| (x) L(|i><j|)``, so
  ``L(rho) = tr_in[(rho.T (x) I) J]`` and ``tr J = d`` for trace-preserving maps.
* ``chi`` is expanded in a fixed operator basis with a per-basis weight ``w``:
  ``L(rho) = w * sum_mn chi_mn B_m rho B_n^H``. The weights are chosen so
  that a trace-preserving map has ``tr(chi) == 1`` in every basis (``w = 1``
  for the Pauli-type single-qubit basis, ``w = d`` for matrix units).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .matcore import (
    DEFAULT_TOL,
    ShapeError,
    ToleranceProfile,
    as_matrix,
    check_hermitian,
    eigvals_hermitian,
    inverse,
)

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)

BASIS_LABELS = ("SingleQubitM", "TwoQubitE", "SingleQubitE")


@dataclass(frozen=True, eq=False)
class OperatorBasis:
    label: str
    elements: tuple
    weight: float

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    def vec_matrix(self) -> np.ndarray:
        """Columns are ``vec(B_m.T)``, so that ``J = w U chi U^H``."""
        return _vec_matrix(self.label)


def _matrix_units(d: int) -> tuple:
    # index m - 1 = a*d + b  <->  |a><b|; for d = 4 this is m = s + 2r + 4l + 8h + 1
    # with |a> = |h l>, |b> = |r s>.
    units = []
    for a in range(d):
        for b in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[a, b] = 1.0
            units.append(e)
    return tuple(units)


@lru_cache(maxsize=None)
def get_basis(label: str) -> OperatorBasis:
    if label == "SingleQubitM":
        return OperatorBasis(label, (I2, X, -1j * Y, Z), 1.0)
    if label == "TwoQubitE":
        return OperatorBasis(label, _matrix_units(4), 4.0)
    if label == "SingleQubitE":
        return OperatorBasis(label, _matrix_units(2), 2.0)
    raise ShapeError(f"unknown operator basis {label!r}; expected one of {BASIS_LABELS}")


def default_basis(dim: int) -> OperatorBasis:
    if dim == 2:
        return get_basis("SingleQubitM")
    if dim == 4:
        return get_basis("TwoQubitE")
    raise ShapeError(f"unsupported dimension {dim}; only 2 and 4 are supported")


@lru_cache(maxsize=None)
def _vec_matrix(label: str) -> np.ndarray:
    basis = get_basis(label)
    u = np.column_stack([b.T.reshape(-1) for b in basis.elements])
    u.setflags(write=False)
    return u


@lru_cache(maxsize=None)
def _vec_matrix_inv(label: str) -> np.ndarray:
    inv = np.linalg.inv(_vec_matrix(label))
    inv.setflags(write=False)
    return inv


# -- representation conversions ----------------------------------------------


def superop_to_choi(s: np.ndarray) -> np.ndarray:
    d = int(round(np.sqrt(s.shape[0])))
    return s.reshape(d, d, d, d).transpose(2, 0, 3, 1).reshape(d * d, d * d)


def choi_to_superop(j: np.ndarray) -> np.ndarray:
    d = int(round(np.sqrt(j.shape[0])))
    return j.reshape(d, d, d, d).transpose(1, 3, 0, 2).reshape(d * d, d * d)


def chi_to_choi(chi: np.ndarray, basis: OperatorBasis) -> np.ndarray:
    u = _vec_matrix(basis.label)
    return basis.weight * (u @ chi @ u.conj().T)


def choi_to_chi(j: np.ndarray, basis: OperatorBasis) -> np.ndarray:
    ui = _vec_matrix_inv(basis.label)
    return (ui @ j @ ui.conj().T) / basis.weight


def chi_to_superop(chi: np.ndarray, basis: OperatorBasis) -> np.ndarray:
    return choi_to_superop(chi_to_choi(chi, basis))


def superop_to_chi(s: np.ndarray, basis: OperatorBasis) -> np.ndarray:
    return choi_to_chi(superop_to_choi(s), basis)


def convert(matrix, source: str, target: str, basis: OperatorBasis | str | None = None) -> np.ndarray:
    """Convert between ``"chi"``, ``"choi"`` and ``"superop"`` forms."""
    m = as_matrix(matrix)
    d2 = m.shape[0]
    d = int(round(np.sqrt(d2)))
    if m.shape != (d2, d2) or d * d != d2 or d not in (2, 4):
        raise ShapeError(f"unsupported process matrix shape {m.shape}")
    if basis is None:
        basis = default_basis(d)
    elif isinstance(basis, str):
        basis = get_basis(basis)
    to_superop = {
        "chi": lambda a: chi_to_superop(a, basis),
        "choi": choi_to_superop,
        "superop": lambda a: a,
    }
    from_superop = {
        "chi": lambda a: superop_to_chi(a, basis),
        "choi": superop_to_choi,
        "superop": lambda a: a,
    }
    if source not in to_superop or target not in from_superop:
        raise ValueError(f"unknown representation {source!r} -> {target!r}")
    return from_superop[target](to_superop[source](m))


# -- ProcessRep ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ProcessRep:
    """A linear map on d x d matrices carried in all three representations."""

    dim: int
    basis: OperatorBasis
    chi: np.ndarray = field(repr=False)
    choi: np.ndarray = field(repr=False)
    superop: np.ndarray = field(repr=False)

    @classmethod
    def from_superop(cls, s, basis: OperatorBasis | str | None = None) -> "ProcessRep":
        s = np.array(as_matrix(s))
        d = int(round(np.sqrt(s.shape[0])))
        if s.shape != (d * d, d * d) or d not in (2, 4):
            raise ShapeError(f"unsupported superoperator shape {s.shape}")
        if basis is None:
            basis = default_basis(d)
        elif isinstance(basis, str):
            basis = get_basis(basis)
        if basis.dim != d:
            raise ShapeError(f"basis {basis.label} does not act on dimension {d}")
        choi = superop_to_choi(s)
        chi = choi_to_chi(choi, basis)
        for a in (s, choi, chi):
            a.setflags(write=False)
        return cls(d, basis, chi, choi, s)

    @classmethod
    def from_chi(cls, chi, basis: OperatorBasis | str | None = None) -> "ProcessRep":
        chi = as_matrix(chi)
        d = int(round(np.sqrt(chi.shape[0])))
        if basis is None:
            basis = default_basis(d)
        elif isinstance(basis, str):
            basis = get_basis(basis)
        if chi.shape != (d * d, d * d) or basis.dim != d:
            raise ShapeError(f"chi of shape {chi.shape} does not match basis {basis.label}")
        return cls.from_superop(chi_to_superop(chi, basis), basis)

    @classmethod
    def from_choi(cls, choi, basis: OperatorBasis | str | None = None) -> "ProcessRep":
        return cls.from_superop(choi_to_superop(as_matrix(choi)), basis)

    @classmethod
    def from_kraus(cls, kraus, basis: OperatorBasis | str | None = None) -> "ProcessRep":
        s = sum(np.kron(k, k.conj()) for k in map(as_matrix, kraus))
        return cls.from_superop(s, basis)

    def in_basis(self, basis: OperatorBasis | str) -> "ProcessRep":
        return ProcessRep.from_superop(self.superop, basis)

    def is_trace_preserving(self, tol: float = 1e-9) -> bool:
        d = self.dim
        # tr L(X) = tr X  <=>  vec(I)^T S = vec(I)^T
        row = np.eye(d).reshape(-1) @ self.superop
        return bool(np.max(np.abs(row - np.eye(d).reshape(-1))) <= tol)

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "basis_label": self.basis.label,
            "chi_re": np.real(self.chi).tolist(),
            "chi_im": np.imag(self.chi).tolist(),
        }

    @classmethod
    def from_json(cls, doc: dict | str) -> "ProcessRep":
        if isinstance(doc, str):
            doc = json.loads(doc)
        chi = np.asarray(doc["chi_re"], dtype=float) + 1j * np.asarray(doc["chi_im"], dtype=float)
        rep = cls.from_chi(chi, doc["basis_label"])
        if rep.dim != int(doc["dim"]):
            raise ShapeError(f"declared dim {doc['dim']} does not match chi shape {chi.shape}")
        return rep


def identity_process(dim: int, basis: OperatorBasis | str | None = None) -> ProcessRep:
    return ProcessRep.from_superop(np.eye(dim * dim, dtype=complex), basis)


def unitary_process(u, basis: OperatorBasis | str | None = None) -> ProcessRep:
    return ProcessRep.from_kraus([as_matrix(u)], basis)


def _vec(rho: np.ndarray) -> np.ndarray:
    return rho.reshape(-1)


def apply(p: ProcessRep, rho) -> np.ndarray:
    """Image of ``rho`` under the map (computed from the superoperator)."""
    r = as_matrix(rho)
    if r.shape != (p.dim, p.dim):
        raise ShapeError(f"state of shape {r.shape} does not match process dimension {p.dim}")
    return (p.superop @ _vec(r)).reshape(p.dim, p.dim)


def apply_chi_sum(p: ProcessRep, rho) -> np.ndarray:
    """Direct evaluation of ``w * sum_mn chi_mn B_m rho B_n^H``."""
    r = as_matrix(rho)
    if r.shape != (p.dim, p.dim):
        raise ShapeError(f"state of shape {r.shape} does not match process dimension {p.dim}")
    els = p.basis.elements
    out = np.zeros_like(r)
    for m, bm in enumerate(els):
        left = bm @ r
        for n, bn in enumerate(els):
            if p.chi[m, n] != 0:
                out += p.chi[m, n] * (left @ bn.conj().T)
    return p.basis.weight * out


def choi_apply(choi, rho) -> np.ndarray:
    """``tr_in[(rho.T (x) I) J]`` for an input-first Choi matrix ``J``."""
    j = as_matrix(choi)
    r = as_matrix(rho)
    d = r.shape[0]
    if j.shape != (d * d, d * d):
        raise ShapeError(f"Choi matrix {j.shape} does not act on {r.shape} states")
    return np.einsum("ij,iajb->ab", r, j.reshape(d, d, d, d))


def compose(p2: ProcessRep, p1: ProcessRep) -> ProcessRep:
    """The map ``p2 o p1`` (``p1`` acts first)."""
    if p2.dim != p1.dim:
        raise ShapeError(f"dimension mismatch: {p2.dim} vs {p1.dim}")
    return ProcessRep.from_superop(p2.superop @ p1.superop, p2.basis)


def mix(processes, weights) -> ProcessRep:
    weights = np.asarray(weights, dtype=float)
    if len(processes) != len(weights):
        raise ValueError("one weight per process is required")
    s = sum(w * p.superop for w, p in zip(weights, processes))
    return ProcessRep.from_superop(s, processes[0].basis)


def _hermitize_if_close(a: np.ndarray, rel: float = 1e-8) -> np.ndarray:
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.conj().T)) <= rel * scale:
        return 0.5 * (a + a.conj().T)
    return a


def intermediate(p_t2: ProcessRep, p_t1: ProcessRep, tol: ToleranceProfile = DEFAULT_TOL) -> ProcessRep:
    """The unique linear map ``L`` with ``p_t2 == L o p_t1``.

    The product is formed as ``S_t2 @ inv(S_t1)`` on superoperators; matrix
    products of chi matrices do not compose maps in general.

    Raises
    ------
    NonInvertibleSubprocess
        When ``S_t1`` exceeds the condition bound of ``tol``.
    """
    if p_t2.dim != p_t1.dim:
        raise ShapeError(f"dimension mismatch: {p_t2.dim} vs {p_t1.dim}")
    s = p_t2.superop @ inverse(p_t1.superop, tol)
    rep = ProcessRep.from_superop(s, p_t2.basis)
    # Hermiticity-preserving inputs give a Hermiticity-preserving L; drop round-off.
    choi = _hermitize_if_close(rep.choi)
    return ProcessRep.from_choi(choi, p_t2.basis)


@dataclass(frozen=True)
class CpReport:
    is_cp: bool
    min_eigenvalue: float
    negative_sum: float


def cp_report(p: ProcessRep, tol: float = DEFAULT_TOL.cp) -> CpReport:
    """Complete-positivity verdict from the eigenvalues of ``chi``.

    ``negative_sum`` adds the magnitudes of eigenvalues below ``-tol``.
    """
    w = eigvals_hermitian(check_hermitian(p.chi, 1e-10))
    neg = w[w < -tol]
    lmin = float(w[-1])
    return CpReport(is_cp=lmin >= -tol, min_eigenvalue=lmin, negative_sum=float(np.sum(np.abs(neg))))


def tp_residual(p: ProcessRep) -> float:
    """max |w sum_mn chi_mn B_n^H B_m - I|."""
    els = p.basis.elements
    acc = sum(p.chi[m, n] * (els[n].conj().T @ els[m]) for m in range(len(els)) for n in range(len(els)))
    return float(np.max(np.abs(p.basis.weight * acc - np.eye(p.dim))))


# -- random maps for tests and property checks ------------------------------


def random_cptp(dim: int, rng: np.random.Generator, kraus_rank: int | None = None) -> ProcessRep:
    """Haar-like random channel from a random Stinespring isometry."""
    k = kraus_rank or dim * dim
    g = rng.normal(size=(dim * k, dim)) + 1j * rng.normal(size=(dim * k, dim))
    q, _ = np.linalg.qr(g)
    kraus = [q[i * dim:(i + 1) * dim, :] for i in range(k)]
    return ProcessRep.from_kraus(kraus)


def random_unital(dim: int, rng: np.random.Generator, terms: int = 3) -> ProcessRep:
    """Random mixture of unitary conjugations."""
    from .matcore import random_unitary

    p = rng.dirichlet(np.ones(terms))
    return ProcessRep.from_kraus([np.sqrt(pi) * random_unitary(dim, rng) for pi in p])


def random_intermediate(dim: int, rng: np.random.Generator, strength: float = 0.6) -> ProcessRep:
    """Intermediate map between two random channels ``E2 = L o E1``.

    ``E1`` mixes the identity with a random channel so that it stays
    invertible; the resulting ``L`` is trace preserving and often non-CP.
    """
    e1 = mix([identity_process(dim), random_cptp(dim, rng)], [1 - strength, strength])
    e2 = random_cptp(dim, rng)
    lam = mix([e2, e1], [0.5, 0.5])
    return intermediate(lam, e1)
