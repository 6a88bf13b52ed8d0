"""Dense complex linear algebra for small (d <= 16) matrices.

Matrices are plain ``numpy`` complex128 arrays. Hermitian eigenproblems are
solved with a cyclic Jacobi sweep so that the eigenvalue route used for
complete-positivity checks does not share code with the interior-point
solver in :mod:`nmk.sdpcore`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ToleranceProfile",
    "DEFAULT_TOL",
    "ShapeError",
    "NonInvertibleSubprocess",
    "as_matrix",
    "dagger",
    "hermitian_part",
    "is_hermitian",
    "check_hermitian",
    "eig_hermitian",
    "eigvals_hermitian",
    "min_eigenvalue",
    "is_psd",
    "trace_norm",
    "trace_distance",
    "kron",
    "inverse",
    "density_matrix",
    "ket",
    "projector",
    "fidelity_pure",
    "random_hermitian",
    "random_density_matrix",
    "random_unitary",
]


@dataclass(frozen=True)
class ToleranceProfile:
    """Every public numerical tolerance in one place."""

    hermitian: float = 1e-12
    trace: float = 1e-10
    psd: float = 1e-10
    cond_bound: float = 1e12
    inverse_residual: float = 1e-9
    cp: float = 1e-9
    detection: float = 1e-6
    jacobi_offdiag: float = 1e-15
    jacobi_max_sweeps: int = 60


DEFAULT_TOL = ToleranceProfile()


class ShapeError(ValueError):
    """Raised for non-square, mismatched or non-Hermitian inputs."""


class NonInvertibleSubprocess(ArithmeticError):
    """A process (or matrix) is singular or too ill-conditioned to invert."""

    def __init__(self, message: str, condition: float):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-d matrix, got shape {m.shape}")
    return m


def _square(a) -> np.ndarray:
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {m.shape}")
    return m


def dagger(a) -> np.ndarray:
    return as_matrix(a).conj().T


def hermitian_part(a) -> np.ndarray:
    m = _square(a)
    return 0.5 * (m + m.conj().T)


def is_hermitian(a, tol: float = DEFAULT_TOL.hermitian) -> bool:
    m = _square(a)
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= tol)


def check_hermitian(a, tol: float = DEFAULT_TOL.hermitian) -> np.ndarray:
    m = _square(a)
    err = np.max(np.abs(m - m.conj().T), initial=0.0)
    if err > tol:
        raise ShapeError(f"matrix is not Hermitian: max|A - A^H| = {err:.3e} > {tol:.1e}")
    return m


def eig_hermitian(a, tol: ToleranceProfile = DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi rotations.

    Parameters
    ----------
    a : array_like
        Hermitian matrix (checked to ``tol.hermitian``).

    Returns
    -------
    w : ndarray
        Real eigenvalues in descending order.
    v : ndarray
        Unitary matrix whose columns are the matching eigenvectors, so that
        ``a == v @ diag(w) @ v.conj().T``.
    """
    a = np.array(check_hermitian(a, tol.hermitian), dtype=complex)
    a = 0.5 * (a + a.conj().T)
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    scale = max(np.linalg.norm(a), np.finfo(float).tiny)
    offmask = ~np.eye(n, dtype=bool)

    for _ in range(tol.jacobi_max_sweeps):
        if np.linalg.norm(a[offmask]) <= tol.jacobi_offdiag * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag <= 1e-300:
                    continue
                phase = apq / mag
                theta = (a[q, q].real - a[p, p].real) / (2.0 * mag)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # D = diag(1, conj(phase)) makes a_pq real; P is the real Jacobi rotation.
                g = np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]])
                idx = [p, q]
                a[:, idx] = a[:, idx] @ g
                a[idx, :] = g.conj().T @ a[idx, :]
                a[p, q] = a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                v[:, idx] = v[:, idx] @ g

    w = np.real(np.diag(a)).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def eigvals_hermitian(a, tol: ToleranceProfile = DEFAULT_TOL) -> np.ndarray:
    return eig_hermitian(a, tol)[0]


def min_eigenvalue(a, tol: ToleranceProfile = DEFAULT_TOL) -> float:
    return float(eigvals_hermitian(a, tol)[-1])


def is_psd(a, tol: float = DEFAULT_TOL.psd) -> bool:
    return min_eigenvalue(a) >= -tol


def trace_norm(a) -> float:
    """Sum of singular values; Hermitian input goes through the Jacobi solver."""
    m = _square(a)
    if is_hermitian(m, tol=1e-10 * max(1.0, float(np.max(np.abs(m), initial=0.0)))):
        return float(np.sum(np.abs(eigvals_hermitian(hermitian_part(m)))))
    gram = hermitian_part(m.conj().T @ m)
    return float(np.sum(np.sqrt(np.clip(eigvals_hermitian(gram), 0.0, None))))


def trace_distance(rho1, rho2) -> float:
    """Half the trace norm of ``rho1 - rho2``."""
    r1, r2 = _square(rho1), _square(rho2)
    if r1.shape != r2.shape:
        raise ShapeError(f"dimension mismatch: {r1.shape} vs {r2.shape}")
    return 0.5 * trace_norm(r1 - r2)


def kron(a, b) -> np.ndarray:
    return np.kron(as_matrix(a), as_matrix(b))


def inverse(a, tol: ToleranceProfile = DEFAULT_TOL) -> np.ndarray:
    """Matrix inverse guarded by a condition-number bound.

    Raises
    ------
    NonInvertibleSubprocess
        If the 2-norm condition estimate exceeds ``tol.cond_bound`` or the
        computed inverse misses ``A @ inv(A) == I`` by more than
        ``tol.inverse_residual``.
    """
    m = _square(a)
    sv = np.linalg.svd(m, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    if not cond <= tol.cond_bound:
        raise NonInvertibleSubprocess("matrix is singular or ill-conditioned", cond)
    inv = np.linalg.inv(m)
    resid = float(np.max(np.abs(m @ inv - np.eye(m.shape[0]))))
    if resid > tol.inverse_residual:
        raise NonInvertibleSubprocess(f"inverse residual {resid:.3e} too large", cond)
    return inv


def density_matrix(a, tol: ToleranceProfile = DEFAULT_TOL) -> np.ndarray:
    """Validate ``a`` as a 1- or 2-qubit state and return it as an array."""
    m = check_hermitian(a, max(tol.hermitian, 1e-10))
    if m.shape[0] not in (2, 4):
        raise ShapeError(f"density matrices must be 2x2 or 4x4, got {m.shape}")
    tr = np.trace(m)
    if abs(tr - 1.0) > tol.trace:
        raise ShapeError(f"trace {tr.real:.12g} differs from 1")
    lmin = min_eigenvalue(m, tol)
    if lmin < -tol.psd:
        raise ShapeError(f"minimum eigenvalue {lmin:.3e} is negative")
    return hermitian_part(m)


def ket(*amplitudes) -> np.ndarray:
    v = np.asarray(amplitudes, dtype=complex).ravel()
    return v / np.linalg.norm(v)


def projector(psi) -> np.ndarray:
    v = np.asarray(psi, dtype=complex).ravel()
    return np.outer(v, v.conj())


def fidelity_pure(psi, rho) -> float:
    v = np.asarray(psi, dtype=complex).ravel()
    return float(np.real(v.conj() @ as_matrix(rho) @ v))


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return 0.5 * (g + g.conj().T)


def random_density_matrix(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    k = d if rank is None else rank
    g = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))
