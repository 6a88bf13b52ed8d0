import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nmk.capability import robustness_problem
from nmk.dephasing import chi_single
from nmk.matcore import ShapeError, random_density_matrix
from nmk.procrep import intermediate, random_intermediate
from nmk.sdpcore import (
    IDENTITY,
    Constraint,
    SdpProblem,
    SolveStatus,
    SolverOptions,
    Variable,
    coordinate_basis,
    coordinate_count,
    embed,
    from_coordinates,
    solve,
)


def dominate(a, complex_=True):
    """min tr X  s.t.  X >= 0, X >= A."""
    n = a.shape[0]
    return SdpProblem(
        [Variable("X", n, complex_)],
        {"X": np.eye(n)},
        [
            Constraint(n, {"X": IDENTITY}, complex=complex_),
            Constraint(n, {"X": IDENTITY}, -a, complex=complex_),
        ],
    )


def test_commuting_example():
    sol = solve(dominate(np.diag([-1.0, 2.0])))
    assert sol.status is SolveStatus.OPTIMAL
    assert sol.primal_value == pytest.approx(2.0, abs=1e-7)
    np.testing.assert_allclose(sol.values["X"], np.diag([0, 2]), atol=1e-6)


def test_psd_target_example(rng):
    a = random_density_matrix(4, rng) * 3
    sol = solve(dominate(a))
    assert sol.primal_value == pytest.approx(np.trace(a).real, abs=1e-7)


def test_robustness_example():
    lam = intermediate(chi_single(0.6), chi_single(0.4))
    sol = solve(robustness_problem(lam.chi))
    assert sol.optimal
    assert sol.primal_value == pytest.approx(0.25, abs=1e-7)


@pytest.mark.parametrize("complex_", [True, False])
def test_optimal_certificate(rng, complex_):
    g = rng.normal(size=(4, 4)) + (1j * rng.normal(size=(4, 4)) if complex_ else 0)
    a = 0.5 * (g + g.conj().T)
    sol = solve(dominate(a, complex_))
    assert sol.optimal
    assert sol.gap <= 1e-7
    assert sol.min_constraint_eigenvalue >= -1e-8
    w = np.linalg.eigvalsh(a)
    assert sol.primal_value == pytest.approx(w[w > 0].sum(), abs=1e-7)


def test_weak_duality_against_hand_feasible_points(rng):
    for _ in range(10):
        a = 0.5 * (lambda g: g + g.conj().T)(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
        sol = solve(dominate(a))
        # X = |A| and X = (lambda_max)_+ I are feasible
        w, v = np.linalg.eigh(a)
        for x in ((v * np.abs(w)) @ v.conj().T, max(w.max(), 0) * np.eye(4)):
            assert sol.primal_value <= np.trace(x).real + 1e-7
        assert sol.dual_value <= sol.primal_value + 1e-7


@settings(max_examples=12)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 4]))
def test_embedding_self_test(seed, d):
    rng = np.random.default_rng(seed)
    lam = random_intermediate(d, rng)
    p = robustness_problem(lam.chi)
    native = solve(p)
    real = solve(p, SolverOptions(embed_real=True))
    assert native.optimal and real.optimal
    assert abs(native.primal_value - real.primal_value) <= 1e-8


@pytest.mark.parametrize("factor", [0.01, 0.5, 3.0, 100.0])
def test_objective_scaling(rng, factor):
    p = robustness_problem(random_intermediate(2, rng).chi)
    base = solve(p).primal_value
    # the constant -1 scales along with the linear part
    assert solve(p.scaled(factor)).primal_value == pytest.approx(factor * base, abs=1e-9 * max(1, factor))


def test_infeasible_problem_reported():
    p = SdpProblem(
        [Variable("X", 2)],
        {"X": np.eye(2)},
        [Constraint(2, {"X": IDENTITY}), Constraint(2, {"X": lambda x: -x}, -np.eye(2))],
    )
    sol = solve(p)
    assert sol.status is SolveStatus.INFEASIBLE


def test_iteration_cap_reported(rng):
    p = robustness_problem(random_intermediate(4, rng).chi)
    sol = solve(p, SolverOptions(max_iterations=2))
    assert sol.status is SolveStatus.MAX_ITERATIONS
    assert sol.iterations == 2
    assert np.isfinite(sol.primal_residual) and np.isfinite(sol.dual_residual)


def test_deterministic_and_metadata(rng):
    p = robustness_problem(random_intermediate(4, rng).chi)
    a, b = solve(p), solve(p)
    assert a.primal_value == b.primal_value
    np.testing.assert_array_equal(a.values["X"], b.values["X"])
    assert a.options == SolverOptions().metadata()
    assert a.options["max_iterations"] == 200


def test_verbose_log():
    buf = io.StringIO()
    solve(dominate(np.diag([1.0, -1.0])), SolverOptions(verbose=True, log_stream=buf))
    text = buf.getvalue()
    assert "gap" in text and "status Optimal" in text


@pytest.mark.parametrize("complex_, n", [(True, 3), (False, 3), (True, 1)])
def test_coordinates_orthonormal(complex_, n):
    basis = coordinate_basis(n, complex_)
    assert basis.shape[0] == coordinate_count(n, complex_)
    flat = basis.reshape(basis.shape[0], -1)
    gram = np.real(flat.conj() @ flat.T)
    np.testing.assert_allclose(gram, np.eye(basis.shape[0]), atol=1e-14)
    x = np.arange(basis.shape[0], dtype=float)
    m = from_coordinates(x, n, complex_)
    np.testing.assert_allclose(m, m.conj().T)


def test_embed_spectrum(rng):
    g = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    h = g + g.conj().T
    w = np.linalg.eigvalsh(h)
    np.testing.assert_allclose(np.linalg.eigvalsh(embed(h)), np.sort(np.repeat(w, 2)), atol=1e-12)


def test_malformed_problems():
    with pytest.raises(ShapeError):
        solve(SdpProblem([Variable("X", 2)], {"X": np.eye(3)}, [Constraint(2, {"X": IDENTITY})]))
    with pytest.raises(ShapeError):
        solve(SdpProblem([Variable("X", 2)], {"X": np.eye(2)}, [Constraint(2, {"X": lambda x: x[:1, :1]})]))
    with pytest.raises((ShapeError, KeyError)):
        solve(SdpProblem([Variable("X", 2)], {"Y": np.eye(2)}, [Constraint(2, {"X": IDENTITY})]))
