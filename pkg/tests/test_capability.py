import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nmk import dephasing as dp
from nmk.capability import (
    SolverFailure,
    identify,
    negative_eigenvalue_sum,
    robustness,
    witness_one,
    witness_two,
)
from nmk.matcore import ShapeError, random_density_matrix
from nmk.procrep import (
    ProcessRep,
    apply,
    compose,
    cp_report,
    identity_process,
    intermediate,
    mix,
    random_cptp,
    random_intermediate,
    random_unital,
)
from nmk.sdpcore import SolverOptions
from nmk.states import state

RATIO_15 = intermediate(dp.chi_single(0.6), dp.chi_single(0.4))


def test_robustness_examples():
    r = robustness(identity_process(2))
    assert r.beta <= 1e-9 and r.oracle_beta == 0
    r = robustness(RATIO_15)
    assert r.beta == pytest.approx(0.25, abs=1e-7)
    assert r.agreement <= 1e-7
    assert set(r.to_record()) == {"beta", "oracle_beta", "gap"}


def test_robustness_witness_map_is_cp_and_dominates():
    r = robustness(RATIO_15)
    x = r.chi_cp_witness.chi * (1 + r.beta)
    assert np.linalg.eigvalsh(x)[0] >= -1e-7
    assert np.linalg.eigvalsh(x - RATIO_15.chi)[0] >= -1e-7


def test_robustness_rejects_non_tp():
    chi = RATIO_15.chi * 1.1
    with pytest.raises(ShapeError):
        robustness(ProcessRep.from_chi(chi, "SingleQubitM"))


def test_solver_failure_carries_diagnostics(rng):
    with pytest.raises(SolverFailure) as e:
        robustness(random_intermediate(4, rng), SolverOptions(max_iterations=3))
    assert e.value.solution.iterations == 3
    assert "MaxIterations" in str(e.value)


def test_condition_ordering_of_middle_beta():
    betas = [robustness(intermediate(dp.chi_two(m, 199, 199), dp.chi_two(m, 199, 0))).beta for m in dp.PRESETS.values()]
    assert all(b > 1e-4 for b in betas)
    assert betas == sorted(betas, reverse=True) and len(set(betas)) == 4


def test_identify_examples():
    g = dp.single_dynamics(dp.SINGLE_PRESETS["single_gaussian"])
    assert not identify(intermediate(g(60), g(30)))
    tp = dp.single_dynamics(dp.SINGLE_PRESETS["two_peak"])
    assert identify(intermediate(tp(60), tp(40)))
    for m in dp.PRESETS.values():
        loc = dp.local_dynamics(m)
        assert not identify(intermediate(loc(398), loc(199)))


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 4]))
def test_oracle_equivalence(seed, d):
    lam = random_intermediate(d, np.random.default_rng(seed))
    r = robustness(lam)
    assert r.agreement <= 1e-6


# -- measure properties -------------------------------------------------------


def test_mp1_faithfulness(rng):
    for _ in range(50):
        d = int(rng.choice([2, 4]))
        lam = random_intermediate(d, rng, strength=float(rng.uniform(0.05, 0.9)))
        assert (robustness(lam).beta <= 1e-6) == cp_report(lam, tol=1e-6).is_cp


def test_mp2_monotone_under_post_composition(rng):
    for _ in range(50):
        d = int(rng.choice([2, 4]))
        lam = random_intermediate(d, rng)
        cp = random_cptp(d, rng)
        assert robustness(compose(cp, lam)).beta <= robustness(lam).beta + 1e-6


def test_mp2_pre_composition_with_unital_maps(rng):
    # Unital channels commute with the identity Choi marginal, which keeps the
    # trace of the dominating CP map fixed.
    for _ in range(50):
        d = int(rng.choice([2, 4]))
        lam = random_intermediate(d, rng)
        u = random_unital(d, rng)
        assert robustness(compose(lam, u)).beta <= robustness(lam).beta + 1e-6


def test_mp3_convexity(rng):
    for _ in range(50):
        d = int(rng.choice([2, 4]))
        lam = random_intermediate(d, rng)
        n = int(rng.integers(2, 4))
        parts = [compose(random_cptp(d, rng), lam) for _ in range(n)]
        p = rng.dirichlet(np.ones(n))
        lhs = robustness(mix(parts, p)).beta
        rhs = sum(pi * robustness(q).beta for pi, q in zip(p, parts))
        assert lhs <= rhs + 1e-6


# -- witness -------------------------------------------------------------------


def test_witness_hv_is_two():
    tp = dp.single_dynamics(dp.SINGLE_PRESETS["two_peak"])
    e1, e2 = tp(40), tp(60)
    h, v = state("H"), state("V")
    w = witness_two(apply(e1, h), apply(e1, v), apply(e2, h), apply(e2, v))
    assert w.value == pytest.approx(2.0, abs=1e-7) and not w.violated


def test_witness_markovian_ratio_half():
    e1, e2 = dp.chi_single(0.8), dp.chi_single(0.4)
    p, m = state("+"), state("-")
    w = witness_two(apply(e1, p), apply(e1, m), apply(e2, p), apply(e2, m))
    assert w.value == pytest.approx(2.0, abs=1e-7)
    assert set(w.to_record()) == {"value", "threshold", "violated"}


def test_witness_revival_detected():
    e1, e2 = dp.chi_single(0.4), dp.chi_single(0.6)
    p, m = state("+"), state("-")
    w = witness_two(apply(e1, p), apply(e1, m), apply(e2, p), apply(e2, m))
    assert w.violated and w.value > 2.1


def test_witness_one_examples(rng):
    for _ in range(5):
        a, b = random_density_matrix(4, rng), random_density_matrix(4, rng)
        assert witness_one(a, b).value == pytest.approx(1.0, abs=1e-7)
    assert witness_one(state("H"), state("H")).value == pytest.approx(1.0, abs=1e-7)
    m = dp.PRESETS["cond_I"]
    r = state("phi+")
    w = witness_one(apply(dp.chi_two(m, 199, 0), r), apply(dp.chi_two(m, 199, 199), r))
    assert w.value == pytest.approx(1.0, abs=1e-7) and not w.violated


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 4]))
def test_witness_floor_and_symmetry(seed, d):
    rng = np.random.default_rng(seed)
    rs = [random_density_matrix(d, rng, rank=int(rng.integers(1, d + 1))) for _ in range(4)]
    w = witness_two(*rs)
    assert w.value >= 2 - 1e-8
    s = witness_two(rs[1], rs[0], rs[3], rs[2])
    assert abs(w.value - s.value) <= 1e-6
    assert witness_one(rs[0], rs[2]).value >= 1 - 1e-8



@pytest.mark.parametrize("seed", [75569674, 10420])
def test_witness_degenerate_rank_one_inputs(seed):
    # Rank-1 inputs with no strictly complementary solution once broke the NT scaling update.
    rng = np.random.default_rng(seed)
    d = 4 if seed == 75569674 else int(rng.choice([2, 4]))
    rs = [random_density_matrix(d, rng, rank=int(rng.integers(1, d + 1))) for _ in range(4)]
    w = witness_two(rs[1], rs[0], rs[3], rs[2])
    assert w.value == pytest.approx(witness_two(*rs).value, abs=1e-6)
    assert w.value >= 2 - 1e-8


@settings(max_examples=20)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 4]))
def test_witness_soundness_for_cp_intermediate(seed, d):
    rng = np.random.default_rng(seed)
    e1 = random_cptp(d, rng)
    e2 = compose(random_cptp(d, rng), e1)
    a, b = random_density_matrix(d, rng), random_density_matrix(d, rng)
    w = witness_two(apply(e1, a), apply(e1, b), apply(e2, a), apply(e2, b))
    assert w.value == pytest.approx(2.0, abs=1e-7)


def test_witness_dimension_mismatch():
    with pytest.raises(ShapeError):
        witness_two(state("H"), state("V"), state("HH"), state("VV"))


def test_negative_eigenvalue_sum_oracle():
    assert negative_eigenvalue_sum(np.diag([1.25, -0.25, 0, 0])) == 0.25
    assert negative_eigenvalue_sum(np.eye(2)) == 0.0
