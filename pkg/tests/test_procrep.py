import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nmk.dephasing import chi_single
from nmk.matcore import NonInvertibleSubprocess, ShapeError, eigvals_hermitian, projector
from nmk.procrep import (
    I2,
    X,
    Y,
    Z,
    ProcessRep,
    apply,
    apply_chi_sum,
    choi_apply,
    compose,
    convert,
    cp_report,
    get_basis,
    identity_process,
    intermediate,
    mix,
    random_cptp,
    random_intermediate,
    tp_residual,
    unitary_process,
)

PLUS = projector(np.array([1, 1]) / np.sqrt(2))


def test_single_qubit_basis_elements():
    b = get_basis("SingleQubitM")
    for got, want in zip(b.elements, [I2, X, -1j * Y, Z]):
        np.testing.assert_array_equal(got, want)


def test_two_qubit_basis_index_rule():
    b = get_basis("TwoQubitE")
    for h in range(2):
        for r in range(2):
            for l in range(2):
                for s in range(2):
                    m = s + 2 * r + 4 * l + 8 * h
                    e = np.kron(np.outer(np.eye(2)[h], np.eye(2)[r]), np.outer(np.eye(2)[l], np.eye(2)[s]))
                    np.testing.assert_array_equal(b.elements[m], e)


@pytest.mark.parametrize("label", ["SingleQubitM", "TwoQubitE", "SingleQubitE"])
def test_basis_orthogonal(label):
    els = get_basis(label).elements
    g = np.array([[np.trace(a.conj().T @ b) for b in els] for a in els])
    assert np.max(np.abs(g - np.diag(np.diag(g)))) == 0


def test_apply_examples():
    np.testing.assert_allclose(apply(identity_process(2), PLUS), PLUS)
    np.testing.assert_allclose(apply(chi_single(0.0), PLUS), I2 / 2, atol=1e-15)
    np.testing.assert_allclose(apply(chi_single(0.5), PLUS), [[0.5, 0.25], [0.25, 0.5]], atol=1e-15)


def test_apply_dimension_mismatch():
    with pytest.raises(ShapeError):
        apply(identity_process(2), np.eye(4) / 4)


def test_apply_matches_chi_sum(rng):
    for d in (2, 4):
        p = random_cptp(d, rng)
        rho = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        np.testing.assert_allclose(apply(p, rho), apply_chi_sum(p, rho), atol=1e-12)
        np.testing.assert_allclose(apply(p, rho), choi_apply(p.choi, rho), atol=1e-12)


def test_compose_examples():
    p = chi_single(0.3 + 0.2j)
    assert np.allclose(compose(identity_process(2), p).superop, p.superop)
    np.testing.assert_allclose(compose(chi_single(0.5), chi_single(0.8)).chi, chi_single(0.4).chi, atol=1e-15)
    zz = compose(unitary_process(Z), unitary_process(Z))
    np.testing.assert_allclose(zz.superop, np.eye(4), atol=1e-15)


def test_compose_is_superop_product(rng):
    a, b = random_cptp(4, rng), random_cptp(4, rng)
    np.testing.assert_array_equal(compose(a, b).superop, a.superop @ b.superop)


def test_intermediate_examples():
    p = chi_single(0.4)
    np.testing.assert_allclose(intermediate(p, p).superop, np.eye(4), atol=1e-12)
    lam = intermediate(chi_single(0.6), chi_single(0.4))
    w = eigvals_hermitian(lam.chi)
    np.testing.assert_allclose(w, [1.25, 0, 0, -0.25], atol=1e-12)
    rep = cp_report(lam)
    assert not rep.is_cp
    assert rep.negative_sum == pytest.approx(0.25, abs=1e-12)
    assert cp_report(intermediate(chi_single(0.4), chi_single(0.8))).is_cp


def test_intermediate_non_invertible():
    with pytest.raises(NonInvertibleSubprocess):
        intermediate(chi_single(0.3), chi_single(0.0))


def test_intermediate_reconstruction_random(rng):
    for _ in range(100):
        d = int(rng.choice([2, 4]))
        e1 = mix([identity_process(d), random_cptp(d, rng)], [0.5, 0.5])
        e2 = random_cptp(d, rng)
        lam = intermediate(e2, e1)
        assert np.max(np.abs(e2.superop - lam.superop @ e1.superop)) <= 1e-9
        assert lam.is_trace_preserving()


def test_chi_products_differ_from_composition(rng):
    # The diagonal dephasing family is the exception where they agree.
    a, b = chi_single(0.7), chi_single(0.2j)
    assert np.allclose(compose(a, b).chi, chi_single(0.7 * 0.2j).chi)
    p, q = random_cptp(2, rng), random_cptp(2, rng)
    assert not np.allclose(compose(p, q).chi, p.chi @ q.chi)


def test_convert_examples(rng):
    chi = convert(np.eye(4), "superop", "chi", "SingleQubitM")
    np.testing.assert_allclose(chi, np.diag([1, 0, 0, 0]), atol=1e-15)
    np.testing.assert_allclose(chi_single(1.0).superop, np.eye(4), atol=1e-15)
    for d in (2, 4):
        p = random_cptp(d, rng)
        assert np.trace(p.choi).real / d == pytest.approx(1.0, abs=1e-12)
        assert np.trace(p.chi).real == pytest.approx(1.0, abs=1e-12)


@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 4]))
def test_round_trips(seed, d):
    rng = np.random.default_rng(seed)
    p = random_intermediate(d, rng)
    back = ProcessRep.from_chi(p.chi, p.basis)
    assert np.max(np.abs(back.superop - p.superop)) <= 1e-10
    back = ProcessRep.from_choi(p.choi, p.basis)
    assert np.max(np.abs(back.chi - p.chi)) <= 1e-10


@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 4]))
def test_tp_identity_and_sign_agreement(seed, d):
    rng = np.random.default_rng(seed)
    p = random_intermediate(d, rng)
    assert tp_residual(p) <= 1e-9
    wc = eigvals_hermitian(p.chi)
    wj = eigvals_hermitian(p.choi)
    # same spectrum up to the positive factor d * weight
    assert (wc[-1] < -1e-9) == (wj[-1] < -1e-9)


@given(st.complex_numbers(max_magnitude=3.0, allow_nan=False, allow_infinity=False))
def test_dephasing_family_negative_sum(k):
    if abs(k) <= 1:
        assert cp_report(chi_single(k)).is_cp
    # ratio maps of the same shape may exceed |kappa| = 1
    chi = np.zeros((4, 4), dtype=complex)
    kc = np.conj(k)
    chi[0, 0], chi[0, 3], chi[3, 0], chi[3, 3] = (2 + k + kc) / 4, (k - kc) / 4, (kc - k) / 4, (2 - k - kc) / 4
    rep = cp_report(ProcessRep.from_chi(chi, "SingleQubitM"))
    assert rep.negative_sum == pytest.approx(max(0.0, (abs(k) - 1) / 2), abs=1e-10)


def test_cp_report_identity():
    rep = cp_report(identity_process(4))
    assert rep.is_cp and rep.negative_sum == 0


def test_json_round_trip(rng):
    p = random_intermediate(4, rng)
    doc = json.loads(json.dumps(p.to_json()))
    assert set(doc) == {"dim", "basis_label", "chi_re", "chi_im"}
    q = ProcessRep.from_json(doc)
    np.testing.assert_allclose(q.superop, p.superop, atol=1e-12)
    doc["dim"] = 2
    with pytest.raises(ShapeError):
        ProcessRep.from_json(doc)


def test_basis_change_preserves_map(rng):
    p = random_cptp(2, rng)
    q = p.in_basis("SingleQubitE")
    np.testing.assert_allclose(q.superop, p.superop, atol=1e-14)
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(q.chi)), np.sort(np.linalg.eigvalsh(p.chi)), atol=1e-12)
