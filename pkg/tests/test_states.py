import numpy as np
import pytest

from nmk.matcore import projector
from nmk.states import (
    KETS_2Q,
    REFERENCE_CLASSES_1Q,
    REFERENCE_CLASSES_2Q,
    product_ket,
    single_qubit_pairs,
    state,
    two_qubit_pairs,
)


def test_catalog_sizes_and_labels():
    assert len(single_qubit_pairs()) == 15
    assert len(two_qubit_pairs()) == 24
    assert two_qubit_pairs()[0].label == "|φ+>, |φ->"
    assert single_qubit_pairs()[0].label == "|H>, |V>"


@pytest.mark.parametrize("cat, classes", [(single_qubit_pairs, REFERENCE_CLASSES_1Q), (two_qubit_pairs, REFERENCE_CLASSES_2Q)])
def test_classes_partition_catalog(cat, classes):
    rows = [(p.a, p.b) for p in cat()]
    members = [m for v in classes.values() for m in v]
    assert sorted(members) == sorted(rows)


def test_s_states():
    s1 = (product_ket("H+") + product_ket("V-")) / np.sqrt(2)
    np.testing.assert_allclose(KETS_2Q["S1"], s1)
    g = np.array([[abs(np.vdot(KETS_2Q[a], KETS_2Q[b])) for b in ("S1", "S2", "S3", "S4")] for a in ("S1", "S2", "S3", "S4")])
    np.testing.assert_allclose(g, np.eye(4), atol=1e-15)


def test_photon_order():
    np.testing.assert_allclose(state("HV"), projector([0, 1, 0, 0]))


@pytest.mark.parametrize("label", ["H", "V", "+", "-", "R", "L", "phi+", "psi-", "S3", "RR", "H-"])
def test_states_valid(label):
    r = state(label)
    assert np.trace(r).real == pytest.approx(1)
    np.testing.assert_allclose(r @ r, r, atol=1e-15)


def test_unknown_state():
    with pytest.raises(KeyError):
        state("Q")
