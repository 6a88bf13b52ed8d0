import io
import math

import numpy as np
import pytest

from nmk import dephasing as dp
from nmk import measures as ms
from nmk.capability import robustness
from nmk.matcore import NonInvertibleSubprocess
from nmk.procrep import identity_process
from nmk.states import state

PHI_P, PHI_M = state("phi+"), state("phi-")


@pytest.fixture(scope="module")
def gaussian():
    return ms.family_from_model(dp.SINGLE_PRESETS["single_gaussian"])


@pytest.fixture(scope="module")
def two_peak():
    return ms.family_from_model(dp.SINGLE_PRESETS["two_peak"])


@pytest.fixture(scope="module")
def uneven():
    # |kappa| dips to 0.4 near t = 31 and revives, without a zero
    peaks = (dp.SpectrumPeak(0.7, -1.0, 0.2), dp.SpectrumPeak(0.3, 1.0, 0.2))
    return ms.family_from_model(dp.SinglePhotonModel(peaks, 0.05, "uneven"))


def test_family_validation():
    with pytest.raises(ValueError, match="identity"):
        ms.DynamicsFamily(lambda t: dp.chi_single(0.5), 10)
    with pytest.raises(ValueError):
        ms.DynamicsFamily(lambda t: identity_process(2), 10, grid=[0, 5, 5])
    with pytest.raises(ValueError):
        ms.DynamicsFamily(lambda t: identity_process(2), 10, grid=[0, 11])
    f = ms.DynamicsFamily(lambda t: identity_process(2), 10)
    with pytest.raises(ValueError):
        f(12)


def test_n_beta_markovian_zero(gaussian):
    rep = ms.n_beta(gaussian)
    assert rep.value <= 1e-6 and rep.kind is ms.MeasureKind.NBETA


def test_n_beta_revival_positive(uneven):
    rep = ms.n_beta(uneven, 70.0)
    assert rep.value > 0
    assert "converged" in rep.discretization_note
    # one more halving moves the estimate by less than the tolerance
    finer = ms.n_beta(uneven, 70.0, start=2 * rep.grid_size - 1, cap=2 * rep.grid_size - 1)
    assert abs(finer.value - rep.value) <= 1e-3 * rep.value


def test_n_beta_equal_peaks_does_not_settle(two_peak):
    # beta(L(t2, t)) grows like 1/|kappa(t)| near the zero of kappa, so the
    # integral over a window containing it diverges and refinement hits the cap.
    rep = ms.n_beta(two_peak, 70.0, method="spectral")
    assert rep.value > 0
    assert "cap" in rep.discretization_note


def test_n_beta_sdp_matches_spectral(uneven):
    a = ms.n_beta(uneven, 70.0, method="sdp")
    b = ms.n_beta(uneven, 70.0, method="spectral")
    assert a.grid_size == b.grid_size
    assert a.value == pytest.approx(b.value, abs=1e-6 * max(1, b.value))


def test_n_beta_two_photon_ordering():
    g = {n: ms.n_beta(ms.family_from_model(m), method="spectral").value for n, m in dp.PRESETS.items()}
    assert g["cond_I"] > g["cond_IV"] > 0
    for m in dp.PRESETS.values():
        assert ms.n_beta(ms.family_from_model(m, "local"), method="spectral").value <= 1e-6


def test_n_beta_flags_non_invertible_points():
    m = dp.SINGLE_PRESETS["two_peak"]
    zero = math.pi / 2 / m.delta_n  # cos(delta_n * t) = 0
    f = ms.family_from_model(m, t_max=2 * zero)
    rep = ms.n_beta(f, 2 * zero, method="spectral", start=5, cap=5)
    assert zero in rep.excluded
    assert "non-invertible" in rep.discretization_note


def test_n_beta_unknown_method(gaussian):
    with pytest.raises(ValueError):
        ms.n_beta(gaussian, method="magic")


def test_d_trace_examples():
    m = dp.PRESETS["cond_I"]
    f = ms.family_from_model(m)
    d = dict(ms.d_trace_dynamics(f, PHI_P, PHI_M, [0.0, 199.0, 199 + abs(m.K) * 199]))
    assert d[0.0] == pytest.approx(1.0, abs=1e-12)
    assert d[199.0] == pytest.approx(0.4027, abs=1e-4)
    assert d[199 + abs(m.K) * 199] == pytest.approx(0.8659, abs=1e-4)


def test_d_closed_form_examples():
    assert ms.d_closed_form(dp.PRESETS["cond_I"], 0, 0) == 1
    assert ms.d_closed_form(dp.PRESETS["cond_I"], 199, 0) == pytest.approx(math.exp(-0.90949), abs=1e-5)
    m4 = dp.PRESETS["cond_IV"]
    want = math.exp(-m4.y_tilde * 39601 * (1 - m4.K**2))
    assert ms.d_closed_form(m4, 199, abs(m4.K) * 199) == pytest.approx(want, abs=1e-12)
    assert want == pytest.approx(0.366, abs=1e-3)
    with pytest.raises(ValueError):
        ms.d_closed_form(m4, -1, 0)


@pytest.mark.parametrize("name", list(dp.PRESETS))
def test_closed_form_matches_process_route(name):
    m = dp.PRESETS[name]
    f = ms.family_from_model(m)
    for t in np.linspace(0, 398, 23):
        tau = m.schedule(t)
        d = ms.d_trace_dynamics(f, PHI_P, PHI_M, [t])[0][1]
        assert d == pytest.approx(ms.d_closed_form(m, *tau), abs=1e-10)
        assert ms.d_closed_form(m, *tau) == pytest.approx(abs(dp.g_joint(m, *tau)), abs=1e-12)


@pytest.mark.parametrize("name, value", [("cond_I", 0.46), ("cond_II", 0.20), ("cond_III", 0.13), ("cond_IV", 0.01)])
def test_n_blp_two_photon(name, value):
    m = dp.PRESETS[name]
    rep = ms.n_blp(ms.family_from_model(m), PHI_P, PHI_M)
    assert rep.value == pytest.approx(value, abs=0.02 if value > 0.05 else 0.01)
    revival = math.exp(-m.y_tilde * 199**2 * (1 - m.K**2)) - math.exp(-m.y_tilde * 199**2)
    assert rep.value == pytest.approx(revival, abs=1e-3)


def test_n_blp_markovian_zero(gaussian):
    for a, b in (("+", "-"), ("H", "V"), ("R", "+")):
        assert ms.n_blp(gaussian, state(a), state(b)).value <= 1e-12


def test_trace_distance_monotone_when_cp_divisible(gaussian):
    d = [v for _, v in ms.d_trace_dynamics(gaussian, state("+"), state("-"))]
    assert np.all(np.diff(d) <= 1e-12)


def test_pair_search_single_qubit(two_peak, gaussian):
    label, rep = ms.blp_pair_search(two_peak)
    assert label.startswith("theta=1.5708")  # equatorial pair
    assert "lower bound" in rep.discretization_note
    assert ms.blp_pair_search(gaussian)[1].value <= 1e-12


def test_pair_search_two_qubit():
    f = ms.family_from_model(dp.PRESETS["cond_I"])
    label, rep = ms.blp_pair_search(f)
    assert label == "|φ+>, |φ->"
    assert rep.value == pytest.approx(0.46, abs=0.02)


def test_n_rhp(gaussian, two_peak):
    assert ms.n_rhp(gaussian).value <= 1e-6
    rep = ms.n_rhp(two_peak)
    assert rep.value > 0
    m = dp.SINGLE_PRESETS["two_peak"]
    step = float(np.diff(two_peak.grid)[0])
    for t, excess in rep.series:
        k0, k1 = abs(dp.kappa_single(m, t)), abs(dp.kappa_single(m, t + step))
        want = max(1.0, k1 / k0) - 1 if k0 > 0 else None
        if want is not None:
            assert excess == pytest.approx(want, abs=1e-9 * max(1, want))
    with pytest.raises(ValueError):
        ms.n_rhp(two_peak, eps=0)


def test_rhp_and_beta_detect_same_grid(two_peak, gaussian):
    for f in (two_peak, gaussian):
        rhp = ms.n_rhp(f).value > 1e-6
        g = f.grid
        any_beta = False
        for t, tn in zip(g[:-1], g[1:]):
            try:
                any_beta |= robustness(f.intermediate(tn, t)).beta > 1e-6
            except NonInvertibleSubprocess:
                continue
        assert rhp == any_beta


def test_series_csv():
    text = ms.series_to_csv([(0.0, 1.0), (0.5, 0.25)])
    assert text.splitlines() == ["t_lambda0,value", "0.0,1.0", "0.5,0.25"]
    buf = io.StringIO()
    ms.write_series_csv([(1, 2)], buf)
    assert buf.getvalue().startswith("t_lambda0,value\n")


def test_report_record(gaussian):
    rec = ms.n_rhp(gaussian).to_record()
    assert rec["kind"] == "NRhp" and rec["value"] >= 0 and "eps" in rec["discretization_note"]
