import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

import oracles as orc
from qdrepeater import sources as so
from qdrepeater import states as st
from qdrepeater import tomography as tm
from qdrepeater.optics import DetectorModel
from qdrepeater.states import BellKind

PAULI = {
    "I": np.eye(2),
    "X": np.array([[0, 1], [1, 0]]),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1.0, -1.0]),
}
PHI = st.bell_state(BellKind.PHI_PLUS)
ORACLE_NAME = {
    BellKind.PHI_PLUS: "PhiPlus",
    BellKind.PHI_MINUS: "PhiMinus",
    BellKind.PSI_PLUS: "PsiPlus",
    BellKind.PSI_MINUS: "PsiMinus",
}


def oracle_correlators(m):
    return np.array([[np.real(np.trace(m @ orc.reg_op(PAULI[a], PAULI[b]))) for b in "IXYZ"] for a in "IXYZ"])


def counts_for(rho, shots, seed, det=None):
    return tm.simulate_counts(rho, tm.FULL_SETTINGS, shots, det, np.random.default_rng(seed))


# --- forward model ------------------------------------------------------------------------


def test_bell_state_outcomes():
    p = tm.outcome_probabilities(PHI.density(), tm.FULL_SETTINGS)
    labels = [s.label for s in tm.FULL_SETTINGS]
    assert np.allclose(p[labels.index("ZZ")], [[0.5, 0], [0, 0.5]])
    assert np.allclose(p[labels.index("XX")], [[0.5, 0], [0, 0.5]])
    assert np.allclose(p[labels.index("YY")], [[0, 0.5], [0.5, 0]])
    assert np.allclose(p[labels.index("ZX")], 0.25)


@given(hst.integers(0, 2**32 - 1))
def test_exact_correlators_match_oracle(seed):
    r = st.random_density(2, np.random.default_rng(seed))
    assert np.allclose(tm.exact_correlators(r), oracle_correlators(r.matrix), atol=1e-12)


def test_background_mixes_toward_uniform():
    rho = PHI.density()
    c = tm.expected_counts(rho, tm.FULL_SETTINGS, 1000.0, DetectorModel(dark_count_prob=0.2))
    zz = c.counts[0] / 1000
    assert np.allclose(zz, 0.8 * np.diag([0.5, 0.5]) + 0.2 / 4)


def test_counts_table_validation():
    with pytest.raises(ValueError):
        tm.CountsTable(tm.FULL_SETTINGS, np.zeros((3, 2, 2)))
    with pytest.raises(ValueError):
        tm.CountsTable(tm.FULL_SETTINGS[:1], -np.ones((1, 2, 2)))
    with pytest.raises(ValueError):
        tm.BasisSetting.parse("ZQ")


def test_counts_csv_round_trip(rng):
    c = counts_for(st.random_density(2, rng), 500, 3)
    text = c.to_csv()
    assert text.splitlines()[0] == "setting_a,setting_b,outcome_a,outcome_b,count"
    assert tm.CountsTable.from_csv(text) == c


def test_conditional_probabilities():
    c = tm.CountsTable(tm.FULL_SETTINGS[:1], np.array([[[30, 0], [10, 0]]]))
    t = tm.conditional_probabilities(c)["ZZ"]
    assert t[0].tolist() == [0.75, 0.25]
    assert np.isnan(t[1]).all()
    over = tm.conditional_probabilities(c, np.array([[20, 0]]))["ZZ"]
    assert over[0, 0] == 1.5


# --- reconstruction ------------------------------------------------------------------------------


@settings(max_examples=100)
@given(hst.integers(0, 2**32 - 1))
def test_direct_inversion_round_trip(seed):
    r = st.random_density(2, np.random.default_rng(seed))
    est = tm.direct_reconstruction(tm.exact_correlators(r))
    assert np.allclose(est.rho.matrix, r.matrix, atol=1e-12)
    c = tm.expected_counts(r, tm.FULL_SETTINGS, 1.0)
    assert np.allclose(tm.correlators_from_counts(c), tm.exact_correlators(r), atol=1e-12)


def test_direct_inversion_flags_unphysical():
    r = tm.exact_correlators(PHI.density())
    r[3, 3] = 1.4
    out = tm.direct_reconstruction(r)
    assert not out.diagnostics["psd"]
    assert out.diagnostics["min_eigenvalue"] < 0


def test_mle_on_noiseless_counts_recovers_state(rng):
    for _ in range(5):
        r = st.random_density(2, rng)
        r = st.DensityOperator(0.95 * r.matrix + 0.05 * np.eye(4) / 4)
        est = tm.mle_reconstruction(tm.expected_counts(r, tm.FULL_SETTINGS, 1e6))
        assert st.trace_distance(est.rho, r) < 2e-3


def test_mle_bell_state_high_fidelity():
    est = tm.mle_reconstruction(counts_for(PHI.density(), 10_000, 1), PHI)
    assert est.fidelity_to_target >= 0.995
    assert est.is_physical
    assert est.diagnostics["monotone"]
    nll = est.diagnostics["nll_history"]
    assert all(b <= a + 1e-9 * abs(nll[0]) for a, b in zip(nll, nll[1:]))


def test_mle_maximally_mixed():
    mixed = st.DensityOperator.maximally_mixed(2)
    est = tm.mle_reconstruction(counts_for(mixed, 10_000, 2))
    assert st.trace_distance(est.rho, mixed) < 0.02


@given(hst.lists(hst.integers(0, 50), min_size=36, max_size=36))
@settings(max_examples=30)
def test_mle_always_physical(flat):
    c = tm.CountsTable(tm.FULL_SETTINGS, np.array(flat, dtype=float).reshape(9, 2, 2) + np.eye(2))
    est = tm.mle_reconstruction(c)
    assert est.rho.min_eigenvalue() >= -1e-10
    assert est.rho.trace() == pytest.approx(1, abs=1e-10)


def test_mle_handles_adversarial_counts():
    # anti-correlated in every basis: no physical state reproduces this
    block = np.array([[0, 500], [500, 0]])
    c = tm.CountsTable(tm.FULL_SETTINGS, np.array([block] * 9))
    est = tm.mle_reconstruction(c)
    assert est.rho.min_eigenvalue() >= -1e-10
    assert not tm.direct_reconstruction(tm.correlators_from_counts(c)).diagnostics["psd"]


def test_likelihood_gradient(rng):
    c = counts_for(st.random_density(2, rng), 200, 4)
    lik = tm._Likelihood(c)
    x = rng.normal(size=16)
    _, g = lik.value_and_grad(x)
    eps = 1e-6
    num = np.array([(lik.nll(x + eps * e) - lik.nll(x - eps * e)) / (2 * eps) for e in np.eye(16)])
    assert np.allclose(g, num, rtol=1e-5, atol=1e-5 * np.abs(num).max())


def test_parameterization_round_trip(rng):
    r = st.random_density(2, rng)
    assert np.allclose(tm._rho_from_t(tm._t_params(tm._t_from_rho(r.matrix))), r.matrix)


def test_informational_completeness():
    assert tm.check_informationally_complete(tm.FULL_SETTINGS) == 16
    with pytest.raises(ValueError):
        tm.check_informationally_complete(tm.FULL_SETTINGS[:8])
    c = tm.CountsTable(tm.FULL_SETTINGS[:3], np.ones((3, 2, 2)))
    with pytest.raises(ValueError):
        tm.mle_reconstruction(c)


def test_result_json_round_trip(rng):
    est = tm.mle_reconstruction(counts_for(PHI.density(), 500, 5), PHI)
    data = json.loads(json.dumps(est.to_json()))
    assert data["method"] == "mle"
    assert data["fidelity_to_target"] == pytest.approx(est.fidelity_to_target)
    back = st.DensityOperator.from_json(data["matrix"])
    assert np.allclose(back.matrix, est.rho.matrix)


# --- bootstrap -----------------------------------------------------------------------------------


def test_bootstrap_single_resample_and_warning(rng):
    c = counts_for(PHI.density(), 200, 6)
    with pytest.warns(UserWarning):
        res = tm.bootstrap_statistics(c, PHI, 1, rng)
    assert res.fidelities.size == 1
    assert math.isnan(res.std)
    with pytest.raises(ValueError):
        tm.bootstrap_statistics(c, PHI, 0, rng)


def test_bootstrap_deterministic_and_worker_independent():
    c = counts_for(tm.EXPERIMENT_LIKE_PRESET.source(), 150, 7)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = tm.bootstrap_statistics(c, so.ideal_spin_photon_pure(), 20, np.random.default_rng(1))
        b = tm.bootstrap_statistics(c, so.ideal_spin_photon_pure(), 20, np.random.default_rng(1), workers=2)
    assert np.array_equal(a.fidelities, b.fidelities)


def test_bootstrap_spread_scales_as_inverse_root_shots():
    rho = st.werner_state(0.8)
    stds = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for shots in (200, 3200):
            c = tm.expected_counts(rho, tm.FULL_SETTINGS, shots)
            c = tm.CountsTable(c.settings, np.round(c.counts))
            stds[shots] = tm.bootstrap_statistics(c, PHI, 60, np.random.default_rng(0)).std
    ratio = stds[200] / stds[3200]
    assert 4 * 0.75 < ratio < 4 * 1.25


def test_bootstrap_histogram_csv():
    res = tm.BootstrapResult(np.array([0.9, 0.91, 0.95, 1.0]), 0.93, bins=4)
    lines = res.histogram_csv().splitlines()
    assert lines[0] == "bin_low,bin_high,count"
    assert sum(int(l.split(",")[2]) for l in lines[1:]) == 4
    assert res.summary()["n_resamples"] == 4


# --- fidelity shortcuts --------------------------------------------------------------------------


@settings(max_examples=1000)
@given(hst.integers(0, 2**32 - 1), hst.sampled_from(list(BellKind)))
def test_fidelity_from_correlators(seed, kind):
    r = st.random_density(2, np.random.default_rng(seed))
    c = tm.exact_correlators(r)
    f = tm.fidelity_from_correlators(c[1, 1], c[2, 2], c[3, 3], kind)
    assert f == pytest.approx(np.real(orc.bell(ORACLE_NAME[kind]).conj() @ r.matrix @ orc.bell(ORACLE_NAME[kind])), abs=1e-12)


def test_spin_photon_pairings():
    target = so.ideal_spin_photon_pure()
    assert tm.correlated_pairing(target, "Z", "Z") == (0, 1)
    assert tm.correlated_pairing(target, "X", "Y") == (1, 0)


@settings(max_examples=1000)
@given(hst.integers(0, 2**32 - 1), hst.integers(1, 4))
def test_two_basis_bound_is_sound(seed, rank):
    r = st.random_density(2, np.random.default_rng(seed), rank=rank)
    f = st.fidelity_pure_target(r, so.ideal_spin_photon_pure())
    assert tm.spin_photon_two_basis_bound(r) <= f + 1e-12


def test_two_basis_bound_on_ideal_and_mixed():
    assert tm.spin_photon_two_basis_bound(so.ideal_spin_photon_state()) >= 0.99
    assert tm.spin_photon_two_basis_bound(st.DensityOperator.maximally_mixed(2)) <= 0.5
    assert tm.spin_photon_two_basis_bound(st.classical_mixture()) <= 0.5


def test_two_basis_bound_validation():
    with pytest.raises(ValueError):
        tm.fidelity_lower_bound_two_bases([[0.9, 0.2], [0.1, 0.9]], np.eye(2))
    with pytest.raises(ValueError):
        tm.fidelity_lower_bound_two_bases(np.full((2, 2), np.nan), np.eye(2))
    assert tm.fidelity_lower_bound_two_bases(np.eye(2), np.eye(2)) == 1.0
    assert tm.fidelity_lower_bound_two_bases(np.full((2, 2), 0.5), np.full((2, 2), 0.5)) == 0.0


def test_presets():
    ideal = tm.IDEAL_PRESET.source()
    assert st.fidelity_pure_target(ideal, so.ideal_spin_photon_pure()) == pytest.approx(1)
    exp = tm.EXPERIMENT_LIKE_PRESET.source()
    assert 0.9 < st.fidelity_pure_target(exp, so.ideal_spin_photon_pure()) < 0.95
