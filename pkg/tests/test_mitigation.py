import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdmet.errors import CalibrationError, EmptyFilterError, InversionError
from qdmet.mitigation import (
    PMSV_SKIPPED,
    ConfusionMatrix,
    calibrate_spam,
    joint_deviation,
    mitigate_spam,
    mitigated_energy,
    pmsv_filter,
    spam_covariance,
)
from qdmet.qsim import NoiseModel, ShotTable, Statevector, group_qubitwise, jordan_wigner, sample_shots
from qdmet.qsim.measure import outcome_distribution
from qdmet.qsim.statevector import expectation

bitstrings4 = st.dictionaries(st.text("01", min_size=4, max_size=4), st.integers(1, 50),
                              min_size=1, max_size=16)


def table(outcomes, basis="ZZZZ"):
    return ShotTable(dict(sorted(outcomes.items())), sum(outcomes.values()), basis)


@pytest.fixture(scope="module")
def h2_ground(h2_system):
    _, _, loc = h2_system
    H = jordan_wigner(loc.h_lo, loc.eri_lo, loc.E_nuc)
    w, U = np.linalg.eigh(H.to_dense())
    return H, Statevector(U[:, 0], 4), group_qubitwise(H)


# ---------------------------------------------------------------- SPAM

def test_noiseless_calibration_is_identity():
    cal = calibrate_spam(None, 3, 2000, seed=0)
    assert np.allclose(cal.matrices, np.eye(2))
    assert cal.n_calibration_shots == 2000


def test_known_flip_recovered_within_three_sigma():
    n_shots = 10**4
    p = 0.02
    cal = calibrate_spam(NoiseModel.readout_only(4, p), 4, n_shots, seed=4)
    sigma = np.sqrt(p * (1 - p) / n_shots)
    off = np.concatenate([cal.matrices[:, 1, 0], cal.matrices[:, 0, 1]])
    assert np.all(np.abs(off - p) <= 3 * sigma)
    assert np.all((cal.matrices >= 0) & (cal.matrices <= 1))
    assert np.allclose(cal.matrices.sum(axis=1), 1.0)


def test_calibration_guards():
    with pytest.raises(CalibrationError):
        calibrate_spam(None, 2, 10, seed=0)
    with pytest.raises(InversionError):
        ConfusionMatrix.from_flips([(0.5, 0.5)]).inverses()


def test_identity_calibration_leaves_distribution_unchanged():
    t = table({"0011": 30, "0101": 10, "1111": 2})
    md = mitigate_spam(t, ConfusionMatrix.identity(4))
    assert md.as_dict() == pytest.approx({k: v / 42 for k, v in t.outcomes.items()})
    assert md.clipped_mass == 0.0


def test_tensor_inverse_matches_full_matrix():
    cal = ConfusionMatrix.from_flips([(0.02, 0.05), (0.1, 0.01), (0.03, 0.03)])
    full = np.array([[1.0]])
    for A in cal.matrices[::-1]:
        full = np.kron(full, A)
    v = np.random.default_rng(0).dirichlet(np.ones(8))
    assert np.allclose(cal.apply(v), full @ v)
    assert np.allclose(cal.apply(cal.apply(v), inverse=True), v)


def test_clipping_renormalizes_and_records_mass():
    cal = ConfusionMatrix.from_flips([(0.2, 0.2)])
    md = mitigate_spam(ShotTable({"0": 100}, 100, "Z"), cal)
    assert md.quasi_probabilities[1] < 0
    assert md.clipped_mass == pytest.approx(-md.quasi_probabilities[1])
    assert md.probabilities.sum() == pytest.approx(1.0)
    assert np.all(md.probabilities >= 0)


def test_spam_recovery_of_known_confusion(h2_ground):
    _, state, groups = h2_ground
    cal = ConfusionMatrix.from_flips([(0.02, 0.02)] * 4)
    noise = NoiseModel.readout_only(4, 0.02)
    rng = np.random.default_rng(99)
    for g in groups:
        truth = outcome_distribution(state, g)
        t = sample_shots(state, g, 10**4, noise, rng)
        stat, dof = joint_deviation(mitigate_spam(t, cal).quasi_probabilities, truth, cal, 10**4)
        assert stat < 34.7 and dof == 15  # 3-sigma quantile of chi-square(15)
        cov = spam_covariance(cal.apply(truth), cal, 10**4)
        assert np.allclose(cov, cov.T) and np.all(np.diag(cov) >= -1e-15)


def test_spam_moves_energy_towards_ideal(h2_ground):
    H, state, groups = h2_ground
    ideal = expectation(state, H)
    noise = NoiseModel.readout_only(4, 0.03, 0.05)
    cal = ConfusionMatrix.from_flips([(0.03, 0.05)] * 4)
    for seed in range(4):
        rng = np.random.default_rng(seed)
        tables = [sample_shots(state, g, 10**4, noise, rng) for g in groups]
        rep = mitigated_energy(H, groups, tables, "spam", cal)
        assert abs(rep.mitigated_energy - ideal) < abs(rep.raw_energy - ideal)
        assert rep.condition_number > 1


# ---------------------------------------------------------------- PMSV

def test_pmsv_weight_examples():
    out = pmsv_filter(table({"0011": 5, "0001": 3, "1010": 2}), 2)
    assert out.outcomes == {"0011": 5, "1010": 2} and out.n_shots == 7
    with pytest.raises(EmptyFilterError):
        pmsv_filter(table({"0001": 4}), 2)


def test_pmsv_passes_non_number_groups_through(h2_ground):
    _, _, groups = h2_ground
    g = next(g for g in groups if not g.is_diagonal)
    t = table({"0001": 4, "0011": 4}, g.basis)
    out = pmsv_filter(t, 2, g)
    assert out.outcomes == t.outcomes and PMSV_SKIPPED in out.flags


@settings(max_examples=100, deadline=None)
@given(outcomes=bitstrings4, n_el=st.integers(0, 4))
def test_pmsv_idempotent_and_sound(outcomes, n_el):
    t = table(outcomes)
    try:
        once = pmsv_filter(t, n_el)
    except EmptyFilterError:
        assert all(b.count("1") != n_el for b in outcomes)
        return
    assert pmsv_filter(once, n_el) == once
    assert all(b.count("1") == n_el for b in once.outcomes)
    assert once.n_shots <= t.n_shots


def test_pmsv_retention_first_order_flip_model():
    p = 0.01
    n_shots = 10**5
    state = Statevector.basis_state(4, "1100")
    t = sample_shots(state, [()], n_shots, NoiseModel.readout_only(4, p), 3)
    kept = pmsv_filter(t, 2).n_shots / n_shots
    expected = (1 - p) ** 4 + 4 * p**2 * (1 - p) ** 2  # no flip, or one compensating pair
    sigma = np.sqrt(expected * (1 - expected) / n_shots)
    assert abs(kept - expected) <= 3 * sigma
    # first order in p: product of per-bit survival probabilities
    assert abs(kept - (1 - 4 * p)) <= 10 * p**2 + 3 * sigma


def test_pmsv_noiseless_keeps_everything(h2_ground):
    _, state, groups = h2_ground
    z = next(g for g in groups if g.is_diagonal)
    t = sample_shots(state, z, 5000, None, 1)
    assert pmsv_filter(t, 2, z).n_shots == 5000


def test_report_bookkeeping(h2_ground):
    H, state, groups = h2_ground
    noise = NoiseModel.readout_only(4, 0.02)
    tables = [sample_shots(state, g, 2000, noise, 7 + i) for i, g in enumerate(groups)]
    raw = mitigated_energy(H, groups, tables, "none")
    pm = mitigated_energy(H, groups, tables, "pmsv", n_elec_active=2)
    assert raw.raw_energy == pm.raw_energy == raw.mitigated_energy
    assert pm.shots_kept <= pm.filtered_shots <= pm.total_shots
    assert PMSV_SKIPPED in pm.flags
