import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from qdmet.dmet import FragmentSpec, build_embedding_hamiltonian, schmidt_bath, solve_fragment
from qdmet.errors import ContractError
from qdmet.mf import run_fci, transform_eri
from qdmet.qsim import Statevector, apply_circuit, estimator_variance, expectation, jordan_wigner
from qdmet.qsim.jw import excitation_generator, fermion_operator_matrix, number_operator
from qdmet.vqe import (
    ActiveSpace,
    NoisyEvaluator,
    VqeResult,
    build_uccsd,
    noisy_reevaluate,
    run_vqe,
    select_active_space,
    trotterize,
)


def mo_problem(system):
    ints, scf, _ = system
    C = scf.mo_coeffs
    h, V = C.T @ ints.hcore @ C, transform_eri(ints.ERI, C)
    H = jordan_wigner(h, V, ints.E_nuc)
    space = select_active_space(scf, "all")
    return h, V, H, build_uccsd(space, scf.mo_energies), ints, scf


@pytest.fixture(scope="module")
def h2_vqe(h2_system):
    h, V, H, ansatz, ints, scf = mo_problem(h2_system)
    return H, ansatz, run_vqe(H, ansatz), run_fci(h, V, 2, ints.E_nuc), scf


# ---------------------------------------------------------------- active space

def test_active_space_selection_rules():
    s = select_active_space(5, 9, n_orb=12)
    assert (len(s.active_occupied), len(s.active_virtual)) == (4, 5)
    assert s.frozen_occupied == (0,) and s.active_occupied == (1, 2, 3, 4)
    assert s.active_virtual == (5, 6, 7, 8, 9) and s.frozen_virtual == (10, 11)
    q = select_active_space(5, n_orb=12, n_qubits=8)
    assert (len(q.active_occupied), len(q.active_virtual), q.n_qubits) == (2, 2, 8)
    assert select_active_space(5, {"qubits": 8}, n_orb=12) == q
    full = select_active_space(5, "all", n_orb=12)
    assert full.frozen_occupied == () and full.frozen_virtual == () and full.n_active == 12
    assert select_active_space(5, (1, 3), n_orb=12).active_virtual == (5, 6, 7)
    with pytest.raises(ContractError):
        select_active_space(1, 4, n_orb=2)
    with pytest.raises(ContractError):
        select_active_space(1, n_orb=4, n_qubits=5)


# ---------------------------------------------------------------- ansatz

def test_h2_ansatz_has_three_ordered_parameters():
    a = build_uccsd(ActiveSpace((), (0,), (1,), ()))
    assert a.n_parameters == 3
    assert a.excitations == [((2,), (0,)), ((3,), (1,)), ((2, 3), (0, 1))]
    assert a.reference_bitstring == "1100"


def test_ansatz_build_is_deterministic_and_counts():
    space = ActiveSpace((), (0, 1), (2, 3), ())
    a, b = build_uccsd(space), build_uccsd(space)
    assert a.excitations == b.excitations and a.generators == b.generators
    # 8 Sz-preserving singles; doubles: 2 same-spin pairs x 1 + 4 x 4 opposite-spin
    n_singles = sum(len(c) == 1 for c, _ in a.excitations)
    assert n_singles == 8 and a.n_parameters == 8 + 2 + 16
    kinds = [len(c) for c, _ in a.excitations]
    assert kinds == sorted(kinds)  # singles before doubles
    assert build_uccsd(ActiveSpace((), (0,), (), ())).n_parameters == 0


def test_generators_preserve_number_and_spin():
    a = build_uccsd(ActiveSpace((), (0, 1), (2,), ()))
    n = a.n_qubits
    N = number_operator(n).to_dense()
    idx = np.arange(1 << n)
    sz = np.diag([sum(((i >> q) & 1) * (1 if q % 2 == 0 else -1) for q in range(n)) for i in idx])
    for cre, ann in a.excitations:
        G = fermion_operator_matrix(excitation_generator(list(cre), list(ann)), n)
        assert np.allclose(G, -G.conj().T)
        assert np.allclose(G @ N, N @ G) and np.allclose(G @ sz, sz @ G)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_ansatz_state_stays_in_particle_sector(seed):
    a = build_uccsd(ActiveSpace((), (0, 1), (2, 3), ()))
    theta = np.random.default_rng(seed).normal(size=a.n_parameters)
    psi = a.state_vector(theta)
    weight = np.array([bin(i).count("1") for i in range(psi.size)])
    assert np.abs(psi[weight != 4]).max() < 1e-12
    assert np.vdot(psi, number_operator(8).to_sparse() @ psi).real == pytest.approx(4, abs=1e-10)


def test_single_generator_trotterization_is_exact():
    a = build_uccsd(ActiveSpace((), (0,), (1,), ()))
    # keep only the double excitation
    a.excitations, a.generators, a._compiled = a.excitations[2:], a.generators[2:], None
    theta = 0.37
    G = fermion_operator_matrix(excitation_generator([2, 3], [0, 1]), 4)
    ref = expm(theta * G) @ a.reference_state().amplitudes
    out = apply_circuit(a.reference_state(), trotterize(a, [theta])).amplitudes
    assert np.allclose(out, ref, atol=1e-12)
    assert np.allclose(a.state_vector([theta]), ref, atol=1e-12)


def test_zero_parameters_give_reference(h2_vqe):
    H, a, _, _, scf = h2_vqe
    theta = np.zeros(a.n_parameters)
    circ = trotterize(a, theta)
    assert all(g.angle == 0.0 for g in circ.gates)
    out = apply_circuit(a.reference_state(), circ)
    assert np.allclose(out.amplitudes, a.reference_state().amplitudes)
    assert expectation(out, H) == pytest.approx(scf.e_total, abs=1e-10)


def test_ladder_decomposition_matches_primitive():
    a = build_uccsd(ActiveSpace((), (0, 1), (2,), ()))
    theta = np.random.default_rng(5).normal(size=a.n_parameters)
    prim = a.state_vector(theta)
    circ = trotterize(a, theta, decompose=True, prepare_reference=True)
    assert circ.count("PEXP") == 0 and circ.count("CNOT") > 0
    ladder = apply_circuit(Statevector.basis_state(a.n_qubits, 0), circ).amplitudes
    assert abs(np.vdot(prim, ladder)) == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(ladder, prim, atol=1e-12)


def test_gradient_matches_central_differences(h2_vqe):
    H, a, _, _, _ = h2_vqe
    Hs = H.to_sparse()
    rng = np.random.default_rng(8)
    for _ in range(3):
        theta = rng.normal(size=a.n_parameters)
        _, g = a.energy_and_gradient(theta, Hs)
        fd = []
        for k in range(a.n_parameters):
            e = np.zeros(a.n_parameters)
            e[k] = 1e-4
            fd.append((a.energy_and_gradient(theta + e, Hs)[0]
                       - a.energy_and_gradient(theta - e, Hs)[0]) / 2e-4)
        assert np.allclose(g, fd, atol=1e-6)


# ---------------------------------------------------------------- optimization

def test_h2_vqe_reaches_fci(h2_vqe):
    H, a, res, fci, _ = h2_vqe
    assert res.converged
    assert res.energy == pytest.approx(fci.energy, abs=1e-6)
    assert res.energy >= fci.energy - 1e-10
    ground = np.linalg.eigh(H.to_dense())[1][:, 0]
    fidelity = abs(np.vdot(ground, a.state_vector(res.theta_opt))) ** 2
    assert fidelity >= 1 - 1e-8


def test_exhausted_budget_is_flagged(h2_vqe):
    H, a, _, _, _ = h2_vqe
    res = run_vqe(H, a, max_evals=1, theta0=[0.3, -0.2, 0.5])
    assert not res.converged


def test_vqe_result_json_roundtrip(h2_vqe):
    res = h2_vqe[2]
    back = VqeResult.from_json(res.to_json())
    assert back.energy == res.energy and np.array_equal(back.theta_opt, res.theta_opt)
    assert back.history == res.history


def test_qubit_count_mismatch(h2_vqe):
    H = h2_vqe[0]
    with pytest.raises(ContractError):
        run_vqe(H, build_uccsd(ActiveSpace((), (0, 1), (2,), ())))


def test_lih_twelve_qubit_variational_sandwich(lih_system):
    h, V, H, a, ints, scf = mo_problem(lih_system)
    assert a.n_qubits == 12
    res = run_vqe(H, a)
    fci = run_fci(h, V, 4, ints.E_nuc)
    assert fci.energy - 1e-10 <= res.energy <= scf.e_total
    assert res.energy == pytest.approx(fci.energy, abs=1e-4)


# ---------------------------------------------------------------- noisy re-evaluation

def test_noiseless_reevaluation_converges_to_ideal(h2_vqe):
    H, a, res, _, _ = h2_vqe
    n_shots = 10**5
    est = noisy_reevaluate(res.theta_opt, H, a, None, n_shots, [0, 1, 2, 3])
    groups = NoisyEvaluator(H, a, res.theta_opt).groups
    sigma = np.sqrt(estimator_variance(a.state(res.theta_opt), groups, n_shots))
    values = [e.energy for e in est]
    assert all(abs(v - res.energy) <= 3 * sigma for v in values)
    assert len(set(values)) == 4
    again = noisy_reevaluate(res.theta_opt, H, a, None, n_shots, [0, 1, 2, 3])
    assert [e.energy for e in again] == values


# ---------------------------------------------------------------- DMET fragment solver

def test_vqe_fragment_solver(h4_system):
    _, _, loc = h4_system
    prob = build_embedding_hamiltonian(loc, schmidt_bath(loc, FragmentSpec("A", [0, 1])))
    fci = solve_fragment(prob, "fci")
    small = solve_fragment(prob, "vqe", active_space=2)
    cas = solve_fragment(prob, "fci", active_space=2)
    # a 2-electron, 2-orbital window: UCCSD is exact inside it
    assert small.e_embedding == pytest.approx(cas.e_embedding, abs=1e-8)
    assert small.energy_frag == pytest.approx(cas.energy_frag, abs=1e-6)
    full = solve_fragment(prob, "vqe")
    assert full.e_embedding >= fci.e_embedding - 1e-10
    assert full.e_embedding == pytest.approx(fci.e_embedding, abs=1e-3)
    d = small.details
    st0 = d["ansatz"].state(d["vqe"].theta_opt)
    assert expectation(st0, d["energy_operator"]) == pytest.approx(small.energy_frag, abs=1e-10)
    assert d["n_elec_active"] == 2
