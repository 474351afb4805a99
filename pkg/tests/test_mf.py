import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdmet.chem import Molecule, compute_integrals
from qdmet.errors import CapacityError, ContractError, ConvergenceError
from qdmet.mf import lowdin_localize, mp2_rdms, run_fci, run_mp2, run_rhf, transform_eri
from qdmet.mf.fci import determinant_count
from qdmet.mf.localize import lowdin_transform
from qdmet.mf.rhf import coulomb_exchange
from qdmet.qsim.jw import jordan_wigner

from conftest import H4_XYZ, LIH_XYZ, h2


def mo_integrals(ints, scf):
    C = scf.mo_coeffs
    return C.T @ ints.hcore @ C, transform_eri(ints.ERI, C)


def sector_ground_energy(h, V, e_const, n_alpha, n_beta):
    """Lowest eigenvalue of the JW qubit Hamiltonian inside one (N_alpha, N_beta) sector."""
    n = h.shape[0]
    H = jordan_wigner(h, V, e_const).to_sparse().toarray()
    idx = np.arange(1 << (2 * n))
    alpha = sum((idx >> (2 * p)) & 1 for p in range(n))
    beta = sum((idx >> (2 * p + 1)) & 1 for p in range(n))
    keep = np.flatnonzero((alpha == n_alpha) & (beta == n_beta))
    return np.linalg.eigvalsh(H[np.ix_(keep, keep)])[0]


# ---------------------------------------------------------------- RHF

def test_h2_rhf_matches_symmetric_orbital_energy():
    ints = compute_integrals(h2())
    scf = run_rhf(ints, 2)
    s = ints.S[0, 1]
    g = np.array([1.0, 1.0]) / np.sqrt(2 * (1 + s))
    h_gg = g @ ints.hcore @ g
    j_gg = np.einsum("i,j,k,l,ijkl->", g, g, g, g, ints.ERI)
    assert scf.e_total == pytest.approx(2 * h_gg + j_gg + ints.E_nuc, abs=1e-10)
    assert scf.e_total == pytest.approx(-1.11699900, abs=1e-7)


def test_h2_rhf_is_minimum_over_orbital_rotations():
    ints = compute_integrals(h2(0.9))
    scf = run_rhf(ints, 2)
    S = ints.S

    def energy(angle):
        c = np.array([np.cos(angle), np.sin(angle)])
        c = c / np.sqrt(c @ S @ c)
        D = 2 * np.outer(c, c)
        return 0.5 * np.sum(D * (2 * ints.hcore + coulomb_exchange(ints.ERI, D))) + ints.E_nuc

    grid = np.linspace(0, np.pi, 20001)
    brute = min(energy(a) for a in grid)
    assert scf.e_total <= brute + 1e-12
    assert scf.e_total == pytest.approx(brute, abs=1e-8)


def test_helium_single_function_closed_form():
    ints = compute_integrals(Molecule.from_atoms([("He", (0, 0, 0))]))
    scf = run_rhf(ints, 2)
    assert scf.e_total == pytest.approx(2 * ints.hcore[0, 0] + ints.ERI[0, 0, 0, 0], abs=1e-12)
    assert scf.e_total == pytest.approx(-2.8077840, abs=1e-6)


def test_rhf_density_and_orbitals(lih_system):
    ints, scf, _ = lih_system
    C = scf.mo_coeffs
    assert np.allclose(C.T @ ints.S @ C, np.eye(ints.n), atol=1e-10)
    assert np.trace(scf.density @ ints.S) == pytest.approx(4.0, abs=1e-10)
    F = ints.hcore + coulomb_exchange(ints.ERI, scf.density)
    assert np.allclose(C.T @ F @ C, np.diag(scf.mo_energies), atol=1e-6)
    assert scf.converged


@pytest.mark.parametrize("xyz, ref", [(LIH_XYZ, -7.8618648), (H4_XYZ, -2.0985460)])
def test_rhf_reference_energies(xyz, ref):
    mol = Molecule.from_atoms(xyz)
    assert run_rhf(compute_integrals(mol), mol.n_electrons).e_total == pytest.approx(ref, abs=1e-6)


def test_rhf_rejects_odd_electron_count():
    ints = compute_integrals(h2())
    with pytest.raises(ContractError):
        run_rhf(ints, 3)


def test_rhf_nonconvergence_is_flagged():
    ints = compute_integrals(Molecule.from_atoms(H4_XYZ))
    scf = run_rhf(ints, 4, max_iter=1)
    assert not scf.converged
    with pytest.raises(ConvergenceError):
        scf.require_converged()


# ---------------------------------------------------------------- Lowdin

def test_lowdin_2x2_closed_form():
    s = 0.37
    S = np.array([[1.0, s], [s, 1.0]])
    a, b = 1 / np.sqrt(1 + s), 1 / np.sqrt(1 - s)
    ref = 0.5 * np.array([[a + b, a - b], [a - b, a + b]])
    X, S_half = lowdin_transform(S)
    assert np.allclose(X, ref, atol=1e-14)
    assert np.allclose(X @ S_half, np.eye(2), atol=1e-14)


def test_lowdin_basis_properties(lih_system):
    ints, scf, loc = lih_system
    assert np.allclose(loc.X.T @ ints.S @ loc.X, np.eye(ints.n), atol=1e-10)
    assert np.trace(loc.D_lo) == pytest.approx(4.0, abs=1e-10)
    # idempotent in the orthonormal basis: (D/2)^2 = D/2
    assert np.allclose(loc.D_lo @ loc.D_lo / 2, loc.D_lo, atol=1e-8)
    e = 0.5 * np.sum(loc.D_lo * (2 * loc.h_lo + coulomb_exchange(loc.eri_lo, loc.D_lo)))
    assert e + loc.E_nuc == pytest.approx(scf.e_total, abs=1e-9)


# ---------------------------------------------------------------- MP2

def test_h2_mp2_two_level_closed_form():
    ints = compute_integrals(h2())
    scf = run_rhf(ints, 2)
    _, V = mo_integrals(ints, scf)
    eps = scf.mo_energies
    ref = -V[0, 1, 0, 1] ** 2 / (2 * (eps[1] - eps[0]))
    assert run_mp2(scf, ints) == pytest.approx(ref, abs=1e-12)
    assert run_mp2(scf, ints) == pytest.approx(-0.0130219, abs=1e-6)


def test_mp2_rdms_reproduce_hylleraas_energy(lih_system):
    ints, scf, _ = lih_system
    h, V = mo_integrals(ints, scf)
    P, G = mp2_rdms(scf.mo_energies, V, scf.n_occ)
    e = np.sum(h * P) + 0.5 * np.sum(V * G) + ints.E_nuc
    assert e == pytest.approx(scf.e_total + run_mp2(scf, ints), abs=1e-10)
    assert np.trace(P) == pytest.approx(4.0, abs=1e-12)


@settings(max_examples=6, deadline=None)
@given(r=st.floats(0.5, 3.0), seed=st.integers(0, 1000))
def test_mp2_correlation_is_nonpositive(r, seed):
    rng = np.random.default_rng(seed)
    pos = np.array([[0, 0, 0], [0, 0, r], rng.uniform(1.5, 3, 3), rng.uniform(-3, -1.5, 3)])
    mol = Molecule.from_atoms(list(zip("HHHH", pos)))
    ints = compute_integrals(mol)
    scf = run_rhf(ints, 4)
    if scf.converged:
        assert run_mp2(scf, ints) <= 0.0


# ---------------------------------------------------------------- FCI

def test_h2_fci_two_determinant_closed_form():
    ints = compute_integrals(h2())
    scf = run_rhf(ints, 2)
    h, V = mo_integrals(ints, scf)
    H = np.array([[2 * h[0, 0] + V[0, 0, 0, 0], V[0, 1, 0, 1]],
                  [V[0, 1, 0, 1], 2 * h[1, 1] + V[1, 1, 1, 1]]])
    ref = np.linalg.eigvalsh(H)[0] + ints.E_nuc
    fci = run_fci(h, V, 2, ints.E_nuc)
    assert fci.energy == pytest.approx(ref, abs=1e-12)
    assert fci.energy == pytest.approx(-1.1373060, abs=1e-6)


@pytest.mark.parametrize("xyz, n_el", [(LIH_XYZ, 4), (H4_XYZ, 4)])
def test_fci_matches_qubit_hamiltonian_sector(xyz, n_el):
    mol = Molecule.from_atoms(xyz)
    ints = compute_integrals(mol)
    scf = run_rhf(ints, n_el)
    h, V = mo_integrals(ints, scf)
    fci = run_fci(h, V, n_el, ints.E_nuc)
    assert fci.energy == pytest.approx(sector_ground_energy(h, V, ints.E_nuc, 2, 2), abs=1e-9)
    assert fci.energy <= scf.e_total + 1e-12


def test_fci_odd_electrons_against_qubit_sector(rng):
    n = 3
    h = rng.normal(size=(n, n))
    h = h + h.T
    A = rng.normal(size=(n * n, n * n))
    V = (A @ A.T).reshape(n, n, n, n) * 0.1
    V = 0.5 * (V + V.transpose(1, 0, 2, 3))
    V = 0.5 * (V + V.transpose(0, 1, 3, 2))
    V = 0.5 * (V + V.transpose(2, 3, 0, 1))
    fci = run_fci(h, V, 3)
    assert fci.energy == pytest.approx(sector_ground_energy(h, V, 0.0, 2, 1), abs=1e-9)


def test_fci_rdms_are_consistent(h4_system):
    ints, scf, loc = h4_system
    fci = run_fci(loc.h_lo, loc.eri_lo, 4, loc.E_nuc)
    P, G = fci.one_rdm, fci.two_rdm
    assert np.allclose(P, P.T, atol=1e-12)
    assert np.trace(P) == pytest.approx(4.0, abs=1e-10)
    assert np.einsum("pprr->", G) == pytest.approx(12.0, abs=1e-9)
    # contraction of the 2-RDM gives (N - 1) P
    assert np.allclose(np.einsum("pqrr->pq", G), 3.0 * P, atol=1e-9)
    e = np.sum(loc.h_lo * P) + 0.5 * np.sum(loc.eri_lo * G) + loc.E_nuc
    assert e == pytest.approx(fci.energy, abs=1e-10)
    assert fci.energy == pytest.approx(-2.1663875, abs=1e-6)
    assert fci.energy <= scf.e_total


def test_fci_capacity_guard():
    assert determinant_count(20, 10) > 10**6 // 10
    n = 24
    with pytest.raises(CapacityError):
        run_fci(np.zeros((n, n)), np.zeros((n, n, n, n)), 12)
