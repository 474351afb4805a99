import numpy as np
import pytest

from qdmet.chem import Molecule
from qdmet.dmet import (
    FragmentSpec,
    Solver,
    build_embedding_hamiltonian,
    optimize_chemical_potential,
    particle_number_scan,
    schmidt_bath,
    solve_fragment,
    validate_partition,
)
from qdmet.errors import ContractError, FragmentationError, RootNotBracketedError
from qdmet.mf import run_fci, run_mp2, transform_eri

from conftest import prepared


def frags(groups, solver="fci", active=None):
    return [FragmentSpec(f"F{i}", g, solver, active) for i, g in enumerate(groups)]


def test_solver_aliases():
    assert Solver.parse("UCCSD") is Solver.VQE
    assert Solver.parse("rhf") is Solver.MEAN_FIELD
    with pytest.raises(ValueError):
        Solver.parse("ccsd(t)")


def test_partition_validation():
    validate_partition(frags([[0, 1], [2, 3]]), 4)
    with pytest.raises(FragmentationError, match="duplicated"):
        validate_partition(frags([[0, 1], [1, 2, 3]]), 4)
    with pytest.raises(FragmentationError, match="missing"):
        validate_partition(frags([[0, 1], [2]]), 4)
    with pytest.raises(FragmentationError, match="labels"):
        validate_partition([FragmentSpec("A", [0, 1]), FragmentSpec("A", [2, 3])], 4)
    with pytest.raises(FragmentationError):
        validate_partition([FragmentSpec("A", [])], 0)


def test_bath_orbitals_are_orthonormal_and_environment_supported(h4_system):
    _, _, loc = h4_system
    for group in ([0], [0, 1], [1, 2, 3]):
        bath = schmidt_bath(loc, FragmentSpec("A", group))
        T = bath.transform
        assert np.allclose(T.T @ T, np.eye(T.shape[1]), atol=1e-12)
        assert bath.n_bath <= len(group)
        env = [i for i in range(4) if i not in group]
        assert np.allclose(T[group, len(group):], 0.0)
        assert np.allclose(T[env, :len(group)], 0.0)
        # D_env carries the remaining electrons and is idempotent (D/2)^2 = D/2
        N_env = np.trace(bath.D_env)
        assert N_env + bath.n_elec_emb == pytest.approx(4.0, abs=1e-10)
        assert np.allclose(bath.D_env @ bath.D_env / 2, bath.D_env, atol=1e-10)


def test_isolated_fragment_has_no_bath():
    mol = Molecule.from_atoms([("H", (0, 0, 0)), ("H", (0, 0, 0.74)),
                               ("H", (60, 0, 0)), ("H", (60, 0, 0.74))])
    _, _, loc = prepared(mol)
    bath = schmidt_bath(loc, FragmentSpec("A", [0, 1]))
    assert bath.n_bath == 0 and bath.n_elec_emb == 2


def test_embedding_hamiltonian_properties(h4_system):
    _, _, loc = h4_system
    bath = schmidt_bath(loc, FragmentSpec("A", [0, 1]))
    prob = build_embedding_hamiltonian(loc, bath)
    assert np.allclose(prob.h_emb, prob.h_emb.T)
    V = prob.V_emb
    assert np.allclose(V, V.transpose(1, 0, 2, 3)) and np.allclose(V, V.transpose(2, 3, 0, 1))
    shifted = prob.with_mu(0.3)
    diff = shifted.h_emb - prob.h_emb
    assert np.allclose(np.diag(diff)[:2], -0.3) and np.allclose(np.diag(diff)[2:], 0.0)
    assert np.allclose(shifted.h_nomu, prob.h_emb)
    # projected mean-field density holds the embedding electrons
    assert np.trace(prob.dm_mf) == pytest.approx(prob.n_elec_emb, abs=1e-10)


@pytest.mark.parametrize("system", ["h2_system", "h4_system", "lih_system"])
@pytest.mark.parametrize("solver", ["mf", "fci", "mp2"])
def test_whole_molecule_fragment_reproduces_solver(system, solver, request):
    ints, scf, loc = request.getfixturevalue(system)
    res = optimize_chemical_potential(loc, frags([range(loc.n)], solver))
    if solver == "mf":
        ref = scf.e_total
    elif solver == "mp2":
        ref = scf.e_total + run_mp2(scf, ints)
    else:
        C = scf.mo_coeffs
        ref = run_fci(C.T @ ints.hcore @ C, transform_eri(ints.ERI, C), loc.n_electrons,
                      ints.E_nuc).energy
    assert res.e_total == pytest.approx(ref, abs=1e-8)
    assert res.mu_global == 0.0


@pytest.mark.parametrize("groups", [[[0], [1], [2], [3]], [[0, 1], [2, 3]], [[0], [1, 2, 3]],
                                    [[0, 2], [1, 3]]])
def test_mean_field_democratic_mixing_is_exact(h4_system, groups):
    _, scf, loc = h4_system
    res = optimize_chemical_potential(loc, frags(groups, "mf"))
    assert res.e_total == pytest.approx(scf.e_total, abs=1e-8)
    assert res.n_total == pytest.approx(4.0, abs=1e-8)


def test_symmetric_dimer_partition_balances_charge(h4_system):
    _, _, loc = h4_system
    res = optimize_chemical_potential(loc, frags([[0, 1], [2, 3]], "fci"))
    n = list(res.fragment_electrons.values())
    assert abs(sum(n) - 4.0) <= 1e-6
    assert n[0] == pytest.approx(n[1], abs=1e-8)


def test_single_atom_fragments_need_nonzero_mu(h4_system):
    _, _, loc = h4_system
    res = optimize_chemical_potential(loc, frags([[0], [1], [2], [3]], "fci"))
    assert res.residual <= 1e-6
    assert res.mu_table  # the search evaluated N(mu)


def test_unreachable_electron_count_reports_table(h4_system):
    _, _, loc = h4_system
    with pytest.raises(RootNotBracketedError) as err:
        optimize_chemical_potential(loc, frags([[0], [1], [2], [3]], "fci"), N_e=40)
    assert err.value.table


def test_particle_number_grows_with_mu(h4_system):
    _, _, loc = h4_system
    rows = particle_number_scan(loc, frags([[0], [1], [2], [3]], "fci"), [-0.3, -0.1, 0.1, 0.3])
    totals = [r[2] for r in rows]
    assert np.all(np.diff(totals) >= -1e-10)
    for mu, per, total in rows:
        assert sum(per.values()) == pytest.approx(total)
    with pytest.raises(ContractError):
        particle_number_scan(loc, frags([[0, 1, 2, 3]]), [np.nan])


def test_active_space_fci_equals_casci_and_bounds(h4_system):
    ints, scf, loc = h4_system
    bath = schmidt_bath(loc, FragmentSpec("A", [0, 1, 2, 3]))
    prob = build_embedding_hamiltonian(loc, bath)
    full = solve_fragment(prob, "fci")
    cas = solve_fragment(prob, "fci", active_space=(1, 1))
    same = solve_fragment(prob, "fci", active_space="all")
    assert same.energy_frag == pytest.approx(full.energy_frag, abs=1e-9)
    # the 2-in-2 window lies between RHF and full FCI
    assert full.energy_frag - 1e-10 <= cas.energy_frag <= scf.e_total - loc.E_nuc + 1e-10
    assert np.trace(cas.one_rdm) == pytest.approx(4.0, abs=1e-10)


def test_active_space_request_too_large(h2_system):
    _, _, loc = h2_system
    prob = build_embedding_hamiltonian(loc, schmidt_bath(loc, FragmentSpec("A", [0, 1])))
    with pytest.raises(ContractError):
        solve_fragment(prob, "fci", active_space=(2, 1))
