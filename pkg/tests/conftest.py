import numpy as np
import pytest

from qdmet.chem import Molecule, compute_integrals
from qdmet.mf import lowdin_localize, run_rhf

H2_XYZ = [("H", (0.0, 0.0, 0.0)), ("H", (0.0, 0.0, 0.735))]
H4_XYZ = [("H", (0.0, 0.0, 1.0 * i)) for i in range(4)]
LIH_XYZ = [("Li", (0.0, 0.0, 0.0)), ("H", (0.0, 0.0, 1.6))]

ACCEPTANCE = {}


def h2(r=0.735):
    return Molecule.from_atoms([("H", (0.0, 0.0, 0.0)), ("H", (0.0, 0.0, r))])


def prepared(mol):
    ints = compute_integrals(mol)
    scf = run_rhf(ints, mol.n_electrons)
    return ints, scf, lowdin_localize(ints, scf)


@pytest.fixture(scope="session")
def h2_system():
    return prepared(h2())


@pytest.fixture(scope="session")
def h4_system():
    return prepared(Molecule.from_atoms(H4_XYZ))


@pytest.fixture(scope="session")
def lih_system():
    return prepared(Molecule.from_atoms(LIH_XYZ))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
