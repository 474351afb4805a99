from qdmet.chem.basis import BasisSet, Shell, sto3g
from qdmet.chem.boys import boys, boys_table
from qdmet.chem.integrals import IntegralSet, compute_integrals, nuclear_repulsion
from qdmet.chem.molecule import ANGSTROM_TO_BOHR, Atom, Molecule, parse_xyz

__all__ = [
    "ANGSTROM_TO_BOHR", "Atom", "BasisSet", "IntegralSet", "Molecule", "Shell",
    "boys", "boys_table", "compute_integrals", "nuclear_repulsion", "parse_xyz", "sto3g",
]
