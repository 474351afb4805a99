from qdmet.mf.fci import FciSolution, run_fci
from qdmet.mf.localize import LocalBasis, lowdin_localize, transform_eri
from qdmet.mf.mp2 import mp2_rdms, run_mp2
from qdmet.mf.rhf import ScfResult, run_rhf, solve_rhf

__all__ = [
    "FciSolution", "LocalBasis", "ScfResult", "lowdin_localize", "mp2_rdms",
    "run_fci", "run_mp2", "run_rhf", "solve_rhf", "transform_eri",
]
