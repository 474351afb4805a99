"""Symmetric (Lowdin) orthogonalization into the fragmentation basis."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qdmet.chem.integrals import LINDEP_THRESHOLD, IntegralSet
from qdmet.errors import ConditioningError
from qdmet.mf.rhf import ScfResult


@dataclass(frozen=True, eq=False)
class LocalBasis:
    X: np.ndarray  # AO -> LO, X.T S X = 1
    h_lo: np.ndarray
    eri_lo: np.ndarray
    D_lo: np.ndarray
    E_nuc: float
    n_electrons: int

    @property
    def n(self) -> int:
        return self.X.shape[0]


def lowdin_transform(S):
    w, U = np.linalg.eigh(S)
    if w[0] < LINDEP_THRESHOLD:
        raise ConditioningError(f"overlap smallest eigenvalue {w[0]:.3e}")
    return (U / np.sqrt(w)) @ U.T, (U * np.sqrt(w)) @ U.T


def transform_eri(eri, C):
    """(pq|rs) = sum C_ip C_jq C_kr C_ls (ij|kl) for a rectangular C."""
    out = np.einsum("ijkl,ip->pjkl", eri, C, optimize=True)
    out = np.einsum("pjkl,jq->pqkl", out, C, optimize=True)
    out = np.einsum("pqkl,kr->pqrl", out, C, optimize=True)
    return np.einsum("pqrl,ls->pqrs", out, C, optimize=True)


def lowdin_localize(ints: IntegralSet, scf: ScfResult) -> LocalBasis:
    scf.require_converged()
    X, S_half = lowdin_transform(ints.S)
    # D is contravariant: D_lo = X^-1 D X^-T with X^-1 = S^1/2
    D_lo = S_half @ scf.density @ S_half
    n_e = int(round(np.trace(D_lo)))
    return LocalBasis(X, X.T @ ints.hcore @ X, transform_eri(ints.ERI, X), D_lo,
                      ints.E_nuc, n_e)
