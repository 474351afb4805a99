"""Closed-shell restricted Hartree-Fock with DIIS."""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from qdmet.chem.integrals import IntegralSet
from qdmet.errors import ContractError, ConvergenceError

logger = logging.getLogger(__name__)

DIIS_ERROR_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class ScfResult:
    mo_coeffs: np.ndarray
    mo_energies: np.ndarray
    density: np.ndarray  # spin-summed, trace(D S) = n_electrons
    e_total: float
    e_elec: float
    converged: bool
    n_occ: int
    n_iterations: int = 0

    def require_converged(self):
        if not self.converged:
            raise ConvergenceError(
                f"SCF did not converge after {self.n_iterations} iterations"
            )
        return self


def coulomb_exchange(eri, D):
    """Closed-shell two-electron Fock contribution J - K/2."""
    J = np.einsum("ijkl,kl->ij", eri, D, optimize=True)
    K = np.einsum("ilkj,kl->ij", eri, D, optimize=True)
    return J - 0.5 * K


def solve_rhf(h, eri, n_electrons, S=None, e_const=0.0, dm0=None,
              max_iter=200, conv_tol=1e-9, diis_depth=8):
    """RHF on an arbitrary (h, eri) Hamiltonian; ``S`` defaults to identity."""
    if n_electrons % 2:
        raise ContractError(f"RHF needs an even electron count, got {n_electrons}")
    n = h.shape[0]
    n_occ = n_electrons // 2
    if n_occ > n:
        raise ContractError(f"{n_electrons} electrons do not fit in {n} orbitals")
    if S is None:
        S = np.eye(n)
    X = _inv_sqrt(S)

    def diagonalize(F):
        e, Cp = np.linalg.eigh(X.T @ F @ X)
        return e, X @ Cp

    def density(C):
        Cocc = C[:, :n_occ]
        return 2.0 * Cocc @ Cocc.T

    if dm0 is None:
        eps, C = diagonalize(h)
        D = density(C)
    else:
        D = np.array(dm0, dtype=float)

    focks = deque(maxlen=diis_depth)
    errors = deque(maxlen=diis_depth)
    e_old = None
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        F = h + coulomb_exchange(eri, D)
        e_elec = 0.5 * np.sum(D * (h + F))
        err = X.T @ (F @ D @ S - S @ D @ F) @ X
        err_norm = np.linalg.norm(err)
        if e_old is not None and abs(e_elec - e_old) < conv_tol and err_norm < DIIS_ERROR_TOL:
            converged = True
            break
        e_old = e_elec
        focks.append(F)
        errors.append(err)
        if len(focks) > 1:
            F = _diis_extrapolate(focks, errors)
        eps, C = diagonalize(F)
        D = density(C)
    # final orbitals from the un-extrapolated Fock of the converged density
    F = h + coulomb_exchange(eri, D)
    eps, C = diagonalize(F)
    if converged:
        D = density(C)
        e_elec = 0.5 * np.sum(D * (h + h + coulomb_exchange(eri, D)))
    else:
        logger.warning("RHF not converged after %d iterations", max_iter)
    return ScfResult(C, eps, D, float(e_elec + e_const), float(e_elec), converged, n_occ, it)


def run_rhf(ints: IntegralSet, n_electrons: int, max_iter=200, conv_tol=1e-9,
            diis_depth=8) -> ScfResult:
    return solve_rhf(ints.hcore, ints.ERI, n_electrons, S=ints.S, e_const=ints.E_nuc,
                     max_iter=max_iter, conv_tol=conv_tol, diis_depth=diis_depth)


def _inv_sqrt(S):
    w, U = scipy.linalg.eigh(S)
    return (U / np.sqrt(w)) @ U.T


def _diis_extrapolate(focks, errors):
    m = len(focks)
    B = -np.ones((m + 1, m + 1))
    B[m, m] = 0.0
    for i in range(m):
        for j in range(i + 1):
            B[i, j] = B[j, i] = np.sum(errors[i] * errors[j])
    rhs = np.zeros(m + 1)
    rhs[m] = -1.0
    try:
        c = np.linalg.solve(B, rhs)[:m]
    except np.linalg.LinAlgError:
        return focks[-1]
    return sum(ci * Fi for ci, Fi in zip(c, focks))
