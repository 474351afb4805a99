"""Closed-shell second-order Moller-Plesset correction and its unrelaxed RDMs."""
from __future__ import annotations

import numpy as np

from qdmet.chem.integrals import IntegralSet
from qdmet.errors import SingularityError
from qdmet.mf.localize import transform_eri
from qdmet.mf.rhf import ScfResult

GAP_THRESHOLD = 1e-8


def mp2_amplitudes(eps, ovov, n_occ):
    """t[i,a,j,b] = (ia|jb) / (e_i + e_j - e_a - e_b) over MO integrals ``ovov``."""
    eo, ev = eps[:n_occ], eps[n_occ:]
    if ev.size and eo.size and ev.min() - eo.max() < GAP_THRESHOLD:
        raise SingularityError(
            f"occupied/virtual gap {ev.min() - eo.max():.3e} below {GAP_THRESHOLD}"
        )
    denom = eo[:, None, None, None] - ev[None, :, None, None] + eo[None, None, :, None] - ev[None, None, None, :]
    return ovov / denom


def mp2_energy(eps, eri_mo, n_occ):
    o, v = slice(0, n_occ), slice(n_occ, None)
    ovov = eri_mo[o, v, o, v]
    if ovov.size == 0:
        return 0.0
    t = mp2_amplitudes(eps, ovov, n_occ)
    return float(np.einsum("iajb,iajb->", t, 2.0 * ovov - ovov.transpose(0, 3, 2, 1)))


def run_mp2(scf: ScfResult, ints: IntegralSet) -> float:
    scf.require_converged()
    C = scf.mo_coeffs
    occ = scf.n_occ
    if C.shape[1] == occ:
        return 0.0
    eri_mo = transform_eri(ints.ERI, C)
    return mp2_energy(scf.mo_energies, eri_mo, occ)


def mp2_rdms(eps, eri_mo, n_occ):
    """Unrelaxed MP2 1- and 2-RDMs in the canonical MO basis.

    Built so that sum(h P) + 1/2 sum(V G) reproduces E_HF + E_MP2 exactly
    (Hylleraas functional at the first-order amplitudes).  2-RDM indices
    follow G[p,q,r,s] = <a+_p a+_r a_s a_q>, spin summed.
    """
    n = eps.size
    o, v = slice(0, n_occ), slice(n_occ, None)
    P_hf = np.zeros((n, n))
    P_hf[o, o] = 2.0 * np.eye(n_occ)
    ovov = eri_mo[o, v, o, v]
    gamma = np.zeros((n, n))
    G = _mf_two_rdm(P_hf)
    if ovov.size:
        t = mp2_amplitudes(eps, ovov, n_occ)  # t[i,a,j,b]
        lam = 2.0 * t - t.transpose(0, 3, 2, 1)
        # occupied block lowers, virtual block raises the occupation
        doo = np.einsum("iakb,jakb->ij", t, lam)
        dvv = np.einsum("iajc,ibjc->ab", t, lam)
        gamma[o, o] = -(doo + doo.T)
        gamma[v, v] = dvv + dvv.T
        G = G + _cross_two_rdm(P_hf, gamma)
        G[o, v, o, v] += 2.0 * lam
        G[v, o, v, o] += 2.0 * lam.transpose(1, 0, 3, 2)
    return P_hf + gamma, G


def _mf_two_rdm(P):
    return np.einsum("ij,kl->ijkl", P, P) - 0.5 * np.einsum("il,kj->ijkl", P, P)


def _cross_two_rdm(A, B):
    return (np.einsum("ij,kl->ijkl", A, B) + np.einsum("ij,kl->ijkl", B, A)
            - 0.5 * (np.einsum("il,kj->ijkl", A, B) + np.einsum("il,kj->ijkl", B, A)))
