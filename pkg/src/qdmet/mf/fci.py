"""Exact diagonalization in the fixed-Sz determinant basis.

Determinants are (alpha string, beta string) pairs with strings ordered
lexicographically by occupation list; the CI vector index is
``ia * n_beta_strings + ib``.  The Hamiltonian is assembled from the
spin-summed excitation operators E_pq = sum_s a+_ps a_qs as

    H = sum_pq k_pq E_pq + 1/2 sum_pqrs (pq|rs) E_pq E_rs,
    k_pq = h_pq - 1/2 sum_r (pr|rq).

RDM conventions: P[p,q] = <E_pq>, G[p,q,r,s] = <a+_p a+_r a_s a_q> summed
over spins, so that E = sum h P + 1/2 sum (pq|rs) G[p,q,r,s] + e_const and
sum_pr G[p,p,r,r] = N(N-1).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from qdmet.errors import CapacityError

MAX_DETERMINANTS = 10**6
DENSE_LIMIT = 2500


@dataclass(frozen=True, eq=False)
class FciSolution:
    energy: float
    one_rdm: np.ndarray
    two_rdm: np.ndarray
    n_determinants: int
    civec: np.ndarray


def strings(n_orb, n_el):
    return [sum(1 << i for i in occ) for occ in combinations(range(n_orb), n_el)]


@lru_cache(maxsize=32)
def _string_excitations(n_orb, n_el):
    """Sparse a+_p a_q on the string space, one matrix per (p, q)."""
    strs = strings(n_orb, n_el)
    index = {s: i for i, s in enumerate(strs)}
    mats = {}
    for p in range(n_orb):
        for q in range(n_orb):
            rows, cols, vals = [], [], []
            for j, s in enumerate(strs):
                if not s >> q & 1:
                    continue
                t = s ^ (1 << q)
                if t >> p & 1:
                    continue
                sign = (-1) ** bin(t & ((1 << p) - 1)).count("1") * (-1) ** bin(s & ((1 << q) - 1)).count("1")
                t |= 1 << p
                rows.append(index[t])
                cols.append(j)
                vals.append(sign)
            mats[p, q] = sp.csr_matrix((vals, (rows, cols)), shape=(len(strs), len(strs)))
    return mats, len(strs)


@lru_cache(maxsize=16)
def excitation_operators(n_orb, n_alpha, n_beta):
    """Spin-summed E_pq as sparse matrices on the determinant space."""
    ea, na = _string_excitations(n_orb, n_alpha)
    eb, nb = _string_excitations(n_orb, n_beta)
    ia, ib = sp.identity(na, format="csr"), sp.identity(nb, format="csr")
    return {
        pq: (sp.kron(ea[pq], ib) + sp.kron(ia, eb[pq])).tocsr()
        for pq in ea
    }


def _spin_counts(n_elec):
    return (n_elec + 1) // 2, n_elec // 2


def determinant_count(n_orb, n_elec):
    na, nb = _spin_counts(n_elec)
    return comb(n_orb, na) * comb(n_orb, nb)


def fci_hamiltonian(h, V, n_elec, e_const=0.0):
    n = h.shape[0]
    na, nb = _spin_counts(n_elec)
    E = excitation_operators(n, na, nb)
    k = h - 0.5 * np.einsum("prrq->pq", V)
    ndet = determinant_count(n, n_elec)
    H = sp.identity(ndet, format="csr") * e_const
    for p in range(n):
        for q in range(n):
            if abs(k[p, q]) > 1e-14:
                H = H + k[p, q] * E[p, q]
    for p in range(n):
        for q in range(n):
            inner = None
            for r in range(n):
                for s in range(n):
                    v = V[p, q, r, s]
                    if abs(v) > 1e-14:
                        term = v * E[r, s]
                        inner = term if inner is None else inner + term
            if inner is not None:
                H = H + 0.5 * (E[p, q] @ inner)
    return H.tocsr()


def rdms_from_civec(c, n_orb, n_elec):
    na, nb = _spin_counts(n_elec)
    E = excitation_operators(n_orb, na, nb)
    W = np.array([E[p, q] @ c for p in range(n_orb) for q in range(n_orb)])
    P = (W @ c).reshape(n_orb, n_orb)
    # <E_pq E_rs> = (E_qp c) . (E_rs c)
    M = (W @ W.T).reshape(n_orb, n_orb, n_orb, n_orb)  # M[q,p,r,s]
    G = M.transpose(1, 0, 2, 3) - np.einsum("qr,ps->pqrs", np.eye(n_orb), P)
    return P, G


def run_fci(h, V, n_elec, e_const=0.0) -> FciSolution:
    h = np.asarray(h, dtype=float)
    n = h.shape[0]
    ndet = determinant_count(n, n_elec)
    if ndet > MAX_DETERMINANTS:
        raise CapacityError(f"{ndet} determinants exceed the limit of {MAX_DETERMINANTS}")
    H = fci_hamiltonian(h, V, n_elec, e_const)
    if ndet <= DENSE_LIMIT:
        w, U = np.linalg.eigh(H.toarray())
        e0, c = w[0], U[:, 0]
    else:
        w, U = spla.eigsh(H, k=1, which="SA", tol=1e-12)
        e0, c = w[0], U[:, 0]
    P, G = rdms_from_civec(c, n, n_elec)
    return FciSolution(float(e0), P, G, ndet, c)
