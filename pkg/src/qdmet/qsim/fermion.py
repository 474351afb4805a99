"""Fermionic one-body operators acting directly on JW statevectors."""
from __future__ import annotations

import numpy as np

from qdmet.qsim.pauli import parity


def apply_hopping(psi, n_qubits, p, q):
    """a+_p a_q |psi> for spin-orbital modes p, q."""
    idx = np.arange(1 << n_qubits, dtype=np.int64)
    out = np.zeros_like(psi)
    has_q = (idx >> q & 1).astype(bool)
    mid = idx ^ (1 << q)
    if p == q:
        ok = has_q
        dst = idx
        sign = np.ones(idx.size)
    else:
        ok = has_q & ~((mid >> p & 1).astype(bool))
        dst = mid | (1 << p)
        sign = (1 - 2 * parity(idx & ((1 << q) - 1))) * (1 - 2 * parity(mid & ((1 << p) - 1)))
    out[dst[ok]] = sign[ok] * psi[ok]
    return out


def spin_summed_rdms(psi, n_spatial):
    """P[p,q] = <E_pq>, G[p,q,r,s] = <a+_p a+_r a_s a_q> (spin summed, real part)."""
    n_qubits = 2 * n_spatial
    W = np.empty((n_spatial, n_spatial, psi.size), dtype=complex)
    for p in range(n_spatial):
        for q in range(n_spatial):
            W[p, q] = apply_hopping(psi, n_qubits, 2 * p, 2 * q) + apply_hopping(
                psi, n_qubits, 2 * p + 1, 2 * q + 1
            )
    Wf = W.reshape(n_spatial**2, -1)
    P = (Wf @ psi.conj()).conj().reshape(n_spatial, n_spatial).real
    M = (Wf.conj() @ Wf.T).reshape((n_spatial,) * 4).real  # M[q,p,r,s] = <E_pq E_rs>
    G = M.transpose(1, 0, 2, 3) - np.einsum("qr,ps->pqrs", np.eye(n_spatial), P)
    return P, G
