"""Active-space UCCSD ansatz, first-order Trotter circuits and the VQE loop."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from qdmet.errors import ContractError
from qdmet.qsim.fermion import spin_summed_rdms
from qdmet.qsim.jw import excitation_generator, jordan_wigner, to_pauli_sum
from qdmet.qsim.measure import (
    DENSITY_MAX_QUBITS,
    estimate_energy,
    group_qubitwise,
    outcome_distribution,
    sample_distribution,
    sample_shots,
)
from qdmet.qsim.noise import NoiseModel
from qdmet.qsim.pauli import PauliSum, apply_string, commute, masks, parity
from qdmet.qsim.statevector import Circuit, Statevector

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ActiveSpace:
    frozen_occupied: tuple[int, ...]
    active_occupied: tuple[int, ...]
    active_virtual: tuple[int, ...]
    frozen_virtual: tuple[int, ...]

    @property
    def n_active(self) -> int:
        return len(self.active_occupied) + len(self.active_virtual)

    @property
    def n_qubits(self) -> int:
        return 2 * self.n_active


def select_active_space(scf, n_active=None, *, n_orb=None, n_qubits=None) -> ActiveSpace:
    """Window of spatial MOs around the Fermi level.

    ``scf`` is an embedding ScfResult, or the occupied-orbital count when
    ``n_orb`` is given.  ``n_active`` is a spatial-orbital count (split
    evenly, extra orbital to the virtual side), an explicit
    ``(n_occ_active, n_virt_active)`` pair, a mapping ``{"qubits": k}``, or
    ``None``/"all" for the full space.  ``n_qubits`` is the same request in
    qubits (two per spatial orbital).
    """
    if n_orb is None:
        n_occ, n_orb = scf.n_occ, scf.mo_energies.size
    else:
        n_occ = int(scf)
    n_virt = n_orb - n_occ
    if isinstance(n_active, dict):
        n_qubits = n_active.get("qubits", n_qubits)
        n_active = n_active.get("orbitals")
    if n_qubits is not None:
        if n_qubits % 2:
            raise ContractError("qubit count must be even (two spin orbitals per orbital)")
        n_active = n_qubits // 2
    if n_active is None or n_active == "all":
        na_o, na_v = n_occ, n_virt
    elif isinstance(n_active, (tuple, list)):
        na_o, na_v = (int(v) for v in n_active)
    else:
        n_active = int(n_active)
        na_o = n_active // 2
        na_v = n_active - na_o
    if na_o > n_occ or na_v > n_virt or na_o < 0 or na_v < 0:
        raise ContractError(
            f"active space ({na_o} occ, {na_v} virt) exceeds available ({n_occ} occ, {n_virt} virt)"
        )
    return ActiveSpace(
        tuple(range(n_occ - na_o)),
        tuple(range(n_occ - na_o, n_occ)),
        tuple(range(n_occ, n_occ + na_v)),
        tuple(range(n_occ + na_v, n_orb)),
    )


@dataclass(eq=False)
class Ansatz:
    n_qubits: int
    n_electrons: int
    excitations: list  # (creators, annihilators) in spin-orbital modes
    generators: list  # per excitation: [(pauli string, c)] with G = -i sum c P
    reference: int  # occupied-mode bitmask of the HF determinant
    active_space: ActiveSpace | None = None
    orbital_energies: np.ndarray | None = None
    _compiled: list = field(default=None, repr=False)

    @property
    def n_parameters(self) -> int:
        return len(self.generators)

    @property
    def reference_bitstring(self) -> str:
        return "".join("1" if self.reference >> q & 1 else "0" for q in range(self.n_qubits))

    def reference_state(self) -> Statevector:
        return Statevector.basis_state(self.n_qubits, self.reference)

    def _compile(self):
        if self._compiled is None:
            idx = np.arange(1 << self.n_qubits, dtype=np.int64)
            comp = []
            for gen in self.generators:
                rows = []
                for string, c in gen:
                    x, z, ny = masks(string)
                    src = idx ^ x
                    phase = (1j) ** ny * (1 - 2 * parity(src & z))
                    rows.append((src, phase, c))
                comp.append(rows)
            self._compiled = comp
        return self._compiled

    def state_vector(self, theta) -> np.ndarray:
        theta = self._check(theta)
        psi = self.reference_state().amplitudes
        for k, rows in enumerate(self._compile()):
            for src, phase, c in rows:
                a = theta[k] * c
                psi = np.cos(a) * psi - 1j * np.sin(a) * (phase * psi[src])
        return psi

    def state(self, theta) -> Statevector:
        return Statevector(self.state_vector(theta), self.n_qubits)

    def _check(self, theta):
        theta = np.asarray(theta, dtype=float).ravel()
        if theta.size != self.n_parameters:
            raise ContractError(f"expected {self.n_parameters} parameters, got {theta.size}")
        return theta

    def energy_and_gradient(self, theta, H):
        """Energy <H> and its exact gradient (adjoint differentiation)."""
        theta = self._check(theta)
        psi = self.state_vector(theta)
        lam = H @ psi
        energy = float(np.vdot(psi, lam).real)
        grad = np.zeros(theta.size)
        phi = psi
        comp = self._compile()
        for k in range(len(comp) - 1, -1, -1):
            for src, phase, c in reversed(comp[k]):
                # gate exp(-i a P); d/dtheta_k brings down -i c P
                Pphi = phase * phi[src]
                grad[k] += 2.0 * (np.vdot(lam, -1j * c * Pphi)).real
                a = theta[k] * c
                phi = np.cos(a) * phi + 1j * np.sin(a) * Pphi
                lam = np.cos(a) * lam + 1j * np.sin(a) * (phase * lam[src])
        return energy, grad


def _spin(mode):
    return mode & 1


def build_uccsd(active_space: ActiveSpace, orbital_energies=None) -> Ansatz:
    """Spin-orbital UCCSD; singles before doubles, lowest indices first."""
    n_orb = active_space.n_active
    n_occ = len(active_space.active_occupied)
    n_q = 2 * n_orb
    occ = list(range(2 * n_occ))
    vir = list(range(2 * n_occ, n_q))
    excitations = []
    for i in occ:
        for a in vir:
            if _spin(i) == _spin(a):
                excitations.append(((a,), (i,)))
    for ii, i in enumerate(occ):
        for j in occ[ii + 1:]:
            for ia, a in enumerate(vir):
                for b in vir[ia + 1:]:
                    if _spin(i) + _spin(j) == _spin(a) + _spin(b):
                        excitations.append(((a, b), (i, j)))
    generators = []
    for cre, ann in excitations:
        g = excitation_generator(list(cre), list(ann))
        # G = -i sum c P  <=>  iG = sum c P
        ps = to_pauli_sum({k: 1j * v for k, v in g.items()}, n_q)
        strings = list(ps.items())
        for s1, _ in strings:
            for s2, _ in strings:
                assert commute(s1, s2), "excitation generator strings must commute"
        generators.append(strings)
    ref = sum(1 << m for m in occ)
    eps = None if orbital_energies is None else np.asarray(orbital_energies, dtype=float)
    return Ansatz(n_q, 2 * n_occ, excitations, generators, ref, active_space, eps)


def trotterize(ansatz: Ansatz, theta, decompose=False, prepare_reference=False) -> Circuit:
    """One Pauli-exponential per generator string, generators in ansatz order (t = 1).

    ``decompose`` expands every exponential into basis changes and a CNOT
    parity ladder so gate noise has physical gates to act on.
    """
    theta = ansatz._check(theta)
    circ = Circuit(ansatz.n_qubits)
    if prepare_reference:
        for q in range(ansatz.n_qubits):
            if ansatz.reference >> q & 1:
                circ.append("X", [q])
    for k, gen in enumerate(ansatz.generators):
        for string, c in gen:
            angle = 2.0 * theta[k] * c
            if decompose:
                circ.extend(pauli_exponential_ladder(string, angle, ansatz.n_qubits))
            else:
                circ.append("PEXP", [q for q, _ in string], angle, string)
    return circ


def pauli_exponential_ladder(string, angle, n_qubits) -> Circuit:
    """exp(-i angle P / 2) from single-qubit rotations and CNOTs."""
    c = Circuit(n_qubits)
    qubits = [q for q, _ in string]
    if not qubits:
        return c
    for q, p in string:
        if p == "X":
            c.append("H", [q])
        elif p == "Y":
            c.append("Rz", [q], -np.pi / 2)
            c.append("H", [q])
    for a, b in zip(qubits, qubits[1:]):
        c.append("CNOT", [a, b])
    c.append("Rz", [qubits[-1]], angle)
    for a, b in reversed(list(zip(qubits, qubits[1:]))):
        c.append("CNOT", [a, b])
    for q, p in string:
        if p == "X":
            c.append("H", [q])
        elif p == "Y":
            c.append("H", [q])
            c.append("Rz", [q], np.pi / 2)
    return c


def mp2_initial_guess(ansatz: Ansatz, H) -> np.ndarray:
    """Zeros for singles; first-order amplitudes <D|H|HF> / (e_i + e_j - e_a - e_b) for doubles."""
    theta = np.zeros(ansatz.n_parameters)
    eps = ansatz.orbital_energies
    if eps is None:
        return theta
    hf = ansatz.reference_state().amplitudes
    Hhf = H @ hf
    for k, (cre, ann) in enumerate(ansatz.excitations):
        if len(cre) != 2:
            continue
        denom = eps[ann[0] // 2] + eps[ann[1] // 2] - eps[cre[0] // 2] - eps[cre[1] // 2]
        if abs(denom) < 1e-8:
            continue
        # G_k |HF> = T_k |HF>, the doubly excited determinant
        phi = np.zeros_like(hf)
        for string, c in ansatz.generators[k]:
            phi += -1j * c * apply_string(string, hf, ansatz.n_qubits)
        theta[k] = float(np.vdot(phi, Hhf).real) / denom
    return theta


@dataclass
class VqeResult:
    energy: float
    theta_opt: np.ndarray
    n_iterations: int
    converged: bool
    history: list
    n_evaluations: int = 0

    def to_json(self):
        return {"energy": self.energy, "theta_opt": [float(t) for t in self.theta_opt],
                "n_iterations": self.n_iterations, "converged": self.converged,
                "history": [float(h) for h in self.history], "n_evaluations": self.n_evaluations}

    @classmethod
    def from_json(cls, data):
        return cls(data["energy"], np.asarray(data["theta_opt"]), data["n_iterations"],
                   data["converged"], list(data["history"]), data.get("n_evaluations", 0))


def run_vqe(problem: PauliSum, ansatz: Ansatz, method="BFGS", tol=1e-8, max_evals=5000,
            theta0=None) -> VqeResult:
    if problem.n_qubits != ansatz.n_qubits:
        raise ContractError("Hamiltonian and ansatz qubit counts differ")
    H = problem.to_sparse()
    if ansatz.n_parameters == 0:
        e = float(np.vdot(ansatz.reference_state().amplitudes,
                          H @ ansatz.reference_state().amplitudes).real)
        return VqeResult(e, np.zeros(0), 0, True, [e], 1)
    theta0 = mp2_initial_guess(ansatz, H) if theta0 is None else np.asarray(theta0, float)
    history = []
    nfev = [0]

    def fun(t):
        nfev[0] += 1
        return ansatz.energy_and_gradient(t, H)

    def cb(xk):
        history.append(ansatz.energy_and_gradient(xk, H)[0])

    res = minimize(fun, theta0, jac=True, method=method, callback=cb,
                   options={"gtol": 1e-7, "maxiter": max_evals})
    energy = float(res.fun)
    if not history:
        history.append(energy)
    small_step = len(history) > 1 and abs(history[-2] - history[-1]) < tol
    grad_ok = np.linalg.norm(np.atleast_1d(getattr(res, "jac", 0.0))) < 1e-5
    converged = nfev[0] <= max_evals and (bool(res.success) or small_step or grad_ok)
    if not converged:
        logger.warning("VQE not converged: %s", res.message)
    return VqeResult(energy, np.asarray(res.x), int(res.nit), converged, history, nfev[0])


@dataclass
class NoisyEstimate:
    seed: int
    n_shots: int
    energy: float
    groups: list
    tables: list


class NoisyEvaluator:
    """Fixed-parameter shot sampler for one operator, ansatz and noise model.

    Pre-readout outcome distributions are computed once per measurement
    group (exactly, by density matrix, for small registers), so repeated
    draws at different shot counts and seeds only cost the sampling.
    """

    def __init__(self, problem: PauliSum, ansatz: Ansatz, theta, noise: NoiseModel | None = None):
        if problem.n_qubits != ansatz.n_qubits:
            raise ContractError("operator and ansatz qubit counts differ")
        self.problem = problem
        self.ansatz = ansatz
        self.theta = ansatz._check(theta)
        self.noise = noise
        self.groups = group_qubitwise(problem)
        n = ansatz.n_qubits
        self._trajectory = noise is not None and noise.has_gate_noise and n > DENSITY_MAX_QUBITS
        if noise is not None and noise.has_gate_noise:
            self._circuit = trotterize(ansatz, self.theta, decompose=True, prepare_reference=True)
            self._start = Statevector.basis_state(n, 0)
        else:
            self._circuit = None
            self._start = ansatz.state(self.theta)
        self._dists = None if self._trajectory else [
            outcome_distribution(self._start, g, noise, self._circuit) for g in self.groups
        ]

    def sample(self, n_shots: int, rng=None) -> list:
        rng = np.random.default_rng(rng)
        if self._trajectory:
            return [sample_shots(self._start, g, n_shots, self.noise, rng, self._circuit,
                                 method="trajectory") for g in self.groups]
        return [sample_distribution(d, n_shots, g.basis, self.noise, rng)
                for g, d in zip(self.groups, self._dists)]

    def estimate(self, tables) -> float:
        return estimate_energy(self.problem, self.groups, [t.probabilities() for t in tables])


def noisy_reevaluate(theta_opt, problem: PauliSum, ansatz: Ansatz, noise: NoiseModel | None,
                     n_shots: int, seeds) -> list[NoisyEstimate]:
    """Fixed-parameter energy estimates from sampled shots, one per seed (no re-optimization)."""
    ev = NoisyEvaluator(problem, ansatz, theta_opt, noise)
    out = []
    for seed in seeds:
        tables = ev.sample(n_shots, np.random.default_rng(seed))
        out.append(NoisyEstimate(seed, n_shots, ev.estimate(tables), ev.groups, tables))
    return out


def vqe_kernel(h_act, V_act, n_elec, e_const, ctx, options=None):
    """Active-space UCCSD-VQE solver plugged into the DMET fragment solver."""
    from qdmet.dmet import active_energy_operator

    options = dict(options or {})
    n_act = h_act.shape[0]
    n_occ_act = ctx.n_active_occ
    if 2 * n_occ_act != n_elec:
        raise ContractError("active electrons must fill the active occupied orbitals")
    space = ActiveSpace((), tuple(range(n_occ_act)), tuple(range(n_occ_act, n_act)), ())
    ansatz = build_uccsd(space, ctx.mo_energies[ctx.active])
    ham = jordan_wigner(h_act, V_act, e_const, max_qubits=options.get("max_qubits", 16))
    res = run_vqe(ham, ansatz, method=options.get("method", "BFGS"),
                  tol=options.get("tol", 1e-8), max_evals=options.get("max_evals", 5000))
    psi = ansatz.state_vector(res.theta_opt)
    P, G = spin_summed_rdms(psi, n_act)
    w1, w2, const = active_energy_operator(ctx)
    e_op = jordan_wigner(w1, w2, const, hermitian_part=True,
                         max_qubits=options.get("max_qubits", 16))
    details = {
        "vqe": res,
        "ansatz": ansatz,
        "hamiltonian": ham,
        "energy_operator": e_op,
        "n_elec_active": n_elec,
        "converged": res.converged,
    }
    return P, G, details
