"""Gate-referenced stochastic noise model and shot tables."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from qdmet.errors import ConfigError

# calibrated ibm_lagos-style ranges used for the default model
READOUT_RANGE = (5.1e-3, 2.48e-2)
DEPOL_1Q_RANGE = (1.868e-4, 3.025e-4)
DEPOL_2Q_RANGE = (4.587e-3, 1.037e-2)


@dataclass(frozen=True, eq=False)
class NoiseModel:
    readout_flip: tuple  # per qubit (p(1|0), p(0|1))
    depol_1q: tuple  # per qubit
    depol_2q: np.ndarray  # symmetric (n, n) matrix of per-pair CNOT error probabilities
    seed: int | None = None

    def __post_init__(self):
        ro = tuple((float(a), float(b)) for a, b in self.readout_flip)
        d1 = tuple(float(p) for p in self.depol_1q)
        d2 = np.asarray(self.depol_2q, dtype=float)
        n = len(ro)
        if len(d1) != n or d2.shape != (n, n):
            raise ConfigError("noise model arrays disagree on the qubit count")
        probs = [p for pair in ro for p in pair] + list(d1) + list(d2.ravel())
        if any(p < 0 or p > 1 for p in probs):
            raise ConfigError("noise probabilities must lie in [0, 1]")
        object.__setattr__(self, "readout_flip", ro)
        object.__setattr__(self, "depol_1q", d1)
        object.__setattr__(self, "depol_2q", d2)

    @property
    def n_qubits(self) -> int:
        return len(self.readout_flip)

    @property
    def has_gate_noise(self) -> bool:
        return any(self.depol_1q) or bool(np.any(self.depol_2q))

    @classmethod
    def noiseless(cls, n_qubits) -> NoiseModel:
        return cls(((0.0, 0.0),) * n_qubits, (0.0,) * n_qubits, np.zeros((n_qubits, n_qubits)))

    @classmethod
    def readout_only(cls, n_qubits, p10, p01=None) -> NoiseModel:
        p01 = p10 if p01 is None else p01
        return cls(((p10, p01),) * n_qubits, (0.0,) * n_qubits, np.zeros((n_qubits, n_qubits)))

    @classmethod
    def default(cls, n_qubits, seed=0, readout=READOUT_RANGE, depol_1q=DEPOL_1Q_RANGE,
                depol_2q=DEPOL_2Q_RANGE) -> NoiseModel:
        """Parameters drawn uniformly per qubit / qubit pair from the calibrated ranges."""
        rng = np.random.default_rng(seed)
        ro = rng.uniform(*readout, size=(n_qubits, 2))
        d1 = rng.uniform(*depol_1q, size=n_qubits)
        upper = rng.uniform(*depol_2q, size=(n_qubits, n_qubits))
        d2 = np.triu(upper, 1)
        d2 = d2 + d2.T
        return cls(tuple(map(tuple, ro)), tuple(d1), d2, seed)

    @classmethod
    def from_config(cls, section: dict, n_qubits: int) -> NoiseModel:
        """Build from a config mapping.

        Keys: ``model`` ("default" | "none" | "custom"), ``seed``, and for
        custom models ``readout`` (one [p10, p01] pair or one per qubit),
        ``depol_1q`` and ``depol_2q`` (scalar or per-qubit / per-pair lists).
        """
        kind = section.get("model", "default")
        seed = section.get("seed", 0)
        if kind == "none":
            return cls.noiseless(n_qubits)
        if kind == "default":
            return cls.default(n_qubits, seed)
        if kind != "custom":
            raise ConfigError(f"unknown noise model {kind!r}")
        ro = section.get("readout", [0.0, 0.0])
        if np.ndim(ro) == 1:
            ro = [ro] * n_qubits
        d1 = section.get("depol_1q", 0.0)
        d1 = [d1] * n_qubits if np.ndim(d1) == 0 else d1
        d2 = section.get("depol_2q", 0.0)
        if np.ndim(d2) == 0:
            d2 = np.full((n_qubits, n_qubits), float(d2))
            np.fill_diagonal(d2, 0.0)
        return cls(tuple(map(tuple, ro)), tuple(d1), np.asarray(d2), seed)

    def to_json(self):
        return {
            "readout_flip": [list(p) for p in self.readout_flip],
            "depol_1q": list(self.depol_1q),
            "depol_2q": self.depol_2q.tolist(),
            "seed": self.seed,
        }


@dataclass(frozen=True)
class ShotTable:
    outcomes: dict  # bitstring (qubit 0 first) -> count
    n_shots: int
    basis: str  # measured basis per qubit, e.g. "XXYZ"
    flags: tuple = field(default=())

    def __post_init__(self):
        total = sum(self.outcomes.values())
        if total != self.n_shots:
            raise ValueError(f"counts sum to {total}, not n_shots={self.n_shots}")

    def probabilities(self) -> dict:
        if self.n_shots == 0:
            return {}
        return {b: c / self.n_shots for b, c in self.outcomes.items()}

    def merge(self, other: ShotTable) -> ShotTable:
        if other.basis != self.basis:
            raise ValueError("cannot merge shot tables measured in different bases")
        out = dict(self.outcomes)
        for b, c in other.outcomes.items():
            out[b] = out.get(b, 0) + c
        return ShotTable(dict(sorted(out.items())), self.n_shots + other.n_shots, self.basis,
                         tuple(dict.fromkeys(self.flags + other.flags)))

    def to_json(self):
        return {"outcomes": self.outcomes, "n_shots": self.n_shots, "basis": self.basis,
                "flags": list(self.flags)}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, data) -> ShotTable:
        if isinstance(data, str):
            data = json.loads(data)
        return cls({str(k): int(v) for k, v in data["outcomes"].items()}, int(data["n_shots"]),
                   data["basis"], tuple(data.get("flags", ())))
