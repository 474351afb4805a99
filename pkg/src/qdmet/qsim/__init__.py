from qdmet.qsim.jw import jordan_wigner, number_operator
from qdmet.qsim.measure import (
    MeasurementGroup,
    basis_change_circuit,
    estimate_energy,
    estimator_variance,
    group_qubitwise,
    make_group,
    sample_shots,
)
from qdmet.qsim.noise import NoiseModel, ShotTable
from qdmet.qsim.pauli import PauliSum, parse_label, to_label
from qdmet.qsim.statevector import Circuit, Gate, Statevector, apply_circuit, expectation

__all__ = [
    "Circuit", "Gate", "MeasurementGroup", "NoiseModel", "PauliSum", "ShotTable",
    "Statevector", "apply_circuit", "basis_change_circuit", "estimate_energy",
    "estimator_variance", "expectation", "group_qubitwise", "jordan_wigner", "make_group",
    "number_operator", "parse_label", "sample_shots", "to_label",
]
