"""Desk-scale simulator of a four-qubit / five-resonator superconducting processor."""

__version__ = "0.1.0"

from .circuits import (
    Circuit,
    FactoringResult,
    Gate,
    build_shor,
    classical_factors,
    extract_period,
    factor_fifteen,
    gate_unitary,
    run_circuit,
    sample_output,
)
from .dynamics import (
    DeviceConfig,
    FrequencySchedule,
    OccupationTrace,
    Segment,
    build_jc_hamiltonian,
    fit_oscillation_frequency,
    prepare_shared_excitation,
    propagate,
    pump_fock,
    simultaneous_resonance,
    swap_spectroscopy,
)
from .hilbert import (
    DensityMatrix,
    QuantumOperator,
    QuantumState,
    SpaceLayout,
    hermitian_exponential,
    nearest_psd,
    partial_trace,
    tensor_product,
)
from .noise import NoiseParams, apply_noise_step, damping_kraus, dephasing_kraus
from .tomography import (
    MeasurementSetting,
    TomographyRecord,
    concurrence_eof,
    linear_entropy,
    phase_gauged_fidelity,
    reconstruct,
    simulate_tomography,
    state_fidelity,
    uhlmann_fidelity,
    witness_check,
)

__all__ = [
    "Circuit",
    "DensityMatrix",
    "DeviceConfig",
    "FactoringResult",
    "FrequencySchedule",
    "Gate",
    "MeasurementSetting",
    "NoiseParams",
    "OccupationTrace",
    "QuantumOperator",
    "QuantumState",
    "Segment",
    "SpaceLayout",
    "TomographyRecord",
    "apply_noise_step",
    "build_jc_hamiltonian",
    "build_shor",
    "classical_factors",
    "concurrence_eof",
    "damping_kraus",
    "dephasing_kraus",
    "extract_period",
    "factor_fifteen",
    "fit_oscillation_frequency",
    "gate_unitary",
    "hermitian_exponential",
    "linear_entropy",
    "nearest_psd",
    "partial_trace",
    "phase_gauged_fidelity",
    "prepare_shared_excitation",
    "propagate",
    "pump_fock",
    "reconstruct",
    "run_circuit",
    "sample_output",
    "simulate_tomography",
    "simultaneous_resonance",
    "state_fidelity",
    "swap_spectroscopy",
    "tensor_product",
    "uhlmann_fidelity",
    "witness_check",
]
