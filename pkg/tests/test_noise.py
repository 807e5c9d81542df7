import math

import numpy as np
import pytest

from qproc_sim.circuits import build_shor, output_distribution, run_circuit
from qproc_sim.hilbert import (
    DensityMatrix,
    SpaceLayout,
    partial_trace,
    permute_factors,
    qubit_ket,
)
from qproc_sim.noise import (
    NoiseParams,
    apply_noise_step,
    damping_kraus,
    dephasing_kraus,
)

RNG = np.random.default_rng(99)


def damping_only(t1, n=3):
    return NoiseParams(t1=(t1,) * n, t_phi=(math.inf,) * n)


def random_two_qubit_dm():
    a = RNG.normal(size=(4, 4)) + 1j * RNG.normal(size=(4, 4))
    rho = a @ a.conj().T
    return DensityMatrix(SpaceLayout.qubits(2), rho / np.trace(rho))


def trace_distance(rho, sigma):
    return 0.5 * np.abs(np.linalg.eigvalsh(rho.elements - sigma.elements)).sum()


# ---------------------------------------------------------------------------
# Kraus pairs
# ---------------------------------------------------------------------------

def test_damping_zero_interval():
    K0, K1 = damping_kraus(0.0, 400.0)
    np.testing.assert_allclose(K0, np.eye(2))
    np.testing.assert_allclose(K1, np.zeros((2, 2)))


def test_damping_excited_population_decay():
    K0, K1 = damping_kraus(400.0, 400.0)
    rho_e = np.diag([0.0, 1.0]).astype(complex)
    after = K0 @ rho_e @ K0.conj().T + K1 @ rho_e @ K1.conj().T
    assert after[1, 1].real == pytest.approx(math.exp(-1), abs=1e-12)
    assert after[0, 0].real == pytest.approx(1 - math.exp(-1), abs=1e-12)


def test_kraus_completeness():
    for _ in range(10):
        dt = float(RNG.uniform(0, 500))
        t = float(RNG.uniform(50, 1000))
        for pair in (damping_kraus(dt, t), dephasing_kraus(dt, t)):
            total = sum(K.conj().T @ K for K in pair)
            np.testing.assert_allclose(total, np.eye(2), atol=1e-12)


def test_damping_rejects_negative_dt():
    with pytest.raises(ValueError):
        damping_kraus(-1.0, 100.0)
    with pytest.raises(ValueError):
        dephasing_kraus(-1.0, 100.0)


def test_dephasing_zero_interval_is_identity():
    K0, K1 = dephasing_kraus(0.0, 200.0)
    np.testing.assert_allclose(K0, np.eye(2))
    np.testing.assert_allclose(K1, np.zeros((2, 2)))


def test_dephasing_equator_coherence_decay():
    K0, K1 = dephasing_kraus(200.0, 200.0)
    plus = np.full((2, 2), 0.5, dtype=complex)
    after = K0 @ plus @ K0.conj().T + K1 @ plus @ K1.conj().T
    # Bloch x-component = 2 Re rho_ge
    assert 2 * after[0, 1].real == pytest.approx(math.exp(-1), abs=1e-12)
    np.testing.assert_allclose(np.diag(after).real, [0.5, 0.5], atol=1e-12)


def test_dephasing_preserves_diagonal_states():
    rho = DensityMatrix(SpaceLayout.qubits(1), np.diag([0.3, 0.7]).astype(complex))
    params = NoiseParams(t1=(math.inf,), t_phi=(123.0,))
    after = apply_noise_step(rho, params, dt=57.0)
    np.testing.assert_allclose(after.elements, rho.elements, atol=1e-12)


# ---------------------------------------------------------------------------
# composite channel
# ---------------------------------------------------------------------------

def test_infinite_times_are_identity_channel():
    rho = random_two_qubit_dm()
    params = NoiseParams(t1=(math.inf, math.inf), t_phi=(math.inf, math.inf))
    after = apply_noise_step(rho, params, dt=1000.0)
    np.testing.assert_allclose(after.elements, rho.elements, atol=1e-12)


def test_damping_fixed_point_is_ground():
    ghz = (qubit_ket("ggg").amplitudes + qubit_ket("eee").amplitudes) / math.sqrt(2)
    rho = DensityMatrix(SpaceLayout.qubits(3), np.outer(ghz, ghz.conj()))
    after = apply_noise_step(rho, damping_only(1.0), dt=1e5)
    target = np.zeros((8, 8), dtype=complex)
    target[0, 0] = 1.0
    np.testing.assert_allclose(after.elements, target, atol=1e-12)


def test_noise_preserves_trace():
    rho = random_two_qubit_dm()
    params = NoiseParams.default(2)
    after = apply_noise_step(rho, params, dt=37.0)
    assert np.trace(after.elements).real == pytest.approx(1.0, abs=1e-12)


def test_noise_commutes_with_relabeling_for_symmetric_params():
    rho = random_two_qubit_dm()
    params = NoiseParams.default(2)
    swapped_first = apply_noise_step(permute_factors(rho, [1, 0]), params, dt=25.0)
    noise_first = permute_factors(apply_noise_step(rho, params, dt=25.0), [1, 0])
    np.testing.assert_allclose(swapped_first.elements, noise_first.elements, atol=1e-12)


# ---------------------------------------------------------------------------
# circuit-level behavior
# ---------------------------------------------------------------------------

def test_control_circuit_fidelity_window_and_monotonicity():
    # two H gates separated by two entangling-gate idle slots; damping only
    circuit = build_shor("control")
    fidelities = []
    for t1 in (200.0, 400.0, 800.0, 1600.0):
        run = run_circuit(circuit, mode="noisy_density", noise=damping_only(t1))
        register = partial_trace(run.final, {0})
        fidelities.append(register.elements[0, 0].real)
    assert all(0.8 < f < 1.0 for f in fidelities)
    assert all(a < b for a, b in zip(fidelities, fidelities[1:]))


def test_noisy_run_converges_to_ideal():
    circuit = build_shor("three_qubit")
    big = 1e9
    noisy = run_circuit(circuit, mode="noisy_density",
                        noise=NoiseParams(t1=(big,) * 3, t_phi=(big,) * 3))
    ideal = run_circuit(circuit).final.density_matrix()
    assert trace_distance(noisy.final, ideal) <= 1e-6


def test_noisy_shor_success_probability_bounded_and_monotone():
    circuit = build_shor("three_qubit")
    successes = []
    for t1 in (200.0, 400.0, 800.0, 1600.0):
        run = run_circuit(circuit, mode="noisy_density",
                          noise=NoiseParams(t1=(t1,) * 3, t_phi=(200.0,) * 3))
        dist = output_distribution(run.final, circuit.output_bits)
        successes.append(dist[0b10])
    assert all(s <= 0.5 + 1e-12 for s in successes)
    assert all(a < b for a, b in zip(successes, successes[1:]))


def test_apply_noise_step_rejects_bad_input():
    rho = random_two_qubit_dm()
    params = NoiseParams.default(2)
    with pytest.raises(ValueError):
        apply_noise_step(rho, params, dt=-1.0)


def test_noise_params_validation_and_roundtrip():
    with pytest.raises(ValueError):
        NoiseParams(t1=(0.0,), t_phi=(100.0,))
    params = NoiseParams.default(4)
    assert params.invented_default
    again = NoiseParams.from_dict(params.to_dict(), n_qubits=4)
    assert again == params
    no_dephasing = NoiseParams.from_dict({"t1_ns": [300, 300], "t_phi_ns": ["inf", "inf"]},
                                         n_qubits=2)
    assert math.isinf(no_dephasing.t_phi[0])
