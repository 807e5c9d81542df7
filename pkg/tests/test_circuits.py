import math

import numpy as np
import pytest

from qproc_sim.circuits import (
    Circuit,
    FactoringResult,
    Gate,
    Idle,
    analyze_output_counts,
    build_shor,
    circuit_from_text,
    circuit_to_text,
    circuit_unitary,
    classical_factors,
    extract_period,
    factor_fifteen,
    gate_unitary,
    output_distribution,
    run_circuit,
    sample_output,
)
from qproc_sim.hilbert import qubit_ket

RNG = np.random.default_rng(7)


def ket(label):
    return qubit_ket(label).amplitudes


# ---------------------------------------------------------------------------
# gate unitaries
# ---------------------------------------------------------------------------

def test_hadamard_squares_to_identity():
    H = gate_unitary(Gate("H", (1,)), 3).elements
    np.testing.assert_allclose(H @ H, np.eye(8), atol=1e-14)


def test_cnot_expansion_is_canonical_permutation():
    cnot = gate_unitary(Gate("CNOT", (0, 1)), 2).elements
    expected = np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    )
    np.testing.assert_allclose(cnot, expected, atol=1e-12)


def test_cnot_reversed_control_target():
    cnot = gate_unitary(Gate("CNOT", (1, 0)), 2).elements
    # control is qubit 1 (least significant), target qubit 0
    expected = np.array(
        [[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=complex
    )
    np.testing.assert_allclose(cnot, expected, atol=1e-12)


def test_x_flips_ground_state():
    X = gate_unitary(Gate("X", (0,)), 1)
    np.testing.assert_allclose(X.apply(qubit_ket("g")).amplitudes, ket("e"))


def test_cz_and_iswap_matrices():
    cz = gate_unitary(Gate("CZ", (0, 1)), 2).elements
    np.testing.assert_allclose(cz, np.diag([1, 1, 1, -1]))
    iswap = gate_unitary(Gate("ISWAP", (0, 1)), 2).elements
    assert iswap[0b01, 0b10] == 1j and iswap[0b10, 0b01] == 1j


def test_gate_validation():
    with pytest.raises(ValueError):
        Gate("CNOT", (1, 1))
    with pytest.raises(ValueError):
        Gate("H", (0, 1))
    with pytest.raises(ValueError):
        Gate("SWAPX", (0,))


# ---------------------------------------------------------------------------
# compiled circuits
# ---------------------------------------------------------------------------

def test_three_qubit_structure():
    circuit = build_shor("three_qubit")
    assert len(circuit.gates) == 4
    assert circuit.breakpoints == {"step1": 2, "step2": 3, "step3": 4}
    assert circuit.measured_register == (0,)


def test_control_variant_has_no_entangling_gates():
    circuit = build_shor("control")
    assert all(len(g.targets) == 1 for g in circuit.gates)
    idles = [op for op in circuit.ops if isinstance(op, Idle)]
    assert len(idles) == 2 and all(idle.duration_class == "2q" for idle in idles)


def test_four_and_three_qubit_outputs_agree():
    three = build_shor("three_qubit")
    four = build_shor("four_qubit")
    dist3 = output_distribution(run_circuit(three).final, three.output_bits)
    dist4 = output_distribution(run_circuit(four).final, four.output_bits)
    np.testing.assert_allclose(dist3, dist4, atol=1e-12)
    # the redundant register bit never fires
    assert dist4[0b01] == pytest.approx(0.0, abs=1e-12)
    assert dist4[0b11] == pytest.approx(0.0, abs=1e-12)


def test_unknown_variant():
    with pytest.raises(ValueError):
        build_shor("five_qubit")


# ---------------------------------------------------------------------------
# execution and breakpoints
# ---------------------------------------------------------------------------

def test_breakpoint_states_match_targets():
    run = run_circuit(build_shor("three_qubit"))
    bell_pair = (ket("ggg") + ket("eeg")) / math.sqrt(2)
    ghz = (ket("ggg") + ket("eee")) / math.sqrt(2)
    psi3 = (ket("ggg") + ket("egg") + ket("gee") - ket("eee")) / 2

    for name, target in (("step1", bell_pair), ("step2", ghz), ("step3", psi3)):
        state = run.breakpoint_states[name]
        fidelity = abs(np.vdot(target, state.amplitudes)) ** 2
        assert fidelity == pytest.approx(1.0, abs=1e-9), name


def test_control_circuit_returns_ground():
    run = run_circuit(build_shor("control"))
    np.testing.assert_allclose(run.final.amplitudes, ket("ggg"), atol=1e-12)


def test_four_qubit_breakpoints_reduce_to_three_qubit_states():
    from qproc_sim.hilbert import partial_trace

    circuit = build_shor("four_qubit")
    run = run_circuit(circuit)
    ghz = (ket("ggg") + ket("eee")) / math.sqrt(2)
    reduced = partial_trace(run.breakpoint_states["step2"].density_matrix(),
                            set(circuit.analysis_qubits))
    fidelity = np.real(ghz.conj() @ reduced.elements @ ghz)
    assert fidelity == pytest.approx(1.0, abs=1e-9)


def test_circuit_equals_ordered_gate_product():
    for _ in range(5):
        n = int(RNG.integers(2, 5))
        ops = []
        for _ in range(6):
            if RNG.random() < 0.5:
                kind = str(RNG.choice(["X", "Y", "Z", "H", "X_half", "Y_half"]))
                ops.append(Gate(kind, (int(RNG.integers(n)),)))
            else:
                kind = str(RNG.choice(["CZ", "CNOT", "ISWAP"]))
                pair = RNG.choice(n, size=2, replace=False)
                ops.append(Gate(kind, (int(pair[0]), int(pair[1]))))
        circuit = Circuit(n_qubits=n, ops=tuple(ops))
        run = run_circuit(circuit)
        via_product = circuit_unitary(circuit).apply(qubit_ket("g" * n))
        np.testing.assert_allclose(run.final.amplitudes, via_product.amplitudes, atol=1e-12)


def test_noisy_mode_requires_params():
    with pytest.raises(ValueError):
        run_circuit(build_shor("three_qubit"), mode="noisy_density")


# ---------------------------------------------------------------------------
# output sampling
# ---------------------------------------------------------------------------

def test_ideal_output_distribution():
    circuit = build_shor("three_qubit")
    dist = output_distribution(run_circuit(circuit).final, circuit.output_bits)
    np.testing.assert_allclose(dist, [0.5, 0.0, 0.5, 0.0], atol=1e-12)


def test_sampled_success_frequency_within_binomial_band():
    result, _ = factor_fifteen(shots=150_000, seed=7)
    freq = result.output_counts["10"] / result.shots
    # binomial 3σ band around 0.5: σ = sqrt(0.25/150000) ≈ 0.0013
    assert abs(freq - 0.5) <= 3 * math.sqrt(0.25 / 150_000)
    assert result.period_r == 2
    assert result.factors == (3, 5)
    assert result.success_probability == pytest.approx(freq)


def test_control_circuit_always_fails():
    result, _ = factor_fifteen(variant="control", shots=2000, seed=3)
    assert result.output_counts["00"] == 2000
    assert result.period_r == 0
    assert result.factors is None
    assert result.success_probability == 0.0


def test_sampling_is_deterministic_and_sums_to_shots():
    circuit = build_shor("three_qubit")
    state = run_circuit(circuit).final
    a = sample_output(state, circuit.output_bits, 5000, seed=11)
    b = sample_output(state, circuit.output_bits, 5000, seed=11)
    assert a == b
    assert sum(a.values()) == 5000


def test_sampling_total_variation_convergence():
    circuit = build_shor("three_qubit")
    state = run_circuit(circuit).final
    exact = output_distribution(state, circuit.output_bits)
    for shots in (10**3, 10**4, 10**5):
        counts = sample_output(state, circuit.output_bits, shots, seed=13)
        freqs = np.array([counts[format(m, "02b")] for m in range(4)]) / shots
        tv = 0.5 * np.abs(freqs - exact).sum()
        assert tv <= 5 / math.sqrt(shots)


def test_sample_output_rejects_empty_register():
    state = run_circuit(build_shor("three_qubit")).final
    with pytest.raises(ValueError):
        sample_output(state, (), 10, seed=0)


# ---------------------------------------------------------------------------
# classical postprocessing
# ---------------------------------------------------------------------------

def test_extract_period_examples():
    assert extract_period("10", 2) == 2
    assert extract_period("00", 2) == 0
    assert extract_period("01", 2) == 4
    with pytest.raises(ValueError):
        extract_period("102", 3)


def test_classical_factors_examples():
    assert classical_factors(4, 2, 15) == (3, 5)
    assert classical_factors(4, 0, 15) is None
    assert classical_factors(7, 4, 15) == (3, 5)
    with pytest.raises(ValueError):
        classical_factors(5, 2, 15)  # gcd(5, 15) != 1


def test_classical_factors_against_order_oracle():
    # brute-force multiplicative order; factors must be valid whenever returned
    for N in range(4, 33):
        for a in range(2, N - 1):
            if math.gcd(a, N) != 1:
                continue
            r, x = 1, a % N
            while x != 1:
                x = (x * a) % N
                r += 1
            out = classical_factors(a, r, N)
            if out is not None:
                p, q = out
                assert p * q == N and 1 < p < N and 1 < q < N


def test_period_success_probability_is_half():
    circuit = build_shor("three_qubit")
    dist = output_distribution(run_circuit(circuit).final, circuit.output_bits)
    success = sum(
        p for m, p in enumerate(dist)
        if extract_period(format(m, "02b"), 2) == 2
    )
    assert success == pytest.approx(0.5, abs=1e-12)


def test_factoring_result_invariants():
    with pytest.raises(ValueError):
        FactoringResult(15, 4, 10, {"00": 4, "10": 4}, 2, (3, 5), 0.4)
    with pytest.raises(ValueError):
        FactoringResult(15, 4, 8, {"00": 4, "10": 4}, 2, (2, 5), 0.5)


def test_analyze_output_counts_prefers_frequent_valid_outcome():
    r, factors, success = analyze_output_counts({"00": 50, "10": 40, "01": 10}, a=4, N=15)
    assert (r, factors) == (2, (3, 5))
    assert success == pytest.approx(0.4)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("variant", ["three_qubit", "four_qubit", "control"])
def test_circuit_text_roundtrip(variant):
    circuit = build_shor(variant)
    text = circuit_to_text(circuit)
    again = circuit_from_text(text)
    assert again == circuit
    assert circuit_to_text(again) == text


def test_circuit_text_format():
    text = circuit_to_text(build_shor("three_qubit"))
    lines = text.splitlines()
    assert lines[0] == "NQUBITS 3"
    assert "H 0" in lines
    assert "CNOT 0 1" in lines
    assert "BREAK step1" in lines
