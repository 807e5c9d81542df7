"""Open-system layer: amplitude damping (T1) and pure dephasing (T_phi).

Noise is charged at gate granularity in density-matrix mode: each gate's
unitary is followed by per-qubit Kraus maps for the gate's duration. The
default coherence times are invented placeholders (the device's values are
not published) and are flagged as such wherever they are serialized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .hilbert import DensityMatrix

DEFAULT_T1_NS = 400.0
DEFAULT_TPHI_NS = 200.0
DEFAULT_GATE_TIME_1Q_NS = 10.0
DEFAULT_GATE_TIME_2Q_NS = 50.0


@dataclass(frozen=True)
class NoiseParams:
    """Per-qubit coherence times (ns) and nominal gate durations (ns)."""

    t1: tuple[float, ...]
    t_phi: tuple[float, ...]
    gate_time_1q: float = DEFAULT_GATE_TIME_1Q_NS
    gate_time_2q: float = DEFAULT_GATE_TIME_2Q_NS
    invented_default: bool = False

    def __post_init__(self):
        object.__setattr__(self, "t1", tuple(float(v) for v in self.t1))
        object.__setattr__(self, "t_phi", tuple(float(v) for v in self.t_phi))
        if len(self.t1) != len(self.t_phi):
            raise ValueError("t1 and t_phi must list the same number of qubits")
        for name in ("t1", "t_phi"):
            for i, v in enumerate(getattr(self, name)):
                if not v > 0:
                    raise ValueError(f"{name}[{i}] must be > 0 (use inf to disable)")
        if not (self.gate_time_1q > 0 and self.gate_time_2q > 0):
            raise ValueError("gate times must be > 0")

    @classmethod
    def default(cls, n_qubits: int = 4) -> "NoiseParams":
        return cls(
            t1=(DEFAULT_T1_NS,) * n_qubits,
            t_phi=(DEFAULT_TPHI_NS,) * n_qubits,
            invented_default=True,
        )

    @classmethod
    def from_dict(cls, doc: dict, n_qubits: int = 4) -> "NoiseParams":
        def times(key, fallback):
            raw = doc.get(key)
            if raw is None:
                return (fallback,) * n_qubits
            return tuple(math.inf if v in (None, "inf") else float(v) for v in raw)

        return cls(
            t1=times("t1_ns", DEFAULT_T1_NS),
            t_phi=times("t_phi_ns", DEFAULT_TPHI_NS),
            gate_time_1q=float(doc.get("gate_time_1q_ns", DEFAULT_GATE_TIME_1Q_NS)),
            gate_time_2q=float(doc.get("gate_time_2q_ns", DEFAULT_GATE_TIME_2Q_NS)),
            invented_default=bool(doc.get("invented_default", False)),
        )

    def to_dict(self) -> dict:
        encode = lambda v: "inf" if math.isinf(v) else v
        return {
            "t1_ns": [encode(v) for v in self.t1],
            "t_phi_ns": [encode(v) for v in self.t_phi],
            "gate_time_1q_ns": self.gate_time_1q,
            "gate_time_2q_ns": self.gate_time_2q,
            "invented_default": self.invented_default,
        }


def damping_kraus(dt: float, t1: float) -> tuple[np.ndarray, np.ndarray]:
    """Amplitude-damping pair for an interval dt: decay probability 1 - e^(-dt/t1)."""
    if dt < 0:
        raise ValueError("dt must be >= 0")
    gamma = 1.0 - math.exp(-dt / t1)
    K0 = np.array([[1.0, 0.0], [0.0, math.sqrt(1.0 - gamma)]], dtype=complex)
    K1 = np.array([[0.0, math.sqrt(gamma)], [0.0, 0.0]], dtype=complex)
    return K0, K1


def dephasing_kraus(dt: float, t_phi: float) -> tuple[np.ndarray, np.ndarray]:
    """Pure-dephasing pair: coherences shrink by e^(-dt/t_phi), populations fixed."""
    if dt < 0:
        raise ValueError("dt must be >= 0")
    p = (1.0 - math.exp(-dt / t_phi)) / 2.0
    K0 = math.sqrt(1.0 - p) * np.eye(2, dtype=complex)
    K1 = math.sqrt(p) * np.diag([1.0, -1.0]).astype(complex)
    return K0, K1


def _embed_single(op: np.ndarray, dims: Sequence[int], position: int) -> np.ndarray:
    mat = np.eye(1, dtype=complex)
    for k, dim in enumerate(dims):
        mat = np.kron(mat, op if k == position else np.eye(dim, dtype=complex))
    return mat


def _apply_channel(rho: np.ndarray, kraus: Sequence[np.ndarray],
                   dims: Sequence[int], position: int) -> np.ndarray:
    out = np.zeros_like(rho)
    for K in kraus:
        big = _embed_single(K, dims, position)
        out += big @ rho @ big.conj().T
    return out


def apply_noise_step(
    rho: DensityMatrix,
    params: NoiseParams,
    dt: float,
    qubits: Sequence[int] | None = None,
) -> DensityMatrix:
    """Damping then dephasing on each listed qubit factor for a duration dt.

    Trace-preserving and completely positive by construction (operator-sum
    form with complete Kraus pairs).
    """
    if dt < 0:
        raise ValueError("dt must be >= 0")
    dims = rho.layout.dims
    if qubits is None:
        qubits = tuple(k for k, f in enumerate(rho.layout.factors) if f.kind == "qubit")
    mat = np.array(rho.elements, copy=True)
    for q in qubits:
        if rho.layout.factors[q].kind != "qubit":
            raise ValueError(f"factor {q} is not a qubit")
        mat = _apply_channel(mat, damping_kraus(dt, params.t1[q]), dims, q)
        mat = _apply_channel(mat, dephasing_kraus(dt, params.t_phi[q]), dims, q)
    mat = 0.5 * (mat + mat.conj().T)
    return DensityMatrix(rho.layout, mat)
