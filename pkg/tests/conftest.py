"""Shared helpers: random circuit factories used by several oracle tests."""

import numpy as np
import pytest

from stvqc.sim import GATE_KINDS, GATE_KINDS_1Q, PARAMETRIC_KINDS, Circuit


def random_circuit(rng: np.random.Generator, n_qubits: int, n_ops: int,
                   trainable_frac: float = 0.5) -> tuple[Circuit, np.ndarray]:
    """A random circuit over the full gate set plus matching parameter values."""
    circuit = Circuit(n_qubits)
    kinds = GATE_KINDS if n_qubits > 1 else GATE_KINDS_1Q
    for _ in range(n_ops):
        kind = kinds[rng.integers(len(kinds))]
        if kind in GATE_KINDS_1Q:
            qubits = (int(rng.integers(n_qubits)),)
        else:
            a, b = rng.choice(n_qubits, size=2, replace=False)
            qubits = (int(a), int(b))
        if kind in PARAMETRIC_KINDS:
            if rng.random() < trainable_frac:
                circuit.add(kind, qubits, param=circuit.new_param())
            else:
                circuit.add(kind, qubits, angle=float(rng.uniform(-np.pi, np.pi)))
        else:
            circuit.add(kind, qubits)
    params = rng.uniform(-np.pi, np.pi, size=circuit.n_params)
    return circuit, params


def random_rotation_circuit(rng: np.random.Generator, n_qubits: int, n_ops: int
                            ) -> tuple[Circuit, np.ndarray]:
    """Random trainable RX/RY/RZ + CX circuits (every parameter is trainable)."""
    circuit = Circuit(n_qubits)
    for _ in range(n_ops):
        if n_qubits > 1 and rng.random() < 0.3:
            a, b = rng.choice(n_qubits, size=2, replace=False)
            circuit.add("CX", (int(a), int(b)))
        else:
            kind = ("RX", "RY", "RZ")[rng.integers(3)]
            circuit.add(kind, int(rng.integers(n_qubits)), param=circuit.new_param())
    params = rng.uniform(-np.pi, np.pi, size=circuit.n_params)
    return circuit, params


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
