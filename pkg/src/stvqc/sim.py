"""State-vector simulation of parameterized circuits.

Conventions:
- Qubit 0 is the least-significant bit of the basis-state index, so the
  amplitude of |q_{n-1} ... q_1 q_0> sits at index sum(q_k << k).
- All amplitudes are complex128; gates are exact unitaries, so the norm is
  preserved to machine precision.
- Noise is simulated by Pauli-trajectory sampling on pure states (one state
  vector per shot), not by density matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import cos, pi, sin, sqrt

import numpy as np

GATE_KINDS_1Q = ("RX", "RY", "RZ", "X", "SX", "H")
GATE_KINDS_2Q = ("CX", "CRX", "CRY", "CRZ", "SWAP")
GATE_KINDS = GATE_KINDS_1Q + GATE_KINDS_2Q
PARAMETRIC_KINDS = ("RX", "RY", "RZ", "CRX", "CRY", "CRZ")

_SQ2 = 1.0 / sqrt(2.0)
_FIXED_1Q = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "H": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "SX": 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=complex),
}

_PAULI = {
    "X": _FIXED_1Q["X"],
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _rot(kind: str, theta: float) -> np.ndarray:
    c, s = cos(theta / 2.0), sin(theta / 2.0)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if kind == "RY":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == "RZ":
        return np.array([[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]], dtype=complex)
    raise ValueError(f"not a rotation kind: {kind}")


class SimulationError(Exception):
    """Raised for invalid gates, qubit indices, or unresolved parameters."""


@dataclass(frozen=True)
class GateOp:
    """One gate: a kind, its qubits, and a fixed angle or trainable-parameter index.

    For two-qubit controlled gates ``qubits`` is (control, target); for SWAP the
    order is irrelevant. Rotation-type kinds carry either a fixed ``angle`` or a
    trainable-parameter index; with a parameter the effective angle is
    ``scale * params[param] + (angle or 0)``, which lets compiled circuits keep
    their parameters through identities like CRZ -> RZ(theta/2) pairs.
    """

    kind: str
    qubits: tuple[int, ...]
    angle: float | None = None
    param: int | None = None
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise SimulationError(f"unknown gate kind {self.kind!r}")
        nq = 1 if self.kind in GATE_KINDS_1Q else 2
        if len(self.qubits) != nq:
            raise SimulationError(f"{self.kind} takes {nq} qubit(s), got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise SimulationError(f"duplicate qubit in {self.kind} on {self.qubits}")
        parametric = self.kind in PARAMETRIC_KINDS
        if parametric and self.angle is None and self.param is None:
            raise SimulationError(f"{self.kind} needs an angle or a parameter index")
        if not parametric and (self.angle is not None or self.param is not None):
            raise SimulationError(f"{self.kind} takes no angle")
        if self.param is None and self.scale != 1.0:
            raise SimulationError("scale applies only to parameterized gates")

    def resolve_angle(self, params: np.ndarray | None) -> float | None:
        if self.param is not None:
            if params is None or self.param >= len(params):
                raise SimulationError(f"unresolved parameter index {self.param}")
            return self.scale * float(params[self.param]) + (self.angle or 0.0)
        return self.angle


@dataclass
class Circuit:
    """Ordered gate list over a fixed qubit count.

    ``n_params`` is the number of distinct trainable-parameter indices; every
    index used by an op must lie in [0, n_params).
    """

    n_qubits: int
    ops: list[GateOp] = field(default_factory=list)
    n_params: int = 0

    def validate(self) -> None:
        for op in self.ops:
            for q in op.qubits:
                if not 0 <= q < self.n_qubits:
                    raise SimulationError(f"qubit {q} out of range for {self.n_qubits}-qubit circuit")
            if op.param is not None and not 0 <= op.param < self.n_params:
                raise SimulationError(f"parameter index {op.param} out of range [0, {self.n_params})")

    def add(self, kind: str, qubits: tuple[int, ...] | int, angle: float | None = None,
            param: int | None = None, scale: float = 1.0) -> "Circuit":
        if isinstance(qubits, int):
            qubits = (qubits,)
        self.ops.append(GateOp(kind, tuple(qubits), angle=angle, param=param, scale=scale))
        return self

    def new_param(self) -> int:
        self.n_params += 1
        return self.n_params - 1

    def extended(self, other: "Circuit") -> "Circuit":
        """Concatenate, shifting the other circuit's parameter indices up."""
        if other.n_qubits > self.n_qubits:
            raise SimulationError("cannot extend with a wider circuit")
        out = Circuit(self.n_qubits, list(self.ops), self.n_params)
        for op in other.ops:
            p = None if op.param is None else op.param + self.n_params
            out.ops.append(GateOp(op.kind, op.qubits, angle=op.angle, param=p, scale=op.scale))
        out.n_params += other.n_params
        return out


@dataclass
class StateVector:
    """Unit-norm complex amplitude array over n qubits."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (1 << self.n_qubits,):
            raise SimulationError(
                f"amplitude length {self.amplitudes.shape} != 2^{self.n_qubits}")
        if abs(np.linalg.norm(self.amplitudes) - 1.0) > 1e-9:
            raise SimulationError("state vector is not unit-norm")

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        amps = np.zeros(1 << n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class NoiseModel:
    """Depolarizing-style trajectory noise plus readout flips."""

    p1: float = 0.0
    p2: float = 0.0
    p_ro: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("p1", "p2", "p_ro"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise SimulationError(f"noise probability {name}={v} outside [0, 1]")


# -- batched kernels ---------------------------------------------------------
# psi has shape (batch, 2^n); qubit q maps to axis 1 + (n-1-q) after reshaping
# to [batch] + [2]*n in C order.

def _apply_1q_batch(psi: np.ndarray, m: np.ndarray, q: int, n: int) -> np.ndarray:
    b = psi.shape[0]
    lo, hi = 1 << q, 1 << (n - 1 - q)
    psi = psi.reshape(b, hi, 2, lo)
    out = np.einsum("ij,bhjl->bhil", m, psi)
    return out.reshape(b, 1 << n)


def _apply_2q_batch(psi: np.ndarray, m4: np.ndarray, q_hi: int, q_lo: int, n: int) -> np.ndarray:
    """Apply a 4x4 unitary whose basis index is 2*b(q_hi) + b(q_lo)."""
    b = psi.shape[0]
    full = psi.reshape([b] + [2] * n)
    ax_hi = 1 + (n - 1 - q_hi)
    ax_lo = 1 + (n - 1 - q_lo)
    moved = np.moveaxis(full, (ax_hi, ax_lo), (n - 1, n))
    shape = moved.shape
    flat = np.ascontiguousarray(moved).reshape(b, -1, 4)
    flat = flat @ m4.T
    moved = flat.reshape(shape)
    out = np.moveaxis(moved, (n - 1, n), (ax_hi, ax_lo))
    return np.ascontiguousarray(out).reshape(b, 1 << n)


def _gate_matrix(op: GateOp, params: np.ndarray | None) -> np.ndarray:
    """Dense 2x2 or 4x4 matrix for the op (controlled basis: index 2*control+target)."""
    if op.kind in _FIXED_1Q:
        return _FIXED_1Q[op.kind]
    if op.kind in ("RX", "RY", "RZ"):
        return _rot(op.kind, op.resolve_angle(params))
    if op.kind == "SWAP":
        return np.array(
            [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
    m = np.eye(4, dtype=complex)
    if op.kind == "CX":
        sub = _FIXED_1Q["X"]
    else:  # CRX / CRY / CRZ
        sub = _rot(op.kind[1:], op.resolve_angle(params))
    m[2:, 2:] = sub
    return m


def apply_gate_batch(psi: np.ndarray, op: GateOp, params: np.ndarray | None, n: int) -> np.ndarray:
    for q in op.qubits:
        if not 0 <= q < n:
            raise SimulationError(f"qubit {q} out of range")
    m = _gate_matrix(op, params)
    if op.kind in GATE_KINDS_1Q:
        return _apply_1q_batch(psi, m, op.qubits[0], n)
    return _apply_2q_batch(psi, m, op.qubits[0], op.qubits[1], n)


def apply_gate(state: StateVector, op: GateOp, params: np.ndarray | None = None) -> StateVector:
    """Apply one gate's unitary to the state."""
    psi = state.amplitudes[None, :]
    out = apply_gate_batch(psi, op, None if params is None else np.asarray(params, float),
                           state.n_qubits)
    return StateVector(state.n_qubits, out[0])


def run_batch(circuit: Circuit, params: np.ndarray | None, psi: np.ndarray) -> np.ndarray:
    """Run the circuit over a (batch, 2^n) array of state vectors."""
    circuit.validate()
    p = None if params is None else np.asarray(params, dtype=float)
    if circuit.n_params and (p is None or len(p) < circuit.n_params):
        raise SimulationError(
            f"need {circuit.n_params} parameters, got {0 if p is None else len(p)}")
    for op in circuit.ops:
        psi = apply_gate_batch(psi, op, p, circuit.n_qubits)
    return psi


def run_circuit(circuit: Circuit, params: np.ndarray | None = None,
                initial: StateVector | None = None) -> StateVector:
    """Sequentially apply all ops, starting from |0...0> unless given a state."""
    if initial is None:
        initial = StateVector.zero(circuit.n_qubits)
    elif initial.n_qubits != circuit.n_qubits:
        raise SimulationError("initial state width mismatch")
    out = run_batch(circuit, params, initial.amplitudes[None, :].copy())
    return StateVector(circuit.n_qubits, out[0])


def expectation_z(state: StateVector, qubits: list[int]) -> np.ndarray:
    """<Z> per listed qubit, each in [-1, 1]."""
    return expectation_z_batch(state.amplitudes[None, :], qubits, state.n_qubits)[0]


def expectation_z_batch(psi: np.ndarray, qubits: list[int], n: int) -> np.ndarray:
    probs = np.abs(psi) ** 2
    idx = np.arange(1 << n)
    out = np.empty((psi.shape[0], len(qubits)))
    for j, q in enumerate(qubits):
        if not 0 <= q < n:
            raise SimulationError(f"qubit {q} out of range")
        signs = 1.0 - 2.0 * ((idx >> q) & 1)
        out[:, j] = probs @ signs
    return out


def expectation_z_from_probs(probs: np.ndarray, qubits: list[int], n: int) -> np.ndarray:
    idx = np.arange(1 << n)
    out = np.empty(len(qubits))
    for j, q in enumerate(qubits):
        signs = 1.0 - 2.0 * ((idx >> q) & 1)
        out[j] = probs @ signs
    return out


def run_noisy(circuit: Circuit, params: np.ndarray | None, noise: NoiseModel,
              shots: int, initial: StateVector | None = None) -> np.ndarray:
    """Monte-Carlo trajectory simulation; returns the empirical basis-state distribution.

    After each gate, with probability p1 (p2 for two-qubit gates) a uniformly
    random Pauli is inserted on each touched qubit; readout bits are flipped
    independently with p_ro. Deterministic for a fixed NoiseModel seed.
    """
    if shots < 1:
        raise SimulationError("shots must be >= 1")
    circuit.validate()
    n = circuit.n_qubits
    p = None if params is None else np.asarray(params, dtype=float)
    rng = np.random.default_rng(noise.seed)
    if initial is None:
        psi = np.zeros((shots, 1 << n), dtype=complex)
        psi[:, 0] = 1.0
    else:
        psi = np.tile(initial.amplitudes, (shots, 1))

    pauli_keys = ("X", "Y", "Z")
    for op in circuit.ops:
        psi = apply_gate_batch(psi, op, p, n)
        p_err = noise.p1 if op.kind in GATE_KINDS_1Q else noise.p2
        if p_err > 0.0:
            for q in op.qubits:
                hit = rng.random(shots) < p_err
                if not hit.any():
                    continue
                which = rng.integers(0, 3, size=shots)
                for k in range(3):
                    rows = np.nonzero(hit & (which == k))[0]
                    if rows.size:
                        psi[rows] = _apply_1q_batch(psi[rows], _PAULI[pauli_keys[k]], q, n)

    probs = np.abs(psi) ** 2
    cum = np.cumsum(probs, axis=1)
    cum[:, -1] = 1.0
    u = rng.random(shots)
    outcomes = (cum < u[:, None]).sum(axis=1)
    if noise.p_ro > 0.0:
        for q in range(n):
            flips = rng.random(shots) < noise.p_ro
            outcomes = np.where(flips, outcomes ^ (1 << q), outcomes)
    counts = np.bincount(outcomes, minlength=1 << n)
    return counts / shots


def deviation(ideal: np.ndarray, noisy: np.ndarray) -> float:
    """Mean absolute elementwise difference between two distributions."""
    ideal = np.asarray(ideal, dtype=float)
    noisy = np.asarray(noisy, dtype=float)
    if ideal.shape != noisy.shape:
        raise SimulationError("distribution length mismatch")
    for d in (ideal, noisy):
        if abs(d.sum() - 1.0) > 1e-6:
            raise SimulationError("distribution does not sum to 1")
    return float(np.mean(np.abs(ideal - noisy)))


def circuit_unitary(circuit: Circuit, params: np.ndarray | None = None) -> np.ndarray:
    """Dense 2^n x 2^n unitary of the circuit (small n only); used as a test oracle."""
    n = circuit.n_qubits
    basis = np.eye(1 << n, dtype=complex)
    cols = run_batch(circuit, params, basis)
    return cols.T


def write_distribution_csv(path, probs: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write("basis_index,probability\n")
        for i, p in enumerate(probs):
            fh.write(f"{i},{p:.12g}\n")
