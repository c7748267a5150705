"""OpenQASM 2.0 import/export, restricted to the toolkit's gate kinds."""

from __future__ import annotations

import math
import re

import numpy as np

from .sim import Circuit, SimulationError

_EXPORT_NAMES = {
    "RX": "rx", "RY": "ry", "RZ": "rz", "X": "x", "SX": "sx", "H": "h",
    "CX": "cx", "CRX": "crx", "CRY": "cry", "CRZ": "crz", "SWAP": "swap",
}
_IMPORT_NAMES = {v: k for k, v in _EXPORT_NAMES.items()}

_GATE_RE = re.compile(
    r"^(?P<name>[a-z]+)\s*(\((?P<arg>[^)]*)\))?\s*(?P<qubits>q\[\d+\](\s*,\s*q\[\d+\])*)\s*;$")


def to_qasm(circuit: Circuit, params: np.ndarray | None = None) -> str:
    """Serialize a circuit; trainable parameters must be bound via ``params``."""
    lines = ['OPENQASM 2.0;', 'include "qelib1.inc";', f"qreg q[{circuit.n_qubits}];"]
    for op in circuit.ops:
        name = _EXPORT_NAMES[op.kind]
        qs = ",".join(f"q[{q}]" for q in op.qubits)
        angle = op.resolve_angle(None if params is None else np.asarray(params, float)) \
            if (op.angle is not None or op.param is not None) else None
        if angle is None:
            lines.append(f"{name} {qs};")
        else:
            lines.append(f"{name}({angle!r}) {qs};")
    return "\n".join(lines) + "\n"


def _parse_angle(text: str) -> float:
    # Accept plain floats plus the pi arithmetic qasm emitters commonly use.
    text = text.strip().replace("pi", repr(math.pi))
    if not re.fullmatch(r"[0-9eE+\-.*/() ]+", text):
        raise SimulationError(f"cannot parse angle {text!r}")
    return float(eval(text, {"__builtins__": {}}))  # noqa: S307 - filtered charset


def from_qasm(text: str) -> Circuit:
    """Parse a restricted OpenQASM 2.0 string back into a Circuit."""
    circuit: Circuit | None = None
    for raw in text.splitlines():
        line = raw.split("//")[0].strip()
        if not line or line.startswith(("OPENQASM", "include")):
            continue
        m = re.match(r"^qreg\s+q\[(\d+)\]\s*;$", line)
        if m:
            circuit = Circuit(int(m.group(1)))
            continue
        m = _GATE_RE.match(line)
        if not m:
            raise SimulationError(f"unsupported qasm line: {line!r}")
        if circuit is None:
            raise SimulationError("gate before qreg declaration")
        name = m.group("name")
        if name not in _IMPORT_NAMES:
            raise SimulationError(f"unsupported gate {name!r}")
        qubits = tuple(int(q) for q in re.findall(r"q\[(\d+)\]", m.group("qubits")))
        angle = _parse_angle(m.group("arg")) if m.group("arg") else None
        circuit.add(_IMPORT_NAMES[name], qubits, angle=angle)
    if circuit is None:
        raise SimulationError("no qreg declaration found")
    circuit.validate()
    return circuit
