"""Encoding circuits: angle, amplitude, spatial-group, and duplication-based nonlinear encoders.

The spatial encoder slides a W x H window with stride S over a 2D array,
amplitude-encodes each window onto its own qubit span, and optionally prepares
c identical copies of a span so the joint state is the tensor power of the
window vector (introducing degree-c polynomial cross terms).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .sim import Circuit, SimulationError


class EncodingError(Exception):
    pass


@dataclass(frozen=True)
class GroupSpec:
    """Sliding-window shape: width W, height H, stride S (in data cells)."""

    W: int
    H: int
    S: int

    def __post_init__(self):
        if self.W < 1 or self.H < 1 or self.S < 1:
            raise EncodingError(f"invalid group spec {self}")

    def group_count(self, width: int, height: int) -> int:
        if self.W > width or self.H > height:
            raise EncodingError(f"group {self} exceeds {width}x{height} data")
        return ((width - self.W) // self.S + 1) * ((height - self.H) // self.S + 1)

    def qubits_per_group(self) -> int:
        return max(1, math.ceil(math.log2(self.W * self.H)))


@dataclass(frozen=True)
class DuplicationSpec:
    """Per-group duplication counts c_1..c_g."""

    counts: tuple[int, ...]

    def __post_init__(self):
        if any(c < 1 for c in self.counts):
            raise EncodingError("duplication counts must be >= 1")

    @classmethod
    def uniform(cls, c: int, g: int) -> "DuplicationSpec":
        return cls(tuple([c] * g))

    def qubit_demand(self, qubits_per_group: int) -> int:
        return sum(c * qubits_per_group for c in self.counts)


@dataclass
class EncoderLayout:
    """Where each group's data lands: source cells per group, one qubit span per copy."""

    group_cells: list[list[tuple[int, int]]]  # per group, ordered (row, col) coords
    qubit_spans: list[tuple[int, tuple[int, ...]]]  # (group index, contiguous qubit range)
    total_qubits: int

    def spans_of_group(self, g: int) -> list[tuple[int, ...]]:
        return [span for gi, span in self.qubit_spans if gi == g]

    def to_json(self) -> str:
        return json.dumps({
            "group_cells": self.group_cells,
            "qubit_spans": [[g, list(span)] for g, span in self.qubit_spans],
            "total_qubits": self.total_qubits,
        })

    @classmethod
    def from_json(cls, text: str) -> "EncoderLayout":
        d = json.loads(text)
        return cls(
            group_cells=[[tuple(c) for c in cells] for cells in d["group_cells"]],
            qubit_spans=[(g, tuple(span)) for g, span in d["qubit_spans"]],
            total_qubits=d["total_qubits"],
        )


def partition_groups(shape: tuple[int, int], f: GroupSpec) -> EncoderLayout:
    """Row-major sliding-window enumeration of groups; one span per group (no duplication)."""
    width, height = shape
    f.group_count(width, height)  # bounds check
    cells: list[list[tuple[int, int]]] = []
    for row0 in range(0, height - f.H + 1, f.S):
        for col0 in range(0, width - f.W + 1, f.S):
            cells.append([(row0 + r, col0 + c) for r in range(f.H) for c in range(f.W)])
    q = f.qubits_per_group()
    spans = [(g, tuple(range(g * q, (g + 1) * q))) for g in range(len(cells))]
    return EncoderLayout(cells, spans, total_qubits=q * len(cells))


def _prep_angles(values: np.ndarray, n: int) -> dict[int, np.ndarray]:
    """Multiplexed-RY angles per target qubit; key k has 2^(n-1-k) entries."""
    out: dict[int, np.ndarray] = {}
    norms = np.abs(values.astype(float))
    for k in range(n):
        pairs = norms.reshape(-1, 2)
        a0, a1 = pairs[:, 0], pairs[:, 1]
        out[k] = 2.0 * np.arctan2(a1, a0)
        norms = np.hypot(a0, a1)
    return out


def _emit_ucry(circuit: Circuit, angles: np.ndarray, controls: list[int], target: int,
               offset: int) -> None:
    """Uniformly-controlled RY, recursively decomposed into RY + CX pairs."""
    if len(controls) == 0:
        if abs(angles[0]) > 1e-12:
            circuit.add("RY", offset + target, angle=float(angles[0]))
        return
    half = len(angles) // 2
    a, b = angles[:half], angles[half:]
    u, d = (a + b) / 2.0, (a - b) / 2.0
    c = controls[0]
    if np.max(np.abs(d)) < 1e-12:
        _emit_ucry(circuit, u, controls[1:], target, offset)
        return
    _emit_ucry(circuit, u, controls[1:], target, offset)
    circuit.add("CX", (offset + c, offset + target))
    _emit_ucry(circuit, d, controls[1:], target, offset)
    circuit.add("CX", (offset + c, offset + target))


def amplitude_prep(values: np.ndarray, offset: int = 0, n_qubits_total: int | None = None) -> Circuit:
    """Circuit preparing amplitudes values/||values|| (zero-padded to a power of two).

    Real nonnegative inputs only; synthesis is a binary tree of uniformly
    controlled RY rotations decomposed into RY + CX. ``offset`` shifts the
    target qubits so preps can be placed side by side in a wider register.
    """
    values = np.asarray(values, dtype=float).ravel()
    if values.size < 1:
        raise EncodingError("empty value vector")
    if np.any(values < 0):
        raise EncodingError("amplitude encoding requires nonnegative values")
    if np.linalg.norm(values) == 0.0:
        raise EncodingError("all-zero input vector cannot be amplitude-encoded")
    n = max(1, math.ceil(math.log2(values.size)))
    padded = np.zeros(1 << n)
    padded[: values.size] = values
    total = n_qubits_total if n_qubits_total is not None else offset + n
    circuit = Circuit(total)
    angles = _prep_angles(padded, n)
    for k in range(n - 1, -1, -1):
        controls = list(range(n - 1, k, -1))
        _emit_ucry(circuit, angles[k], controls, k, offset)
    return circuit


# -- angle encoding ----------------------------------------------------------

_AXIS_GATE = {"x": "RX", "y": "RY", "z": "RZ"}


@dataclass(frozen=True)
class AngleScheme:
    """k qubits and a rotation-axis cycle; round j uses axis cycle[j]."""

    n_qubits: int
    cycle: tuple[str, ...]  # gate kinds, e.g. ("RY", "RZ", "RX", "RY")

    @classmethod
    def parse(cls, name: str) -> "AngleScheme":
        """Parse names like '4x4_ryzxy' (4 qubits, rounds RY,RZ,RX,RY) or '8x2_ryz'."""
        try:
            qpart, axes = name.split("_")
            k = int(qpart.split("x")[0])
            cycle = tuple(_AXIS_GATE[a] for a in axes[1:])
        except (ValueError, KeyError) as e:
            raise EncodingError(f"bad angle scheme name {name!r}") from e
        if k < 1 or not cycle:
            raise EncodingError(f"bad angle scheme name {name!r}")
        return cls(k, cycle)

    @property
    def capacity(self) -> int:
        return self.n_qubits * len(self.cycle)


def angle_encode(values: np.ndarray, scheme: AngleScheme) -> Circuit:
    """Write value j as a rotation (axis cycle[j // k]) on qubit j mod k."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size > scheme.capacity:
        raise EncodingError(
            f"{values.size} values exceed scheme capacity {scheme.capacity}")
    circuit = Circuit(scheme.n_qubits)
    k = scheme.n_qubits
    for j, v in enumerate(values):
        circuit.add(scheme.cycle[j // k], j % k, angle=float(v))
    return circuit


# -- spatial + duplication encoder ------------------------------------------

def build_st_encoder(data: np.ndarray, f: GroupSpec, C: DuplicationSpec,
                     budget: int | None = None) -> tuple[Circuit, EncoderLayout]:
    """Spatial group encoder with per-group duplication.

    Each group's cells are L2-normalized and amplitude-prepped identically onto
    c_i disjoint contiguous spans; the full register state is the tensor
    product of all spans. Single-cell groups degenerate to one RY per cell
    with angle 2*asin(v), keeping the angle-encoding limit well defined.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise EncodingError("data must be 2D")
    height, width = data.shape
    base = partition_groups((width, height), f)
    g = len(base.group_cells)
    if len(C.counts) != g:
        raise EncodingError(f"duplication spec has {len(C.counts)} counts for {g} groups")
    q = f.qubits_per_group()
    demand = C.qubit_demand(q)
    if budget is not None and demand > budget:
        raise EncodingError(f"qubit budget exceeded: need {demand}, have {budget}")

    spans: list[tuple[int, tuple[int, ...]]] = []
    next_q = 0
    for gi, c in enumerate(C.counts):
        for _ in range(c):
            spans.append((gi, tuple(range(next_q, next_q + q))))
            next_q += q
    layout = EncoderLayout(base.group_cells, spans, total_qubits=next_q)

    circuit = Circuit(layout.total_qubits)
    single_cell = f.W * f.H == 1
    for gi, span in spans:
        vals = np.array([data[r, c] for r, c in layout.group_cells[gi]])
        if single_cell:
            v = min(max(float(vals[0]), 0.0), 1.0)
            theta = 2.0 * math.asin(v)
            if abs(theta) > 1e-12:
                circuit.add("RY", span[0], angle=theta)
            continue
        if np.linalg.norm(vals) == 0.0:
            continue  # empty window encodes as |0...0>
        prep = amplitude_prep(vals, offset=span[0], n_qubits_total=layout.total_qubits)
        circuit = circuit.extended(prep)
    return circuit, layout


def bloch_encoder(theta: float, phi: float, copies: int) -> Circuit:
    """Prepare ``copies`` identical single-qubit states cos(t/2)|0> + e^{i phi} sin(t/2)|1>."""
    if copies < 1:
        raise EncodingError("need at least one copy")
    circuit = Circuit(copies)
    for q in range(copies):
        circuit.add("RY", q, angle=float(theta))
        if abs(phi) > 1e-12:
            circuit.add("RZ", q, angle=float(phi))
    return circuit
