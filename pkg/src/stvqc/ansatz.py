"""Trainable computation circuits: the conventional VQC block stack and the reverse-tree ansatz."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .sim import Circuit


class AnsatzError(Exception):
    pass


@dataclass(frozen=True)
class LayerSpec:
    """Per-level block repeat counts r_1..r_m of the reverse tree."""

    repeats: tuple[int, ...]

    def __post_init__(self):
        if any(r < 0 for r in self.repeats):
            raise AnsatzError("repeat counts must be >= 0")
        if not any(r > 0 for r in self.repeats):
            raise AnsatzError("at least one level must repeat > 0 times")


def tree_level_count(n_groups: int) -> int:
    """Levels of the reverse tree: one per-group level plus pairwise merge levels."""
    if n_groups < 1:
        raise AnsatzError("need at least one group")
    return max(1, math.ceil(math.log2(n_groups))) + 1 if n_groups > 1 else 1


def tree_levels(spans: list[tuple[int, ...]]) -> list[list[tuple[int, ...]]]:
    """Block spans per level: level 1 is the input spans, each next level merges
    adjacent blocks pairwise; a trailing odd block passes through unmerged, so
    the level count is ceil(log2 g) + 1."""
    if not spans:
        raise AnsatzError("no spans")
    levels = [list(spans)]
    while len(levels[-1]) > 1:
        prev = levels[-1]
        merged = [prev[i] + prev[i + 1] for i in range(0, len(prev) - 1, 2)]
        if len(prev) % 2 == 1:
            merged.append(prev[-1])
        levels.append(merged)
    return levels


def _append_block(circuit: Circuit, qubits: tuple[int, ...]) -> None:
    """One baseline block: per-qubit RX, per-qubit RZ, then a CRZ ring, all with
    fresh trainable parameters. A 2-qubit ring degenerates to forward + back."""
    if len(qubits) < 2:
        raise AnsatzError("baseline block needs >= 2 qubits")
    for q in qubits:
        circuit.add("RX", q, param=circuit.new_param())
    for q in qubits:
        circuit.add("RZ", q, param=circuit.new_param())
    k = len(qubits)
    for i in range(k if k > 2 else 2):
        a, b = qubits[i % k], qubits[(i + 1) % k]
        circuit.add("CRZ", (a, b), param=circuit.new_param())


def _append_single_qubit_layer(circuit: Circuit, qubit: int) -> None:
    circuit.add("RX", qubit, param=circuit.new_param())
    circuit.add("RZ", qubit, param=circuit.new_param())


def build_baseline_block(qubits: tuple[int, ...], n_qubits: int | None = None) -> Circuit:
    """Standalone one-block fragment (12 parameters on 4 qubits, 6 on 2)."""
    circuit = Circuit(n_qubits if n_qubits is not None else max(qubits) + 1)
    _append_block(circuit, tuple(qubits))
    return circuit


def build_vqc(n_qubits: int, blocks: int) -> Circuit:
    """Conventional VQC: baseline blocks stacked on all qubits at once.

    A single-qubit register has no entangling ring, so each block degenerates
    to an RX + RZ rotation pair.
    """
    if blocks < 1:
        raise AnsatzError("need at least one block")
    circuit = Circuit(n_qubits)
    all_q = tuple(range(n_qubits))
    for _ in range(blocks):
        if n_qubits == 1:
            _append_single_qubit_layer(circuit, 0)
        else:
            _append_block(circuit, all_q)
    return circuit


def build_tree_ansatz(spans: list[tuple[int, ...]], R: LayerSpec) -> Circuit:
    """Reverse-tree ansatz over group-copy spans.

    Level 1 places r_1 blocks on each individual span (single-qubit spans get
    RX+RZ rotation pairs instead); each following level merges spans pairwise
    and places r_l blocks per merged span, until one block covers all qubits.
    """
    levels = tree_levels(spans)
    if len(R.repeats) != len(levels):
        raise AnsatzError(
            f"layer spec has {len(R.repeats)} levels, tree has {len(levels)}")
    n_qubits = max(q for s in spans for q in s) + 1
    circuit = Circuit(n_qubits)
    for r, level in zip(R.repeats, levels):
        for _ in range(r):
            for span in level:
                if len(span) == 1:
                    _append_single_qubit_layer(circuit, span[0])
                else:
                    _append_block(circuit, span)
    return circuit
