"""Lowering logical circuits to device-compatible physical circuits.

Covers basis decomposition to {RZ, SX, X, CX}, greedy SWAP routing as the
baseline, simple-path enumeration over the coupling graph, near-path subgraph
growth, and the SWAP-free synthesis that rewrites a block's entangling ring
into a forward chain plus a reversed return chain along a physical path.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from math import pi

import numpy as np

from .sim import Circuit, GateOp

PATH_ENUMERATION_CAP = 10 ** 6


class CompileError(Exception):
    pass


@dataclass
class CouplingGraph:
    """Device topology with per-qubit / per-edge error rates."""

    n_phys: int
    edges: list[tuple[int, int]]
    err_1q: list[float] = field(default_factory=list)
    err_2q: dict[tuple[int, int], float] = field(default_factory=dict)
    err_ro: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.edges = [tuple(sorted(e)) for e in self.edges]
        for a, b in self.edges:
            if not (0 <= a < self.n_phys and 0 <= b < self.n_phys):
                raise CompileError(f"edge ({a},{b}) references invalid qubit")
        if not self.err_1q:
            self.err_1q = [0.0] * self.n_phys
        if not self.err_ro:
            self.err_ro = [0.0] * self.n_phys
        self.err_2q = {tuple(sorted(k)): v for k, v in self.err_2q.items()}
        for e in self.edges:
            self.err_2q.setdefault(e, 0.0)
        self._adj: list[list[int]] = [[] for _ in range(self.n_phys)]
        for a, b in self.edges:
            self._adj[a].append(b)
            self._adj[b].append(a)
        for nb in self._adj:
            nb.sort()

    def neighbors(self, q: int) -> list[int]:
        return self._adj[q]

    def has_edge(self, a: int, b: int) -> bool:
        return tuple(sorted((a, b))) in self.err_2q and tuple(sorted((a, b))) in set(self.edges)

    def shortest_path(self, a: int, b: int) -> list[int]:
        """BFS path a..b inclusive; raises if disconnected."""
        if a == b:
            return [a]
        prev = {a: None}
        queue = deque([a])
        while queue:
            u = queue.popleft()
            for v in self._adj[u]:
                if v not in prev:
                    prev[v] = u
                    if v == b:
                        path = [b]
                        while prev[path[-1]] is not None:
                            path.append(prev[path[-1]])
                        return path[::-1]
                    queue.append(v)
        raise CompileError(f"qubits {a} and {b} lie in disconnected regions")

    def distances_from(self, sources: set[int]) -> list[int]:
        dist = [math.inf] * self.n_phys
        queue = deque()
        for s in sources:
            dist[s] = 0
            queue.append(s)
        while queue:
            u = queue.popleft()
            for v in self._adj[u]:
                if dist[v] > dist[u] + 1:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        return dist

    def to_json(self) -> str:
        return json.dumps({
            "n_phys": self.n_phys,
            "edges": [list(e) for e in self.edges],
            "err_1q": self.err_1q,
            "err_2q": {f"{a}-{b}": v for (a, b), v in self.err_2q.items()},
            "err_ro": self.err_ro,
        })

    @classmethod
    def from_json(cls, text: str) -> "CouplingGraph":
        d = json.loads(text)
        err_2q = {tuple(int(x) for x in k.split("-")): v for k, v in d.get("err_2q", {}).items()}
        return cls(d["n_phys"], [tuple(e) for e in d["edges"]],
                   d.get("err_1q", []), err_2q, d.get("err_ro", []))

    @classmethod
    def load_fixture(cls, name: str) -> "CouplingGraph":
        """Bundled topologies: 'lima' (5-qubit T) or 'heavyhex27'."""
        text = resources.files("stvqc.topologies").joinpath(f"{name}.json").read_text()
        return cls.from_json(text)


@dataclass(frozen=True)
class PathCandidate:
    """A simple path of physical qubits with its accumulated noise score."""

    qubits: tuple[int, ...]
    noise_score: float

    @property
    def n_qubits(self) -> int:
        return len(self.qubits)

    @classmethod
    def from_graph(cls, graph: CouplingGraph, qubits: tuple[int, ...]) -> "PathCandidate":
        score = sum(graph.err_1q[q] for q in qubits)
        score += sum(graph.err_2q[tuple(sorted((qubits[i], qubits[i + 1])))]
                     for i in range(len(qubits) - 1))
        return cls(qubits, score)


@dataclass(frozen=True)
class SubgraphCandidate:
    """A base path plus greedily accreted extra qubits; fat = max attachment distance."""

    path: PathCandidate
    extras: tuple[tuple[int, int], ...]  # (qubit, distance to base path)
    fat: int
    noise_score: float

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.path.qubits + tuple(q for q, _ in self.extras)

    @property
    def n_qubits(self) -> int:
        return len(self.qubits)


@dataclass
class CompiledCircuit:
    """Physical circuit over {RZ, SX, X, CX} plus mappings and metrics.

    ``mapping`` is the initial logical-to-physical placement; ``final_mapping``
    reflects where each logical qubit ends up after routing SWAPs, which is
    what measurement must use.
    """

    circuit: Circuit
    mapping: dict[int, int]
    metrics: dict[str, int]
    final_mapping: dict[int, int] | None = None


# -- basis decomposition -----------------------------------------------------

def _zsx_1q(ops: list[GateOp], q: int, src: GateOp, phi: float, lam: float) -> None:
    """U3(theta, phi, lam) as RZ(lam) SX RZ(theta+pi) SX RZ(phi+pi), applied in
    circuit order; theta (angle or scaled parameter) is taken from ``src``."""
    def rz(angle):
        if abs(angle % (2 * pi)) > 1e-12:
            ops.append(GateOp("RZ", (q,), angle=float(angle)))

    rz(lam)
    ops.append(GateOp("SX", (q,)))
    if src.param is None:
        rz(src.angle + pi)
    else:
        ops.append(GateOp("RZ", (q,), angle=(src.angle or 0.0) + pi,
                          param=src.param, scale=src.scale))
    ops.append(GateOp("SX", (q,)))
    rz(phi + pi)


def _decompose_op(op: GateOp, out: list[GateOp]) -> None:
    kind, qs = op.kind, op.qubits
    if kind in ("RZ", "SX", "X", "CX"):
        out.append(op)
    elif kind == "RX":
        _zsx_1q(out, qs[0], op, -pi / 2, pi / 2)
    elif kind == "RY":
        _zsx_1q(out, qs[0], op, 0.0, 0.0)
    elif kind == "H":
        _zsx_1q(out, qs[0], GateOp("RZ", qs, angle=pi / 2), 0.0, pi)
    elif kind == "SWAP":
        a, b = qs
        out.extend([GateOp("CX", (a, b)), GateOp("CX", (b, a)), GateOp("CX", (a, b))])
    elif kind == "CRZ":
        c, t = qs
        out.append(_scaled_rz(t, op, 0.5))
        out.append(GateOp("CX", (c, t)))
        out.append(_scaled_rz(t, op, -0.5))
        out.append(GateOp("CX", (c, t)))
    elif kind == "CRY":
        c, t = qs
        _decompose_op(_scaled_rot("RY", t, op, 0.5), out)
        out.append(GateOp("CX", (c, t)))
        _decompose_op(_scaled_rot("RY", t, op, -0.5), out)
        out.append(GateOp("CX", (c, t)))
    elif kind == "CRX":
        c, t = qs
        _decompose_op(GateOp("H", (t,)), out)
        _decompose_op(GateOp("CRZ", (c, t), angle=op.angle, param=op.param,
                             scale=op.scale), out)
        _decompose_op(GateOp("H", (t,)), out)
    else:
        raise CompileError(f"unsupported gate kind {kind}")


def _scaled_rz(t: int, op: GateOp, factor: float) -> GateOp:
    return _scaled_rot("RZ", t, op, factor)


def _scaled_rot(kind: str, t: int, op: GateOp, factor: float) -> GateOp:
    if op.param is not None:
        return GateOp(kind, (t,), param=op.param, scale=op.scale * factor,
                      angle=None if op.angle is None else op.angle * factor)
    return GateOp(kind, (t,), angle=op.angle * factor)


def decompose_to_basis(circuit: Circuit) -> Circuit:
    """Rewrite to the {RZ, SX, X, CX} basis, unitary-equivalent up to global phase."""
    circuit.validate()
    ops: list[GateOp] = []
    for op in circuit.ops:
        _decompose_op(op, ops)
    return Circuit(circuit.n_qubits, ops, circuit.n_params)


def optimize_basis(circuit: Circuit) -> Circuit:
    """Adjacent-inverse cancellation (CX/X pairs) and fixed-angle RZ merging."""
    ops = list(circuit.ops)
    changed = True
    while changed:
        changed = False
        out: list[GateOp] = []
        last_on: dict[int, int] = {}  # qubit -> index in out of last op touching it
        for op in ops:
            prev_idx = max((last_on.get(q, -1) for q in op.qubits), default=-1)
            prev = out[prev_idx] if prev_idx >= 0 else None
            if prev is not None and prev.qubits == op.qubits and prev.kind == op.kind:
                if op.kind in ("CX", "X") and op.qubits == prev.qubits:
                    out.pop(prev_idx)
                    last_on = {q: i for i, o in enumerate(out) for q in o.qubits}
                    changed = True
                    continue
                if (op.kind == "RZ" and op.param is None and prev.param is None):
                    merged = (prev.angle + op.angle) % (2 * pi)
                    out.pop(prev_idx)
                    if abs(merged) > 1e-12 and abs(merged - 2 * pi) > 1e-12:
                        out.append(GateOp("RZ", op.qubits, angle=merged))
                    last_on = {q: i for i, o in enumerate(out) for q in o.qubits}
                    changed = True
                    continue
            out.append(op)
            for q in op.qubits:
                last_on[q] = len(out) - 1
        ops = out
    return Circuit(circuit.n_qubits, ops, circuit.n_params)


# -- metrics -----------------------------------------------------------------

def circuit_metrics(circuit: Circuit, swap_count: int | None = None) -> dict[str, int]:
    """Depth (DAG levelization), CX count, SWAP count, parameter count."""
    depth_at = [0] * max(circuit.n_qubits, 1)
    for op in circuit.ops:
        level = max(depth_at[q] for q in op.qubits) + 1
        for q in op.qubits:
            depth_at[q] = level
    return {
        "depth": max(depth_at) if circuit.ops else 0,
        "cx_count": sum(1 for op in circuit.ops if op.kind == "CX"),
        "swap_count": swap_count if swap_count is not None
        else sum(1 for op in circuit.ops if op.kind == "SWAP"),
        "param_count": circuit.n_params,
    }


# -- naive routing baseline --------------------------------------------------

def route_naive(circuit: Circuit, graph: CouplingGraph,
                mapping: list[int] | None = None) -> CompiledCircuit:
    """Greedy routing: SWAP nonadjacent two-qubit operands together along a
    shortest path, then decompose to the physical basis."""
    circuit.validate()
    if circuit.n_qubits > graph.n_phys:
        raise CompileError(
            f"circuit needs {circuit.n_qubits} qubits, device has {graph.n_phys}")
    l2p = list(mapping) if mapping is not None else list(range(circuit.n_qubits))
    initial = dict(enumerate(l2p))
    edge_set = {tuple(sorted(e)) for e in graph.edges}
    routed = Circuit(graph.n_phys, n_params=circuit.n_params)
    swap_count = 0
    for op in circuit.ops:
        if len(op.qubits) == 1:
            routed.ops.append(GateOp(op.kind, (l2p[op.qubits[0]],),
                                     angle=op.angle, param=op.param, scale=op.scale))
            continue
        a, b = op.qubits
        if tuple(sorted((l2p[a], l2p[b]))) not in edge_set:
            path = graph.shortest_path(l2p[a], l2p[b])
            for step in path[1:-1]:
                routed.ops.append(GateOp("SWAP", (l2p[a], step)))
                swap_count += 1
                moved = l2p.index(step) if step in l2p else None
                if moved is not None:
                    l2p[moved] = l2p[a]
                l2p[a] = step
        routed.ops.append(GateOp(op.kind, (l2p[a], l2p[b]),
                                 angle=op.angle, param=op.param, scale=op.scale))
    basis = decompose_to_basis(routed)
    basis = optimize_basis(basis)
    metrics = circuit_metrics(basis, swap_count=swap_count)
    return CompiledCircuit(basis, initial, metrics, final_mapping=dict(enumerate(l2p)))


# -- path / subgraph search --------------------------------------------------

def find_paths(graph: CouplingGraph, n: int) -> list[PathCandidate]:
    """All simple paths with exactly n vertices, deduplicated up to reversal.

    Enumeration is capped; beyond the cap it falls back to randomized DFS
    restarts, which may miss paths on pathological graphs.
    """
    if not 1 <= n <= graph.n_phys:
        raise CompileError(f"path length {n} outside [1, {graph.n_phys}]")
    seen: set[tuple[int, ...]] = set()
    expansions = 0

    def dfs(path: list[int]) -> bool:
        nonlocal expansions
        expansions += 1
        if expansions > PATH_ENUMERATION_CAP:
            return False
        if len(path) == n:
            canon = min(tuple(path), tuple(reversed(path)))
            seen.add(canon)
            return True
        ok = True
        for v in graph.neighbors(path[-1]):
            if v not in path:
                path.append(v)
                ok = dfs(path) and ok
                path.pop()
        return ok

    complete = True
    for start in range(graph.n_phys):
        complete = dfs([start]) and complete
    if not complete:
        rng = np.random.default_rng(0)
        for _ in range(20000):
            path = [int(rng.integers(graph.n_phys))]
            while len(path) < n:
                options = [v for v in graph.neighbors(path[-1]) if v not in path]
                if not options:
                    break
                path.append(int(rng.choice(options)))
            if len(path) == n:
                seen.add(min(tuple(path), tuple(reversed(path))))
    return sorted((PathCandidate.from_graph(graph, p) for p in seen),
                  key=lambda c: (c.noise_score, c.qubits))


def grow_subgraph(graph: CouplingGraph, P: PathCandidate, target: int) -> SubgraphCandidate:
    """Greedy accretion around a base path: each step adds the connected qubit
    with the smallest distance to P (ties: lower 1q error, then lower index)."""
    if target <= P.n_qubits:
        raise CompileError("target must exceed the base path size")
    if target > graph.n_phys:
        raise CompileError(f"target {target} exceeds device size {graph.n_phys}")
    in_g = set(P.qubits)
    dist_to_p = graph.distances_from(set(P.qubits))
    extras: list[tuple[int, int]] = []
    while len(in_g) < target:
        frontier = {v for u in in_g for v in graph.neighbors(u)} - in_g
        if not frontier:
            raise CompileError("subgraph cannot grow: region exhausted")
        best = min(frontier, key=lambda v: (dist_to_p[v], graph.err_1q[v], v))
        in_g.add(best)
        extras.append((best, int(dist_to_p[best])))
    fat = max(d for _, d in extras)
    score = P.noise_score + sum(graph.err_1q[q] for q, _ in extras)
    for q, _ in extras:
        attach = [graph.err_2q[tuple(sorted((q, u)))] for u in graph.neighbors(q)
                  if u in in_g and u != q]
        if attach:
            score += min(attach)
    return SubgraphCandidate(P, tuple(extras), fat, score)


def rank_candidates(candidates: list, k: int) -> list:
    """Top-k lowest-noise candidates per qubit-count bucket."""
    if k < 1:
        raise CompileError("k must be >= 1")
    buckets: dict[int, list] = {}
    for c in candidates:
        buckets.setdefault(c.n_qubits, []).append(c)
    out = []
    for size in sorted(buckets):
        ranked = sorted(buckets[size], key=lambda c: (c.noise_score, c.qubits))
        out.extend(ranked[:k])
    return out


# -- SWAP-free synthesis -----------------------------------------------------

def _dfs_order_and_edges(graph: CouplingGraph, candidate: SubgraphCandidate
                         ) -> tuple[list[int], list[tuple[int, int]]]:
    """Modified DFS over the subgraph: follow the base path as the spine and
    detour to off-path qubits at fork nodes before continuing."""
    used = set(candidate.qubits)
    path = list(candidate.path.qubits)
    visited: list[int] = []
    edges: list[tuple[int, int]] = []
    seen: set[int] = set()

    def visit_offpath(u: int) -> None:
        for v in sorted(graph.neighbors(u)):
            if v in used and v not in seen and v not in path:
                seen.add(v)
                visited.append(v)
                edges.append((u, v))
                visit_offpath(v)

    for i, u in enumerate(path):
        seen.add(u)
        visited.append(u)
        if i > 0:
            edges.append((path[i - 1], u))
        visit_offpath(u)
    return visited, edges


def build_swap_free(n_logical: int, candidate: PathCandidate | SubgraphCandidate,
                    blocks: int) -> tuple[Circuit, dict[int, int]]:
    """Entangling skeleton rewritten so every two-qubit gate lies on a physical
    edge: a forward CRZ chain in path order, with the ring-closing gate replaced
    by a reversed chain from tail back toward head. Fresh parameters throughout
    (the ansatz family is changed before training, not unitarily transformed).
    """
    if blocks < 1:
        raise CompileError("need at least one block")
    if isinstance(candidate, PathCandidate):
        if candidate.n_qubits != n_logical:
            raise CompileError(
                f"path has {candidate.n_qubits} qubits for {n_logical} logical qubits; "
                "apply a quantum processor with more qubits")
        order = list(candidate.qubits)
        chain = [(order[i], order[i + 1]) for i in range(len(order) - 1)]
        spine = order
    else:
        if candidate.n_qubits < n_logical:
            raise CompileError(
                f"subgraph has {candidate.n_qubits} qubits for {n_logical} logical qubits; "
                "apply a quantum processor with more qubits")
        graph = candidate._graph if hasattr(candidate, "_graph") else None
        if graph is None:
            raise CompileError("subgraph candidate must be built via plan_subgraph")
        order, chain = _dfs_order_and_edges(graph, candidate)
        order = order[:n_logical]
        keep = set(order)
        chain = [(a, b) for a, b in chain if a in keep and b in keep]
        spine = [q for q in candidate.path.qubits if q in keep]

    mapping = {i: q for i, q in enumerate(order)}
    n_wide = max(order) + 1
    circuit = Circuit(n_wide)
    for _ in range(blocks):
        for q in order:
            circuit.add("RX", q, param=circuit.new_param())
        for q in order:
            circuit.add("RZ", q, param=circuit.new_param())
        for a, b in chain:
            circuit.add("CRZ", (a, b), param=circuit.new_param())
        for i in range(len(spine) - 1, 0, -1):
            circuit.add("CRZ", (spine[i], spine[i - 1]), param=circuit.new_param())
    return circuit, mapping


def plan_subgraph(graph: CouplingGraph, P: PathCandidate, target: int) -> SubgraphCandidate:
    """grow_subgraph plus a graph back-reference needed for DFS placement."""
    cand = grow_subgraph(graph, P, target)
    object.__setattr__(cand, "_graph", graph)
    return cand


def longest_path_qubits(graph: CouplingGraph) -> int:
    """Vertex count of the longest simple path (the device's N in the qubit
    budget constraint)."""
    for n in range(graph.n_phys, 0, -1):
        if find_paths(graph, n):
            return n
    return 0
