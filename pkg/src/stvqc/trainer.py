"""Gradient-based training of parameterized circuits.

The loss is softmax cross-entropy over per-class <Z> readouts. Gradients use
the parameter-shift rule; because the two-term rule is only exact for gates
whose generator has eigenvalues +-1/2, the circuit is first lowered to the
{RZ, SX, X, CX} basis where every trainable gate is a plain RZ (possibly a
scaled/offset occurrence of its parameter), and each occurrence is shifted
independently with its scale as the chain-rule factor.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .compiler import decompose_to_basis
from .sim import Circuit, GateOp, SimulationError, expectation_z_batch, run_batch


class TrainingError(Exception):
    pass


@dataclass(frozen=True)
class ModelSpec:
    """A full classifier: encoder descriptor + ansatz descriptor + readout.

    Encoder kinds:
      - "bloch": per-sample single-qubit preparation repeated ``copies`` times
        (fields: dataset, copies)
      - "st": spatial window encoder over 2D arrays (fields: W, H, S, counts,
        shape)
      - "amplitude": plain amplitude encoding of the flattened array (field:
        shape)
      - "angle": rotation-per-value encoding (field: scheme, e.g. "4x4_ryzxy")
    Ansatz kinds: "tree" (field: repeats) or "vqc" (field: blocks).
    """

    encoder: dict
    ansatz: dict
    readout: tuple[int, ...]
    n_classes: int = 2

    def __post_init__(self):
        if self.n_classes < 2:
            raise TrainingError("n_classes must be >= 2")
        if self.encoder.get("kind") not in ("bloch", "st", "amplitude", "angle"):
            raise TrainingError(f"unknown encoder kind {self.encoder.get('kind')!r}")
        if self.ansatz.get("kind") not in ("tree", "vqc"):
            raise TrainingError(f"unknown ansatz kind {self.ansatz.get('kind')!r}")

    # -- layout ---------------------------------------------------------------

    def _st_layout(self):
        from .encoder import DuplicationSpec, GroupSpec, partition_groups
        e = self.encoder
        f = GroupSpec(e["W"], e["H"], e["S"])
        width, height = e["shape"][1], e["shape"][0]
        g = f.group_count(width, height)
        counts = tuple(e.get("counts") or [1] * g)
        return f, DuplicationSpec(counts)

    def qubit_spans(self) -> list[tuple[int, ...]]:
        """One span per group copy, in register order."""
        e = self.encoder
        if e["kind"] == "bloch":
            return [(i,) for i in range(e.get("copies", 1))]
        if e["kind"] == "st":
            f, C = self._st_layout()
            q = f.qubits_per_group()
            spans, nxt = [], 0
            for c in C.counts:
                for _ in range(c):
                    spans.append(tuple(range(nxt, nxt + q)))
                    nxt += q
            return spans
        if e["kind"] == "amplitude":
            import math
            n_vals = int(np.prod(e["shape"]))
            return [tuple(range(max(1, math.ceil(math.log2(n_vals)))))]
        from .encoder import AngleScheme
        return [tuple(range(AngleScheme.parse(e["scheme"]).n_qubits))]

    @property
    def n_qubits(self) -> int:
        return max(q for span in self.qubit_spans() for q in span) + 1

    # -- circuits -------------------------------------------------------------

    def encoder_circuit(self, sample):
        from .data import BlochSample, ImageSample
        from .data import encoder_circuit as bloch_enc
        from .encoder import AngleScheme, amplitude_prep, angle_encode, build_st_encoder
        e = self.encoder
        if e["kind"] == "bloch":
            if not isinstance(sample, BlochSample):
                raise TrainingError("bloch encoder needs a BlochSample")
            return bloch_enc(sample, e["dataset"], e.get("copies", 1))
        pixels = sample.array() if isinstance(sample, ImageSample) else np.asarray(sample, float)
        if tuple(pixels.shape) != tuple(e.get("shape", pixels.shape)):
            raise TrainingError(f"sample shape {pixels.shape} != spec {e['shape']}")
        if e["kind"] == "st":
            f, C = self._st_layout()
            circ, _ = build_st_encoder(pixels, f, C)
            return circ
        if e["kind"] == "amplitude":
            return amplitude_prep(pixels.ravel())
        return angle_encode(pixels.ravel(), AngleScheme.parse(e["scheme"]))

    def build_ansatz(self):
        from .ansatz import LayerSpec, build_tree_ansatz, build_vqc, tree_levels
        if self.ansatz["kind"] == "vqc":
            circuit = build_vqc(self.n_qubits, self.ansatz.get("blocks", 2))
        else:
            spans = self.qubit_spans()
            repeats = tuple(self.ansatz["repeats"])
            n_levels = len(tree_levels(spans))
            if len(repeats) != n_levels:
                raise TrainingError(
                    f"{len(repeats)} repeats for a {n_levels}-level tree")
            circuit = build_tree_ansatz(spans, LayerSpec(repeats))
        for q in self.readout:
            if not 0 <= q < circuit.n_qubits:
                raise TrainingError(f"readout qubit {q} outside the register")
        return circuit

    def to_json(self) -> str:
        return json.dumps({"encoder": self.encoder, "ansatz": self.ansatz,
                           "readout": list(self.readout), "n_classes": self.n_classes})

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        d = json.loads(text)
        return cls(d["encoder"], d["ansatz"], tuple(d["readout"]), d["n_classes"])


@dataclass(frozen=True)
class Readout:
    """Which <Z> values become class logits.

    One qubit per class; with a single qubit and two classes the logits are
    (+z, -z), so one readout wire can separate a binary problem.
    """

    qubits: tuple[int, ...]
    n_classes: int

    def __post_init__(self):
        if self.n_classes < 2:
            raise TrainingError("need at least two classes")
        if len(self.qubits) not in (self.n_classes, 1):
            raise TrainingError(
                f"{len(self.qubits)} readout qubits cannot produce {self.n_classes} logits")
        if len(self.qubits) == 1 and self.n_classes != 2:
            raise TrainingError("single-qubit readout only supports two classes")

    def logits(self, psi: np.ndarray, n_qubits: int) -> np.ndarray:
        z = expectation_z_batch(psi, list(self.qubits), n_qubits)
        if len(self.qubits) == 1:
            return np.concatenate([z, -z], axis=1)
        return z

    def logits_from_probs(self, probs: np.ndarray, n_qubits: int) -> np.ndarray:
        from .sim import expectation_z_from_probs
        z = expectation_z_from_probs(probs, list(self.qubits), n_qubits)
        if len(self.qubits) == 1:
            return np.array([z[0], -z[0]])
        return z


@dataclass
class TrainConfig:
    lr: float = 0.05
    epochs: int = 60
    seed: int = 0
    init_range: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class TrainResult:
    params: np.ndarray
    loss_history: list[float] = field(default_factory=list)
    acc_history: list[float] = field(default_factory=list)

    @property
    def final_acc(self) -> float:
        return self.acc_history[-1] if self.acc_history else float("nan")

    def to_json(self) -> str:
        return json.dumps({
            "params": list(map(float, self.params)),
            "loss_history": self.loss_history,
            "acc_history": self.acc_history,
        })

    @classmethod
    def from_json(cls, text: str) -> "TrainResult":
        d = json.loads(text)
        return cls(np.array(d["params"]), d["loss_history"], d["acc_history"])


def softmax_xent(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and its gradient w.r.t. the logits."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=1, keepdims=True)
    b = len(labels)
    loss = -float(np.mean(np.log(p[np.arange(b), labels] + 1e-300)))
    grad = p.copy()
    grad[np.arange(b), labels] -= 1.0
    return loss, grad / b


def forward_logits(circuit: Circuit, params: np.ndarray, states: np.ndarray,
                   readout: Readout) -> np.ndarray:
    psi = run_batch(circuit, params, states.copy())
    return readout.logits(psi, circuit.n_qubits)


def accuracy(circuit: Circuit, params: np.ndarray, states: np.ndarray,
             labels: np.ndarray, readout: Readout) -> float:
    logits = forward_logits(circuit, params, states, readout)
    return float(np.mean(logits.argmax(axis=1) == labels))


def param_occurrences(circuit: Circuit) -> list[list[tuple[int, float]]]:
    """Per parameter, the (op index, scale) occurrences; every trainable gate
    must be a plain rotation so the two-term shift rule is exact."""
    occ: list[list[tuple[int, float]]] = [[] for _ in range(circuit.n_params)]
    for i, op in enumerate(circuit.ops):
        if op.param is None:
            continue
        if op.kind not in ("RX", "RY", "RZ"):
            raise TrainingError(
                f"trainable {op.kind} has no exact two-term shift rule; "
                "lower the circuit first")
        occ[op.param].append((i, op.scale))
    return occ


def _shifted(circuit: Circuit, op_idx: int, delta: float) -> Circuit:
    op = circuit.ops[op_idx]
    ops = list(circuit.ops)
    ops[op_idx] = GateOp(op.kind, op.qubits, angle=(op.angle or 0.0) + delta,
                         param=op.param, scale=op.scale)
    return Circuit(circuit.n_qubits, ops, circuit.n_params)


def parameter_shift_grad(circuit: Circuit, params: np.ndarray, states: np.ndarray,
                         labels: np.ndarray, readout: Readout,
                         occurrences: list[list[tuple[int, float]]] | None = None,
                         ) -> tuple[float, float, np.ndarray]:
    """Loss, accuracy, and exact analytic gradient via the parameter-shift rule."""
    if occurrences is None:
        occurrences = param_occurrences(circuit)
    logits = forward_logits(circuit, params, states, readout)
    loss, dlogits = softmax_xent(logits, labels)
    acc = float(np.mean(logits.argmax(axis=1) == labels))
    grad = np.zeros(circuit.n_params)
    for j, occ in enumerate(occurrences):
        for op_idx, scale in occ:
            plus = forward_logits(_shifted(circuit, op_idx, np.pi / 2), params, states, readout)
            minus = forward_logits(_shifted(circuit, op_idx, -np.pi / 2), params, states, readout)
            grad[j] += scale * float(np.sum(dlogits * (plus - minus))) / 2.0
    return loss, acc, grad


def finite_diff_grad(circuit: Circuit, params: np.ndarray, states: np.ndarray,
                     labels: np.ndarray, readout: Readout, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient; the numerical oracle for the shift rule."""
    grad = np.zeros(circuit.n_params)
    for j in range(circuit.n_params):
        p = params.copy()
        p[j] += h
        lp, _ = softmax_xent(forward_logits(circuit, p, states, readout), labels)
        p[j] -= 2 * h
        lm, _ = softmax_xent(forward_logits(circuit, p, states, readout), labels)
        grad[j] = (lp - lm) / (2 * h)
    return grad


class Adam:
    def __init__(self, n: int, cfg: TrainConfig):
        self.cfg = cfg
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        c = self.cfg
        self.t += 1
        self.m = c.beta1 * self.m + (1 - c.beta1) * grad
        self.v = c.beta2 * self.v + (1 - c.beta2) * grad ** 2
        mhat = self.m / (1 - c.beta1 ** self.t)
        vhat = self.v / (1 - c.beta2 ** self.t)
        return params - c.lr * mhat / (np.sqrt(vhat) + c.eps)


def train(circuit: Circuit, states: np.ndarray, labels: np.ndarray,
          readout: Readout, cfg: TrainConfig | None = None) -> TrainResult:
    """Full-batch Adam on the shift-rule gradient; deterministic for a fixed seed.

    ``states`` holds one encoded state vector per sample, shape (B, 2^n); the
    encoder itself carries no trainable parameters, so it runs exactly once.
    """
    cfg = cfg or TrainConfig()
    circuit.validate()
    if states.ndim != 2 or states.shape[1] != 1 << circuit.n_qubits:
        raise TrainingError(
            f"states shape {states.shape} incompatible with {circuit.n_qubits} qubits")
    if len(labels) != len(states):
        raise TrainingError("label count mismatch")
    labels = np.asarray(labels, dtype=int)
    if labels.min() < 0 or labels.max() >= readout.n_classes:
        raise TrainingError("label outside class range")
    for q in readout.qubits:
        if not 0 <= q < circuit.n_qubits:
            raise TrainingError(f"readout qubit {q} out of range")

    basis = decompose_to_basis(circuit)
    occurrences = param_occurrences(basis)
    rng = np.random.default_rng(cfg.seed)
    params = rng.uniform(-cfg.init_range, cfg.init_range, circuit.n_params)
    opt = Adam(circuit.n_params, cfg)
    result = TrainResult(params)
    for _ in range(cfg.epochs):
        loss, acc, grad = parameter_shift_grad(
            basis, params, states, labels, readout, occurrences)
        result.loss_history.append(loss)
        result.acc_history.append(acc)
        params = opt.step(params, grad)
    result.params = params
    result.acc_history.append(accuracy(circuit, params, states, labels, readout))
    result.loss_history.append(
        softmax_xent(forward_logits(circuit, params, states, readout), labels)[0])
    return result


def forward(model: ModelSpec, params: np.ndarray, sample) -> np.ndarray:
    """Softmax class probabilities for one sample."""
    ansatz = model.build_ansatz()
    states = encode_states([model.encoder_circuit(sample)])
    logits = forward_logits(ansatz, params, states, Readout(model.readout, model.n_classes))
    shifted = logits[0] - logits[0].max()
    e = np.exp(shifted)
    return e / e.sum()


@dataclass
class TrainReport:
    """Training trace plus held-out results, serializable for the CLI."""

    model: ModelSpec
    params: np.ndarray
    loss_history: list[float]
    acc_history: list[float]
    test_acc: float
    noisy_acc: float | None = None
    deviation: float | None = None

    def to_json(self) -> str:
        return json.dumps({
            "model": json.loads(self.model.to_json()),
            "params": list(map(float, self.params)),
            "loss_history": self.loss_history,
            "acc_history": self.acc_history,
            "test_acc": self.test_acc,
            "noisy_acc": self.noisy_acc,
            "deviation": self.deviation,
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "TrainReport":
        d = json.loads(text)
        return cls(ModelSpec.from_json(json.dumps(d["model"])), np.array(d["params"]),
                   d["loss_history"], d["acc_history"], d["test_acc"],
                   d.get("noisy_acc"), d.get("deviation"))


def evaluate(model: ModelSpec, params: np.ndarray, samples: list, labels: np.ndarray,
             noise=None, graph=None, shots: int = 8192, max_samples: int | None = None
             ) -> tuple[float, float]:
    """(accuracy, mean deviation). With a noise model, each sample's full
    circuit is compiled to the graph (if given) and sampled with run_noisy;
    without one, expectations are exact and the deviation is 0."""
    from .sim import NoiseModel, run_circuit, run_noisy
    labels = np.asarray(labels, dtype=int)
    readout = Readout(model.readout, model.n_classes)
    ansatz = model.build_ansatz()
    if noise is None:
        states = encode_states([model.encoder_circuit(s) for s in samples])
        return accuracy(ansatz, params, states, labels, readout), 0.0
    from .compiler import route_naive
    if max_samples is not None:
        samples, labels = samples[:max_samples], labels[:max_samples]
    correct = 0
    dev_total = 0.0
    from .sim import deviation as dev_fn
    for i, sample in enumerate(samples):
        full = model.encoder_circuit(sample).extended(ansatz)
        readout_map = dict(zip(model.readout, model.readout))
        if graph is not None:
            compiled = route_naive(full, graph)
            readout_map = {q: compiled.final_mapping[q] for q in model.readout}
            full = compiled.circuit
        shot_noise = NoiseModel(noise.p1, noise.p2, noise.p_ro, seed=noise.seed + i)
        probs = run_noisy(full, params, shot_noise, shots)
        ideal = run_circuit(full, params).probabilities()
        dev_total += dev_fn(ideal, probs)
        mapped = Readout(tuple(readout_map[q] for q in model.readout), model.n_classes)
        logits = mapped.logits_from_probs(probs, full.n_qubits)
        correct += int(np.argmax(logits) == labels[i])
    n = len(samples)
    return correct / n, dev_total / n


def run_experiment(model: ModelSpec, train_samples: list, test_samples: list,
                   cfg: TrainConfig | None = None, noise=None, graph=None,
                   shots: int = 8192, noisy_max_samples: int | None = None) -> TrainReport:
    """Train on the train split, evaluate on the test split (plus an optional
    compiled-noisy pass), and bundle everything into a TrainReport."""
    if not train_samples or not test_samples:
        raise TrainingError("empty dataset")
    ansatz = model.build_ansatz()
    readout = Readout(model.readout, model.n_classes)
    Xtr = encode_states([model.encoder_circuit(s) for s in train_samples])
    ytr = np.array([s.label for s in train_samples], dtype=int)
    yte = np.array([s.label for s in test_samples], dtype=int)
    result = train(ansatz, Xtr, ytr, readout, cfg)
    test_acc, _ = evaluate(model, result.params, test_samples, yte)
    report = TrainReport(model, result.params, result.loss_history,
                         result.acc_history, test_acc)
    if noise is not None:
        report.noisy_acc, report.deviation = evaluate(
            model, result.params, test_samples, yte, noise=noise, graph=graph,
            shots=shots, max_samples=noisy_max_samples)
    return report


def encode_states(encoders: list[Circuit]) -> np.ndarray:
    """Stack the output state vectors of per-sample encoding circuits."""
    if not encoders:
        raise TrainingError("no encoder circuits")
    n = encoders[0].n_qubits
    out = np.zeros((len(encoders), 1 << n), dtype=complex)
    for i, enc in enumerate(encoders):
        if enc.n_qubits != n:
            raise TrainingError("encoder width mismatch within batch")
        psi = np.zeros((1, 1 << n), dtype=complex)
        psi[0, 0] = 1.0
        out[i] = run_batch(enc, None, psi)[0]
    return out
