"""Design search: an RNN controller samples circuit designs, an evaluator
trains and scores them, and REINFORCE updates the controller.

A design is one choice per slot across four segments: spatial window, group
duplication, per-level block repeats, and the physical (path) candidate the
design is placed on. The reward is validation accuracy minus rho times the
penalty P = bn + bq, where bn flags a qubit demand beyond the device's longest
path and bq flags a physical candidate whose size does not match the demand.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .ansatz import LayerSpec, build_tree_ansatz, tree_levels
from .compiler import CouplingGraph, PathCandidate
from .encoder import GroupSpec
from .trainer import Readout, TrainConfig, TrainResult, accuracy, encode_states, train


class SearchError(Exception):
    pass


SEGMENTS = ("spatial", "duplication", "layer", "physical")


@dataclass
class Slot:
    """One decision point: a named list of choices within a segment."""

    name: str
    segment: str
    choices: list
    active: bool = True
    default_index: int = 0

    def __post_init__(self):
        if self.segment not in SEGMENTS:
            raise SearchError(f"unknown segment {self.segment!r}")
        if not self.choices:
            raise SearchError(f"slot {self.name} has no choices")
        if not 0 <= self.default_index < len(self.choices):
            raise SearchError(f"slot {self.name} default out of range")


@dataclass
class SearchSpace:
    slots: list[Slot]

    def __post_init__(self):
        if not self.slots:
            raise SearchError("empty search space")

    def apply_mask(self, mask: dict[str, bool]) -> None:
        """Deactivate segments mapped to False; their slots emit the default."""
        for slot in self.slots:
            slot.active = mask.get(slot.segment, True)

    @property
    def active_slots(self) -> list[Slot]:
        return [s for s in self.slots if s.active]


@dataclass(frozen=True)
class SolutionSample:
    """One sampled design: a choice index per slot (defaults where masked)."""

    choices: tuple[int, ...]

    def choice(self, space: SearchSpace, name: str):
        for slot, idx in zip(space.slots, self.choices):
            if slot.name == name:
                return slot.choices[idx]
        raise SearchError(f"no slot named {name!r}")


@dataclass(frozen=True)
class RewardRecord:
    acc: float
    bn: int
    bq: int
    rho: float

    def __post_init__(self):
        if self.bn not in (0, 1) or self.bq not in (0, 1):
            raise SearchError("penalty bits must be 0 or 1")

    @property
    def P(self) -> int:
        return self.bn + self.bq

    @property
    def R(self) -> float:
        return self.acc - self.rho * self.P


def penalty_bits(n_demand: int, n_device: int, candidate_qubits: int) -> tuple[int, int]:
    """bn = 1 iff the demand exceeds the device's longest path; bq = 1 iff the
    chosen physical candidate's size differs from the demand."""
    bn = 0 if n_demand <= n_device else 1
    bq = 0 if candidate_qubits == n_demand else 1
    return bn, bq


def select_optimizers(kind: str) -> dict[str, bool]:
    """Which segments stay active for a data kind.

    Linearly separable image data needs no nonlinearity, so duplication is
    pinned; vector data has no 2D structure worth a layer hierarchy, so the
    layer segment is pinned; nonlinear data keeps all four segments.
    """
    if kind == "linear-separable image":
        return {"spatial": True, "duplication": False, "layer": True, "physical": True}
    if kind == "vector":
        return {"spatial": True, "duplication": True, "layer": False, "physical": True}
    if kind == "nonlinear":
        return {s: True for s in SEGMENTS}
    raise SearchError(f"unknown data kind {kind!r}")


class ControllerPolicy(torch.nn.Module):
    """Single-layer GRU controller: each slot's choice is embedded and fed to
    the next step, so later slots condition on earlier decisions."""

    def __init__(self, space: SearchSpace, embed_size: int = 16, hidden_size: int = 64,
                 lr: float = 5e-3, gamma: float = 1.0, baseline_decay: float = 0.95,
                 seed: int = 0):
        super().__init__()
        torch.manual_seed(seed)
        self.space = space
        self.gamma = gamma
        self.baseline_decay = baseline_decay
        self.baseline: float | None = None
        self.cell = torch.nn.GRUCell(embed_size, hidden_size)
        self.start = torch.nn.Parameter(torch.zeros(embed_size))
        self.embeds = torch.nn.ModuleList(
            [torch.nn.Embedding(len(s.choices), embed_size) for s in space.slots])
        self.heads = torch.nn.ModuleList(
            [torch.nn.Linear(hidden_size, len(s.choices)) for s in space.slots])
        self.opt = torch.optim.Adam(self.parameters(), lr=lr)

    def slot_probs(self, slot_index: int, h: torch.Tensor) -> torch.Tensor:
        return torch.softmax(self.heads[slot_index](h), dim=-1)

    def sample(self, generator: torch.Generator | None = None, argmax: bool = False
               ) -> tuple[SolutionSample, torch.Tensor]:
        """Autoregressive sample plus the summed discounted log-probability.
        Masked slots emit their default with zero log-prob contribution."""
        h = torch.zeros(self.cell.hidden_size)
        x = self.start
        choices: list[int] = []
        logps: list[torch.Tensor] = []
        for i, slot in enumerate(self.space.slots):
            if not slot.active:
                choices.append(slot.default_index)
                continue
            h = self.cell(x[None, :], h[None, :])[0]
            probs = self.slot_probs(i, h)
            if argmax:
                idx = int(torch.argmax(probs.detach()))
            else:
                idx = int(torch.multinomial(probs.detach(), 1, generator=generator))
            choices.append(idx)
            logps.append(torch.log(probs[idx] + 1e-30))
            x = self.embeds[i](torch.tensor(idx))
        T = len(logps)
        total = torch.zeros(())
        for t, lp in enumerate(logps, start=1):
            total = total + (self.gamma ** (T - t)) * lp
        return SolutionSample(tuple(choices)), total

    def update(self, batch: list[tuple[torch.Tensor, float]]) -> None:
        """One REINFORCE step over an episode batch of (log-prob, reward)."""
        if not batch:
            raise SearchError("empty episode batch")
        rewards = [r for _, r in batch]
        b = self.baseline if self.baseline is not None else float(np.mean(rewards))
        loss = torch.zeros(())
        for logp, r in batch:
            loss = loss - logp * (r - b)
        loss = loss / len(batch)
        self.opt.zero_grad()
        loss.backward()
        self.opt.step()
        d = self.baseline_decay
        self.baseline = d * b + (1 - d) * float(np.mean(rewards))


# -- design decoding and evaluation ------------------------------------------

def _pad_repeats(repeats: tuple[int, ...], n_levels: int) -> tuple[int, ...]:
    if len(repeats) >= n_levels:
        return repeats[:n_levels]
    return repeats + (repeats[-1],) * (n_levels - len(repeats))


@dataclass
class BlochEvalContext:
    """Everything needed to score a design on a Bloch dataset."""

    dataset_id: str
    train_states: dict  # copies -> (states, labels) lazy cache
    val_states: dict
    train_samples: list
    val_samples: list
    graph: CouplingGraph
    candidates: list[PathCandidate]
    n_device: int
    rho: float = 0.5
    train_cfg: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=20, lr=0.08))
    cache: dict = field(default_factory=dict)

    def states_for(self, copies: int, which: str) -> tuple[np.ndarray, np.ndarray]:
        from .data import encoder_circuit  # local import to avoid a cycle
        store = self.train_states if which == "train" else self.val_states
        if copies not in store:
            samples = self.train_samples if which == "train" else self.val_samples
            states = encode_states(
                [encoder_circuit(s, self.dataset_id, copies) for s in samples])
            labels = np.array([s.label for s in samples], dtype=int)
            store[copies] = (states, labels)
        return store[copies]


def make_bloch_search_space(graph: CouplingGraph, candidates: list[PathCandidate],
                            max_copies: int = 3) -> SearchSpace:
    """Search space for single-qubit-sample data: the spatial window degenerates
    to (1,1,1), duplication picks the copy count, the layer slot picks a repeat
    pattern, and the physical slot picks a placement candidate."""
    repeat_patterns = [(1,), (2,), (1, 1), (1, 2), (2, 2), (1, 2, 2)]
    return SearchSpace([
        Slot("spatial", "spatial", [GroupSpec(1, 1, 1)]),
        Slot("duplication", "duplication", list(range(1, max_copies + 1))),
        Slot("layer", "layer", repeat_patterns),
        Slot("physical", "physical", list(range(len(candidates)))),
    ])


def evaluate_bloch_solution(sample: SolutionSample, space: SearchSpace,
                            ctx: BlochEvalContext) -> RewardRecord:
    """Train (reduced budget) and validate a sampled design; infeasible samples
    score acc = 0 without training. Accuracies are cached by logical design
    (copies, repeats) — the physical slot only affects the penalty bits."""
    copies = sample.choice(space, "duplication")
    repeats = sample.choice(space, "layer")
    cand = ctx.candidates[sample.choice(space, "physical")]
    bn, bq = penalty_bits(copies, ctx.n_device, cand.n_qubits)
    if bn:
        return RewardRecord(0.0, bn, bq, ctx.rho)
    key = (copies, repeats)
    if key not in ctx.cache:
        spans = [(i,) for i in range(copies)]
        levels = tree_levels(spans)
        ansatz = build_tree_ansatz(spans, LayerSpec(_pad_repeats(repeats, len(levels))))
        Xtr, ytr = ctx.states_for(copies, "train")
        Xva, yva = ctx.states_for(copies, "val")
        result = train(ansatz, Xtr, ytr, Readout((0,), 2), ctx.train_cfg)
        ctx.cache[key] = accuracy(ansatz, result.params, Xva, yva, Readout((0,), 2))
    return RewardRecord(ctx.cache[key], bn, bq, ctx.rho)


# -- search loops ------------------------------------------------------------

@dataclass
class SearchResult:
    best_sample: SolutionSample
    best_record: RewardRecord
    history: list[tuple[SolutionSample, RewardRecord]]

    @property
    def best_reward(self) -> float:
        return self.best_record.R


def _better(a: tuple[SolutionSample, RewardRecord] | None,
            b: tuple[SolutionSample, RewardRecord]) -> tuple[SolutionSample, RewardRecord]:
    """Prefer higher reward; among ties, penalty-free designs win."""
    if a is None:
        return b
    if (b[1].R, -b[1].P) > (a[1].R, -a[1].P):
        return b
    return a


def search(space: SearchSpace, evaluate, episodes: int, batch_size: int = 3,
           seed: int = 0, policy: ControllerPolicy | None = None,
           log_path=None) -> SearchResult:
    """REINFORCE search: sample ``episodes`` designs in batches, update the
    controller after each batch, return the best-by-reward and full history.

    ``evaluate`` maps a SolutionSample to a RewardRecord.
    """
    if episodes < 1:
        raise SearchError("need at least one episode")
    policy = policy or ControllerPolicy(space, seed=seed)
    gen = torch.Generator().manual_seed(seed)
    best = None
    history: list[tuple[SolutionSample, RewardRecord]] = []
    log_fh = open(log_path, "w") if log_path else None
    try:
        done = 0
        while done < episodes:
            batch = []
            for _ in range(min(batch_size, episodes - done)):
                sample, logp = policy.sample(generator=gen)
                record = evaluate(sample)
                batch.append((logp, record.R))
                history.append((sample, record))
                best = _better(best, (sample, record))
                if log_fh:
                    log_fh.write(json.dumps({
                        "episode": done, "choices": list(sample.choices),
                        "acc": record.acc, "bn": record.bn, "bq": record.bq,
                        "P": record.P, "R": record.R}) + "\n")
                done += 1
            policy.update(batch)
    finally:
        if log_fh:
            log_fh.close()
    return SearchResult(best[0], best[1], history)


def random_search(space: SearchSpace, evaluate, episodes: int, seed: int = 0
                  ) -> SearchResult:
    """Uniform-random baseline over the same space (the comparison oracle)."""
    rng = np.random.default_rng(seed)
    best = None
    history = []
    for _ in range(episodes):
        choices = tuple(
            int(rng.integers(len(s.choices))) if s.active else s.default_index
            for s in space.slots)
        sample = SolutionSample(choices)
        record = evaluate(sample)
        history.append((sample, record))
        best = _better(best, (sample, record))
    return SearchResult(best[0], best[1], history)


def export_history_csv(history: list[tuple[SolutionSample, RewardRecord]], path) -> None:
    with open(path, "w") as fh:
        fh.write("episode,acc,P,R\n")
        for i, (_, rec) in enumerate(history):
            fh.write(f"{i},{rec.acc:.6g},{rec.P},{rec.R:.6g}\n")
