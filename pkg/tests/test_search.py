"""Design-search tests: reward algebra, segment masking, the controller on a
bandit problem, and the search loops over a cheap synthetic objective."""

import itertools

import numpy as np
import pytest

from stvqc.compiler import CouplingGraph, find_paths
from stvqc.search import (ControllerPolicy, RewardRecord, SearchError,
                          SearchSpace, Slot, SolutionSample, _pad_repeats,
                          export_history_csv, make_bloch_search_space,
                          penalty_bits, random_search, search, select_optimizers)


# -- reward algebra -----------------------------------------------------------

def test_reward_record_exhaustive():
    # R = acc - rho * (bn + bq) over every bit pattern and an accuracy grid
    for bn, bq in itertools.product((0, 1), repeat=2):
        for acc in (0.0, 0.25, 0.5, 0.9, 1.0):
            for rho in (0.0, 0.5, 1.0):
                rec = RewardRecord(acc, bn, bq, rho)
                assert rec.P == bn + bq
                assert rec.R == pytest.approx(acc - rho * (bn + bq))


def test_reward_record_validates_bits():
    with pytest.raises(SearchError):
        RewardRecord(0.5, 2, 0, 0.5)
    with pytest.raises(SearchError):
        RewardRecord(0.5, 0, -1, 0.5)


def test_penalty_bits():
    # bn fires when demand exceeds the device's longest path
    assert penalty_bits(3, 4, 3) == (0, 0)
    assert penalty_bits(5, 4, 5) == (1, 0)
    # bq fires when the placement size misses the demand in either direction
    assert penalty_bits(3, 4, 2) == (0, 1)
    assert penalty_bits(3, 4, 4) == (0, 1)


def test_select_optimizers():
    assert select_optimizers("linear-separable image")["duplication"] is False
    assert select_optimizers("vector")["layer"] is False
    assert all(select_optimizers("nonlinear").values())
    with pytest.raises(SearchError):
        select_optimizers("bogus")


# -- search space -------------------------------------------------------------

def _toy_space():
    return SearchSpace([
        Slot("a", "duplication", [1, 2, 3]),
        Slot("b", "layer", [(1,), (2,)]),
    ])


def test_slot_validation():
    with pytest.raises(SearchError):
        Slot("x", "bogus-segment", [1])
    with pytest.raises(SearchError):
        Slot("x", "layer", [])
    with pytest.raises(SearchError):
        SearchSpace([])


def test_masking_pins_defaults():
    space = _toy_space()
    space.apply_mask({"layer": False})
    assert [s.name for s in space.active_slots] == ["a"]
    policy = ControllerPolicy(space, seed=0)
    sample, logp = policy.sample(argmax=True)
    assert sample.choices[1] == 0  # masked slot emits its default index
    # unmask restores both
    space.apply_mask({})
    assert len(space.active_slots) == 2


def test_solution_sample_choice_lookup():
    space = _toy_space()
    s = SolutionSample((2, 1))
    assert s.choice(space, "a") == 3
    assert s.choice(space, "b") == (2,)
    with pytest.raises(SearchError):
        s.choice(space, "missing")


def test_pad_repeats():
    assert _pad_repeats((1, 2), 4) == (1, 2, 2, 2)
    assert _pad_repeats((1, 2, 2), 2) == (1, 2)


def test_make_bloch_search_space():
    graph = CouplingGraph.load_fixture("lima")
    cands = find_paths(graph, 2)
    space = make_bloch_search_space(graph, cands, max_copies=3)
    names = [s.name for s in space.slots]
    assert names == ["spatial", "duplication", "layer", "physical"]
    assert space.slots[1].choices == [1, 2, 3]
    assert len(space.slots[3].choices) == len(cands)


# -- controller learning ------------------------------------------------------

def test_controller_learns_a_bandit():
    # one slot, one arm strictly better: the policy should concentrate on it
    space = SearchSpace([Slot("arm", "layer", list(range(4)))])
    policy = ControllerPolicy(space, seed=0)

    def reward(sample):
        return 1.0 if sample.choices[0] == 2 else 0.1

    import torch
    gen = torch.Generator().manual_seed(0)
    for _ in range(200):
        batch = []
        for _ in range(3):
            sample, logp = policy.sample(generator=gen)
            batch.append((logp, reward(sample)))
        policy.update(batch)
    with torch.no_grad():
        h = policy.cell(policy.start[None, :], torch.zeros(1, policy.cell.hidden_size))[0]
        probs = policy.slot_probs(0, h)
    assert float(probs[2]) > 0.9


def test_controller_sampling_is_deterministic_per_seed():
    import torch
    space = _toy_space()
    a = ControllerPolicy(space, seed=1)
    b = ControllerPolicy(space, seed=1)
    ga, gb = torch.Generator().manual_seed(5), torch.Generator().manual_seed(5)
    for _ in range(10):
        sa, _ = a.sample(generator=ga)
        sb, _ = b.sample(generator=gb)
        assert sa == sb


# -- search loops -------------------------------------------------------------

def _synthetic_evaluate(space):
    def evaluate(sample):
        a = sample.choice(space, "a")
        bq = 1 if sample.choice(space, "b") == (2,) else 0
        return RewardRecord(acc=a / 3.0, bn=0, bq=bq, rho=0.5)
    return evaluate


def test_search_tracks_running_max(tmp_path):
    space = _toy_space()
    result = search(space, _synthetic_evaluate(space), episodes=30, seed=0,
                    log_path=tmp_path / "log.jsonl")
    assert len(result.history) == 30
    assert result.best_reward == max(rec.R for _, rec in result.history)
    # best achievable: a=3 (acc 1.0) with b != (2,)
    assert result.best_reward == pytest.approx(1.0)
    log_lines = (tmp_path / "log.jsonl").read_text().splitlines()
    assert len(log_lines) == 30


def test_search_prefers_penalty_free_ties():
    space = _toy_space()
    # rewards tie at 0.5 for (a=3, bq=1) vs (a=1.5-> none); construct directly
    from stvqc.search import _better
    tie_a = (SolutionSample((0, 0)), RewardRecord(0.5, 0, 0, 0.5))
    tie_b = (SolutionSample((1, 1)), RewardRecord(1.0, 0, 1, 0.5))
    assert _better(tie_b, tie_a) == tie_a
    assert _better(tie_a, tie_b) == tie_a


def test_random_search_deterministic():
    space = _toy_space()
    ev = _synthetic_evaluate(space)
    a = random_search(space, ev, episodes=20, seed=3)
    b = random_search(space, ev, episodes=20, seed=3)
    assert [s.choices for s, _ in a.history] == [s.choices for s, _ in b.history]


def test_export_history_csv(tmp_path):
    space = _toy_space()
    result = random_search(space, _synthetic_evaluate(space), episodes=5, seed=0)
    path = tmp_path / "hist.csv"
    export_history_csv(result.history, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "episode,acc,P,R"
    assert len(lines) == 6


def test_search_rejects_zero_episodes():
    with pytest.raises(SearchError):
        search(_toy_space(), lambda s: RewardRecord(0, 0, 0, 0.5), episodes=0)
