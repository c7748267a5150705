"""Command-line entry points: dataset generation, training, design search,
compilation, evaluation, and report aggregation.

All commands are deterministic under --seed and write machine-readable
JSON/CSV outputs. A TOML config file can supply defaults for any flag
(flat ``key = value`` lines, with optional ``[command]`` sections).
"""

from __future__ import annotations

import csv
import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import data as data_mod
from .compiler import (CompileError, CouplingGraph, circuit_metrics, find_paths,
                       longest_path_qubits, route_naive, build_swap_free,
                       decompose_to_basis, optimize_basis)
from .qasm import from_qasm, to_qasm
from .sim import NoiseModel, SimulationError
from .trainer import ModelSpec, TrainConfig, TrainReport, run_experiment
from .search import (BlochEvalContext, evaluate_bloch_solution,
                     export_history_csv, make_bloch_search_space, search as rl_search,
                     select_optimizers)

_OUT_ENV = "STVQC_OUT"


def _out_dir(value: str | None) -> Path:
    path = Path(value or os.environ.get(_OUT_ENV, "."))
    path.mkdir(parents=True, exist_ok=True)
    return path


def _parse_toml_value(text: str):
    text = text.strip()
    if text.startswith('"') and text.endswith('"'):
        return text[1:-1]
    if text in ("true", "false"):
        return text == "true"
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1].strip()
        return [_parse_toml_value(v) for v in inner.split(",")] if inner else []
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        raise click.ClickException(f"cannot parse config value {text!r}")


# Flags whose click parameter name differs from the flag spelling.
_CONFIG_ALIASES = {"dataset": "dataset_id", "model": "model_path",
                   "circuit": "circuit_path", "report": "report_path",
                   "dir": "in_dir", "id": "dataset_id"}


def read_config(path) -> dict:
    """Minimal TOML reader: ``key = value`` lines grouped by [section]."""
    out: dict = {}
    section = out
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#")[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            section = out.setdefault(name, {})
            continue
        if "=" not in line:
            raise click.ClickException(f"bad config line {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip().replace("-", "_")
        section[_CONFIG_ALIASES.get(key, key)] = _parse_toml_value(value)
    return out


def _load_topology(name: str) -> CouplingGraph:
    if name in ("lima", "heavyhex27"):
        return CouplingGraph.load_fixture(name)
    path = Path(name)
    if not path.exists():
        raise click.ClickException(
            f"topology {name!r} is neither a bundled name (lima, heavyhex27) nor a file")
    return CouplingGraph.from_json(path.read_text())


@click.group()
@click.option("--config", type=click.Path(exists=True), default=None,
              help="TOML file providing flag defaults.")
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Worker cap for internally parallel steps.")
@click.pass_context
def main(ctx, config, jobs):
    """Spatial-temporal VQC toolkit."""
    if config:
        ctx.default_map = read_config(config)
    ctx.ensure_object(dict)
    ctx.obj["jobs"] = jobs


@main.command("gen-data")
@click.option("--id", "dataset_id", required=True)
@click.option("--n-train", default=1600, show_default=True)
@click.option("--n-test", default=320, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", default=None, help=f"Output dir (default ${_OUT_ENV} or cwd).")
def cmd_gen_data(dataset_id, n_train, n_test, seed, out):
    """Generate a synthetic Bloch dataset as CSV files plus a manifest."""
    try:
        spec = data_mod.DatasetSpec(dataset_id, n_train, n_test, seed)
    except data_mod.DataError:
        raise click.ClickException(
            f"unknown dataset id {dataset_id!r}; valid ids: {', '.join(data_mod.DATASET_IDS)}")
    manifest = data_mod.save_dataset(spec, _out_dir(out))
    click.echo(json.dumps(manifest))


def _load_split(dataset_id, data_dir, n_train, n_test, seed):
    data_dir = Path(data_dir) if data_dir else None
    if data_dir:
        train_path = data_dir / f"{dataset_id}_train.csv"
        test_path = data_dir / f"{dataset_id}_test.csv"
        if not train_path.exists() or not test_path.exists():
            raise click.ClickException(f"dataset files for {dataset_id} not found in {data_dir}")
        return data_mod.load_bloch_csv(train_path), data_mod.load_bloch_csv(test_path)
    return data_mod.gen_bloch(data_mod.DatasetSpec(dataset_id, n_train, n_test, seed))


def _bloch_model(dataset_id, ansatz_kind, copies, repeats, blocks) -> ModelSpec:
    if ansatz_kind == "tree":
        ansatz = {"kind": "tree", "repeats": list(repeats)}
    else:
        ansatz = {"kind": "vqc", "blocks": blocks}
    return ModelSpec({"kind": "bloch", "dataset": dataset_id, "copies": copies},
                     ansatz, (0,), 2)


def _parse_ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise click.ClickException(f"expected comma-separated integers, got {text!r}")


@main.command("train")
@click.option("--model", "model_path", type=click.Path(exists=True), default=None,
              help="ModelSpec JSON; overrides the flag-built model.")
@click.option("--dataset", "dataset_id", default=None, help="Synthetic dataset id.")
@click.option("--data-dir", default=None, help="Load CSVs instead of regenerating.")
@click.option("--images", type=click.Path(exists=True), default=None,
              help="IDX image file for image tasks.")
@click.option("--labels", type=click.Path(exists=True), default=None)
@click.option("--test-images", type=click.Path(exists=True), default=None)
@click.option("--test-labels", type=click.Path(exists=True), default=None)
@click.option("--ansatz", "ansatz_kind", type=click.Choice(["tree", "vqc"]), default="tree",
              show_default=True)
@click.option("--copies", default=2, show_default=True)
@click.option("--repeats", default="1,2", show_default=True)
@click.option("--blocks", default=3, show_default=True)
@click.option("--n-train", default=1600, show_default=True)
@click.option("--n-test", default=320, show_default=True)
@click.option("--epochs", default=50, show_default=True)
@click.option("--lr", default=0.08, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--noisy", is_flag=True, help="Add a compiled noisy evaluation pass.")
@click.option("--p1", default=0.001, show_default=True)
@click.option("--p2", default=0.01, show_default=True)
@click.option("--p-ro", default=0.02, show_default=True)
@click.option("--shots", default=8192, show_default=True)
@click.option("--noisy-max-samples", default=50, show_default=True)
@click.option("--topology", default="lima", show_default=True)
@click.option("--max-train", default=800, show_default=True,
              help="Cap on image training samples (runtime control).")
@click.option("--out", default=None)
def cmd_train(model_path, dataset_id, data_dir, images, labels, test_images, test_labels,
              ansatz_kind, copies, repeats, blocks, n_train, n_test, epochs, lr, seed,
              noisy, p1, p2, p_ro, shots, noisy_max_samples, topology, max_train, out):
    """Train a model and write a TrainReport JSON."""
    if images:
        if not (labels and test_images and test_labels):
            raise click.ClickException("--images needs --labels, --test-images, --test-labels")
        train_samples = data_mod.ingest_images(images, labels)[:max_train]
        test_samples = data_mod.ingest_images(test_images, test_labels)[:200]
        if model_path:
            model = ModelSpec.from_json(Path(model_path).read_text())
        else:
            model = ModelSpec(
                {"kind": "st", "W": 2, "H": 2, "S": 2, "counts": None, "shape": [4, 4]},
                {"kind": "tree", "repeats": list(_parse_ints(repeats))}, (0,), 2)
        tag = "mnist2"
    else:
        if not dataset_id:
            raise click.ClickException("provide --dataset or --images")
        train_samples, test_samples = _load_split(dataset_id, data_dir, n_train, n_test, seed)
        if model_path:
            model = ModelSpec.from_json(Path(model_path).read_text())
        else:
            model = _bloch_model(dataset_id, ansatz_kind, copies,
                                 _parse_ints(repeats), blocks)
        tag = dataset_id
    noise = NoiseModel(p1, p2, p_ro, seed=seed) if noisy else None
    graph = _load_topology(topology) if noisy else None
    report = run_experiment(model, train_samples, test_samples,
                            TrainConfig(epochs=epochs, lr=lr, seed=seed),
                            noise=noise, graph=graph, shots=shots,
                            noisy_max_samples=noisy_max_samples)
    out_path = _out_dir(out) / f"train_{tag}_seed{seed}.json"
    out_path.write_text(report.to_json())
    click.echo(json.dumps({"report": str(out_path), "test_acc": report.test_acc,
                           "noisy_acc": report.noisy_acc, "deviation": report.deviation}))


@main.command("search")
@click.option("--dataset", "dataset_id", required=True)
@click.option("--episodes", default=60, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--n-train", default=400, show_default=True)
@click.option("--n-val", default=200, show_default=True)
@click.option("--epochs", default=15, show_default=True, help="Search-time training epochs.")
@click.option("--topology", default="lima", show_default=True)
@click.option("--segments", default=None,
              help="Comma list of active segments; others are pinned to defaults.")
@click.option("--rho", default=0.5, show_default=True)
@click.option("--out", default=None)
def cmd_search(dataset_id, episodes, seed, n_train, n_val, epochs, topology, segments,
               rho, out):
    """RNN-controller design search; writes a JSONL log, history CSV and best design."""
    graph = _load_topology(topology)
    candidates = []
    for n in range(1, longest_path_qubits(graph) + 1):
        candidates.extend(find_paths(graph, n)[:2])
    space = make_bloch_search_space(graph, candidates)
    if segments:
        wanted = {s.strip() for s in segments.split(",")}
        space.apply_mask({seg: seg in wanted
                          for seg in ("spatial", "duplication", "layer", "physical")})
    else:
        space.apply_mask(select_optimizers("nonlinear"))
    train_samples, val_samples = _load_split(dataset_id, None, n_train, n_val, seed)
    ctx = BlochEvalContext(dataset_id, {}, {}, train_samples, val_samples, graph,
                           candidates, longest_path_qubits(graph), rho=rho,
                           train_cfg=TrainConfig(epochs=epochs, lr=0.08, seed=0))
    out_dir = _out_dir(out)
    result = rl_search(space, lambda s: evaluate_bloch_solution(s, space, ctx),
                       episodes=episodes, seed=seed,
                       log_path=out_dir / f"search_{dataset_id}_seed{seed}.jsonl")
    export_history_csv(result.history, out_dir / f"search_{dataset_id}_seed{seed}.csv")
    best = result.best_sample
    copies = best.choice(space, "duplication")
    repeats = best.choice(space, "layer")
    model = ModelSpec({"kind": "bloch", "dataset": dataset_id, "copies": copies},
                      {"kind": "tree", "repeats": None}, (0,), 2)
    # repeats are padded to the actual tree depth at decode time
    from .ansatz import tree_levels
    from .search import _pad_repeats
    levels = len(tree_levels([(i,) for i in range(copies)]))
    model = ModelSpec(model.encoder,
                      {"kind": "tree", "repeats": list(_pad_repeats(repeats, levels))},
                      (0,), 2)
    best_path = out_dir / f"search_{dataset_id}_seed{seed}_best.json"
    best_path.write_text(json.dumps({
        "model": json.loads(model.to_json()),
        "physical": list(ctx.candidates[best.choice(space, "physical")].qubits),
        "reward": result.best_reward, "acc": result.best_record.acc,
        "P": result.best_record.P}, indent=2))
    click.echo(json.dumps({"best": str(best_path), "reward": result.best_reward}))


@main.command("compile")
@click.option("--circuit", "circuit_path", type=click.Path(exists=True), required=True,
              help="OpenQASM 2.0 input.")
@click.option("--topology", default="lima", show_default=True)
@click.option("--strategy", type=click.Choice(["naive", "swap-free"]), default="naive",
              show_default=True)
@click.option("--blocks", default=1, show_default=True, help="Blocks for swap-free synthesis.")
@click.option("--out", default=None)
def cmd_compile(circuit_path, topology, strategy, blocks, out):
    """Compile a circuit to the device basis; write metrics and compiled QASM."""
    graph = _load_topology(topology)
    out_dir = _out_dir(out)
    try:
        circuit = from_qasm(Path(circuit_path).read_text())
        if strategy == "naive":
            compiled = route_naive(circuit, graph)
            metrics = compiled.metrics
            phys = compiled.circuit
        else:
            paths = find_paths(graph, circuit.n_qubits)
            if not paths:
                raise CompileError(
                    f"no {circuit.n_qubits}-qubit path on this device; "
                    "apply a quantum processor with more qubits")
            frag, mapping = build_swap_free(circuit.n_qubits, paths[0], blocks)
            phys = optimize_basis(decompose_to_basis(frag))
            metrics = circuit_metrics(phys, swap_count=0)
    except (CompileError, SimulationError) as e:
        raise click.ClickException(str(e))
    stem = Path(circuit_path).stem
    metrics_path = out_dir / f"{stem}_{strategy}_metrics.json"
    metrics_path.write_text(json.dumps(metrics, indent=2))
    if phys.n_params == 0:
        (out_dir / f"{stem}_{strategy}.qasm").write_text(to_qasm(phys))
    click.echo(json.dumps(metrics))


@main.command("eval")
@click.option("--report", "report_path", type=click.Path(exists=True), required=True)
@click.option("--dataset", "dataset_id", default=None,
              help="Override the dataset id stored in the model spec.")
@click.option("--n-test", default=320, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--noisy", is_flag=True)
@click.option("--p1", default=0.001, show_default=True)
@click.option("--p2", default=0.01, show_default=True)
@click.option("--p-ro", default=0.02, show_default=True)
@click.option("--shots", default=8192, show_default=True)
@click.option("--max-samples", default=50, show_default=True)
@click.option("--topology", default="lima", show_default=True)
def cmd_eval(report_path, dataset_id, n_test, seed, noisy, p1, p2, p_ro, shots,
             max_samples, topology):
    """Re-evaluate a saved TrainReport on freshly generated test data."""
    from .trainer import evaluate
    report = TrainReport.from_json(Path(report_path).read_text())
    model = report.model
    did = dataset_id or model.encoder.get("dataset")
    if did is None:
        raise click.ClickException("model has no dataset id; pass --dataset")
    _, test_samples = _load_split(did, None, 2, n_test, seed)
    y = np.array([s.label for s in test_samples])
    noise = NoiseModel(p1, p2, p_ro, seed=seed) if noisy else None
    graph = _load_topology(topology) if noisy else None
    acc, dev = evaluate(model, report.params, test_samples, y, noise=noise,
                        graph=graph, shots=shots,
                        max_samples=max_samples if noisy else None)
    click.echo(json.dumps({"accuracy": acc, "deviation": dev}))


@main.command("report")
@click.option("--dir", "in_dir", type=click.Path(exists=True), required=True)
@click.option("--out", default=None)
def cmd_report(in_dir, out):
    """Aggregate train_*.json reports in a directory into one CSV."""
    rows = []
    for path in sorted(Path(in_dir).glob("train_*.json")):
        d = json.loads(path.read_text())
        rows.append({
            "file": path.name,
            "dataset": d["model"]["encoder"].get("dataset", "image"),
            "test_acc": d["test_acc"],
            "noisy_acc": d.get("noisy_acc"),
            "deviation": d.get("deviation"),
        })
    if not rows:
        raise click.ClickException(f"no train_*.json reports in {in_dir}")
    out_path = _out_dir(out) / "summary.csv"
    with open(out_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    click.echo(str(out_path))


if __name__ == "__main__":
    main()
