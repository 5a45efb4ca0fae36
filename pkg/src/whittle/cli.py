"""Operational command line: synth, train, index, serve, simulate, evaluate."""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import click
import numpy as np

from .dataset import SynthConfig, load_manifest, save_manifest, synthesize_dataset
from .evaluation import ExperimentConfig, Policy, run_episode, run_experiment, write_results
from .indexing import build_context, load_context, save_index, save_models, train_models
from .ranker import TrainConfig


@click.group()
def main():
    """Interactive attribute-feedback image search toolkit."""


@main.command()
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--n", "n_images", default=2000, show_default=True)
@click.option("--d", "dim", default=10, show_default=True)
@click.option("--m", "n_attributes", default=6, show_default=True)
@click.option("--classes", "n_classes", default=10, show_default=True)
@click.option("--pairs", "pairs_per_attribute", default=500, show_default=True)
@click.option("--noise-sd", default=0.0, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--name", default="synthetic", show_default=True)
def synth(out, n_images, dim, n_attributes, n_classes, pairs_per_attribute, noise_sd, seed, name):
    """Generate a synthetic labeled dataset file."""
    manifest = synthesize_dataset(
        SynthConfig(
            n_images=n_images,
            dim=dim,
            n_attributes=n_attributes,
            n_classes=n_classes,
            pairs_per_attribute=pairs_per_attribute,
            noise_sd=noise_sd,
            seed=seed,
            name=name,
        )
    )
    save_manifest(manifest, out)
    click.echo(f"wrote {manifest.n_images} images, {len(manifest.comparisons)} comparisons to {out}")


@main.command()
@click.option("--dataset", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--c", "penalty", default=1.0, show_default=True, help="hinge penalty C")
@click.option("--epochs", default=500, show_default=True)
@click.option("--seed", default=0, show_default=True)
def train(dataset, out, penalty, epochs, seed):
    """Train and calibrate one ranking model per attribute."""
    manifest = load_manifest(dataset)
    models = train_models(manifest, TrainConfig(C=penalty, epochs=epochs, seed=seed))
    save_models(models, manifest.attribute_names, out)
    rates = ", ".join(f"{m.train_violation_rate:.3f}" for m in models)
    click.echo(f"trained {len(models)} attribute models (violation rates: {rates}) -> {out}")


@main.command()
@click.option("--dataset", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--model", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def index(dataset, model, out):
    """Build per-attribute pivot trees and write the index file."""
    manifest = load_manifest(dataset)
    ctx = load_context(manifest, model)
    save_index(ctx, out)
    click.echo(f"indexed {ctx.n_images} images across {ctx.n_attributes} attribute trees -> {out}")


@main.command()
@click.option("--dataset", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--model", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--index", "index_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
def serve(dataset, model, index_path, port, host):
    """Serve the HTTP API for one dataset."""
    import uvicorn

    from .service import SearchEngine, create_app

    manifest = load_manifest(dataset)
    ctx = load_context(manifest, model, index_path)
    engine = SearchEngine({manifest.name: ctx})
    uvicorn.run(create_app(engine), host=host, port=port)


@main.command()
@click.option("--dataset", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--model", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--policy", type=click.Choice([p.value for p in Policy]), default="active_pivots",
              show_default=True)
@click.option("--target", default=None, type=int, help="target image id (default: seeded random)")
@click.option("--iterations", default=10, show_default=True)
@click.option("--noise-sd", default=0.0, show_default=True)
@click.option("--seed", default=0, show_default=True)
def simulate(dataset, model, policy, target, iterations, noise_sd, seed):
    """Run one simulated episode and print per-iteration records as JSON lines."""
    manifest = load_manifest(dataset)
    ctx = load_context(manifest, model)
    rng = np.random.default_rng(seed)
    if target is None:
        target = int(rng.integers(ctx.n_images))
    config = ExperimentConfig(
        policies=[Policy(policy)], iterations=iterations, queries=1,
        seed=seed, noise_sd=noise_sd,
    )
    records = run_episode(ctx, Policy(policy), target, iterations, config, seed)
    for rec in records:
        click.echo(json.dumps(dataclasses.asdict(rec)))


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
def evaluate(config_path, out_dir):
    """Run the policy-comparison experiment described by a config file."""
    with open(config_path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    manifest = load_manifest(doc["dataset"])
    if "model" in doc:
        ctx = load_context(manifest, doc["model"], doc.get("index"))
    else:
        train_cfg = TrainConfig(**doc.get("train", {}))
        ctx = build_context(manifest, train_models(manifest, train_cfg))
    config = ExperimentConfig(
        policies=[Policy(p) for p in doc["policies"]],
        iterations=int(doc.get("iterations", 10)),
        queries=int(doc.get("queries", 200)),
        seed=int(doc.get("seed", 0)),
        k_page=int(doc.get("K_page", 40)),
        k_ndcg=int(doc.get("K_ndcg", 50)),
        noise_sd=doc.get("noise_sd", 0.0),
        n_statements=int(doc.get("n_statements", 8)),
        use_abs_decision=bool(doc.get("use_abs_decision", False)),
    )
    result = run_experiment(ctx, config)
    csv_path, plot_path = write_results(result, out_dir)
    click.echo(f"wrote {csv_path} and {plot_path}")


if __name__ == "__main__":
    main()
