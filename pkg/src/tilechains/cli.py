"""Batch entry points: ingest, mine, infer, score, chains, bench, serve.

Every run is reproducible: one --seed drives all randomness and artifacts
are written with sorted keys, so identical configurations produce byte-
identical JSON.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .bench import run_benchmark
from .data import DataError, load_transactions, read_records
from .explorer import Session
from .scoring import local_score_per_tile, score_report

EXIT_CODES = {
    "input-not-found": 2,
    "invalid-input": 3,
    "unknown-pattern": 4,
    "model-failure": 5,
}


def _fail(category: str, detail: str):
    click.echo(f"{category}: {detail}", err=True)
    sys.exit(EXIT_CODES.get(category, 1))


def _load_dataset(path: str):
    p = Path(path)
    if not p.exists():
        _fail("input-not-found", str(p))
    try:
        if p.suffix == ".json" and not p.name.endswith(".jsonl"):
            obj = json.loads(p.read_text())
            if "matrix" in obj:
                from .data import Dataset

                return Dataset.from_json(obj)
        return load_transactions(read_records(p))
    except DataError as exc:
        _fail("invalid-input", str(exc))


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _session(dataset, mode, domains, min_support, jaccard, score, seed) -> Session:
    order = [d.strip() for d in domains.split(",")] if domains else None
    try:
        return Session(
            dataset,
            mode=mode,
            domain_order=order,
            min_support=min_support,
            jaccard_threshold=jaccard,
            score_kind=score,
            seed=seed,
        )
    except DataError as exc:
        _fail("invalid-input", str(exc))


def _common(fn):
    fn = click.option("--input", "input_path", required=True, help="CSV or JSONL records")(fn)
    fn = click.option("--mode", type=click.Choice(["binary", "real"]), default="binary", show_default=True)(fn)
    fn = click.option("--domains", default=None, help="comma-separated domain order")(fn)
    fn = click.option("--min-support", default=3, show_default=True)(fn)
    fn = click.option("--jaccard", default=0.1, show_default=True)(fn)
    fn = click.option("--score", type=click.Choice(["local", "global"]), default="local", show_default=True)(fn)
    fn = click.option("--seed", default=0, show_default=True)(fn)
    fn = click.option("--out", "out_dir", default="out", show_default=True)(fn)
    return fn


@click.group()
def main():
    """Bicluster-chain discovery over entity co-occurrence data."""


@main.command()
@click.option("--input", "input_path", required=True)
@click.option("--out", "out_dir", default="out", show_default=True)
def ingest(input_path, out_dir):
    """Load records and write the dataset artifact."""
    dataset = _load_dataset(input_path)
    _write_json(Path(out_dir) / "dataset.json", dataset.to_json())
    click.echo(
        f"{dataset.matrix.n_rows} documents, {dataset.matrix.n_cols} entities, "
        f"{len(dataset.domains)} domains, {len(dataset.matrix.values)} nonzeros"
    )


@main.command()
@_common
def mine(input_path, mode, domains, min_support, jaccard, score, seed, out_dir):
    """Mine closed biclusters for every relation of the schema."""
    dataset = _load_dataset(input_path)
    session = _session(dataset, mode, domains, min_support, jaccard, score, seed)
    _write_json(Path(out_dir) / "biclusters.json", _biclusters_json(session))
    click.echo(f"{len(session.biclusters)} biclusters over {len(session.schema.relations)} relations")


@main.command()
@_common
def infer(input_path, mode, domains, min_support, jaccard, score, seed, out_dir):
    """Infer the background maximum entropy model."""
    dataset = _load_dataset(input_path)
    session = _session(dataset, mode, domains, min_support, jaccard, score, seed)
    _write_json(Path(out_dir) / "background-model.json", session.model.to_json())
    click.echo(f"background model converged={session.model.converged_}")


@main.command()
@_common
@click.option("--pattern", "patterns", multiple=True, required=True, help="bicluster or chain id")
def score(input_path, mode, domains, min_support, jaccard, score, seed, out_dir, patterns):
    """Score patterns against the background model."""
    dataset = _load_dataset(input_path)
    session = _session(dataset, mode, domains, min_support, jaccard, score, seed)
    reports = []
    for pid in patterns:
        try:
            value = session.score_pattern(pid)
            per_tile = None
            if score == "local":
                per_tile = local_score_per_tile(
                    session.pattern_tiles(pid), session.model, session.matrix
                )
            reports.append(score_report(pid, score, mode, value, per_tile))
        except KeyError as exc:
            _fail("unknown-pattern", str(exc))
    _write_json(Path(out_dir) / "scores.json", reports)
    for r in reports:
        click.echo(f"{r['pattern_id']}: {r['value']}")


@main.command()
@_common
@click.option("--seed-bicluster", default=None, help="bicluster id to search chains through")
def chains(input_path, mode, domains, min_support, jaccard, score, seed, out_dir, seed_bicluster):
    """Run the full pipeline: mine, infer, and (optionally) rank chains."""
    dataset = _load_dataset(input_path)
    session = _session(dataset, mode, domains, min_support, jaccard, score, seed)
    out = Path(out_dir)
    _write_json(out / "biclusters.json", _biclusters_json(session))
    _write_json(out / "background-model.json", session.model.to_json())
    click.echo(
        f"{len(session.biclusters)} biclusters; model converged={session.model.converged_}"
    )
    if seed_bicluster is None:
        return
    try:
        result = session.full_path_evaluate(seed_bicluster)
    except KeyError as exc:
        _fail("unknown-pattern", str(exc))
    ranked = [
        {**cs.chain.to_json(), "score": cs.score} for cs in result.ranked
    ]
    _write_json(
        out / "chains.json",
        {
            "seed": seed_bicluster,
            "score_kind": score,
            "chains": ranked,
            "warnings": result.warnings,
        },
    )
    click.echo(f"{len(ranked)} chains ranked through {seed_bicluster}")


def _biclusters_json(session: Session) -> dict:
    labels = session.dataset.entity_labels
    return {
        "relations": [r.id for r in session.schema.relations],
        "biclusters": [
            session.biclusters[bid].to_json(labels)
            for bid in sorted(session.biclusters)
        ],
    }


@main.command()
@click.option("--sizes", default="200,400,800", show_default=True)
@click.option("--betas", default="0.01,0.02,0.03,0.04,0.05", show_default=True)
@click.option("--modes", default="binary,real", show_default=True)
@click.option("--reps", default=3, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--tol-real", default=1e-4, show_default=True, help="gradient tolerance for timed real-model runs")
@click.option("--eval-tiles", default=50, show_default=True, help="random tiles per evaluation timing")
@click.option("--out", "out_csv", default="bench.csv", show_default=True)
def bench(sizes, betas, modes, reps, seed, tol_real, eval_tiles, out_csv):
    """Time model inference and tile-set evaluation on synthetic data."""
    rows = run_benchmark(
        sizes=[int(s) for s in sizes.split(",")],
        betas=[float(b) for b in betas.split(",")],
        modes=tuple(modes.split(",")),
        reps=reps,
        seed=seed,
        tol_real=tol_real,
        eval_tiles=eval_tiles,
        out_csv=out_csv,
        progress=lambda row: click.echo(
            f"{row['mode']} {row['N']}x{row['M']} beta={row['beta']} "
            f"{row['phase']}: {row['mean_seconds']:.3f}s over {row['runs']} runs"
        ),
    )
    click.echo(f"{len(rows)} rows -> {out_csv}")


@main.command()
@click.option("--port", default=8765, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--data-dir", default=".", show_default=True)
def serve(port, host, data_dir):
    """Serve the session HTTP API for the browser frontend."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(data_dir), host=host, port=port)


if __name__ == "__main__":
    main()
