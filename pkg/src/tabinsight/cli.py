"""Command-line front end: ingest, sketch, query, overview, bench, synth, serve.

Human-readable tables go to stdout; --json writes line-delimited JSON with
sorted keys, so identical inputs and seeds produce byte-identical files (the
schema is documented in docs/cli-output.md). Every failure exits nonzero
with a one-line diagnostic.
"""

from __future__ import annotations

import functools
import json
import time
from pathlib import Path

import click

from . import __version__
from .classes import ASCENDING, CLASS_SPECS, DESCENDING
from .dataset import head, ingest_csv, to_csv
from .engine import AUTO, EXACT, MODES, SKETCH, Engine
from .errors import TabinsightError
from .query import InsightDescriptor, InsightQuery, overview, rank_insights
from .sketch.hyperplane import default_width
from .store import init_store, open_store
from .synth import generate, parse_plant


def friendly_errors(fn):
    """Engine failures become one-line diagnostics with exit code 1."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except TabinsightError as exc:
            raise click.ClickException(str(exc)) from exc

    return wrapper


def _parse_range(ctx, param, value):
    if value is None:
        return None
    try:
        lo_text, hi_text = value.split(",")
        lo, hi = float(lo_text), float(hi_text)
    except ValueError:
        raise click.BadParameter(f"expected lo,hi — got {value!r}")
    if lo > hi:
        raise click.BadParameter(f"empty range [{lo}, {hi}]")
    return (lo, hi)


def _write_jsonl(path: Path, records: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def _descriptor_record(d: InsightDescriptor) -> dict:
    return {
        "class_id": d.class_id,
        "attributes": list(d.attributes),
        "metric_id": d.metric_id,
        "value": d.value,
        "approximate": d.approximate,
        "signed_aux": d.signed_aux,
    }


@click.group()
@click.version_option(__version__, prog_name="tabinsight")
def main() -> None:
    """Insight recommendations over tabular data, exact or sketch-backed."""


@main.command()
@click.argument("csv_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", required=True, type=click.Path(path_type=Path), help="Store directory to create.")
@click.option("--name", default=None, help="Dataset name (defaults to the file stem).")
@click.option("--delimiter", default=",", show_default=True)
@click.option("--no-header", is_flag=True, help="Treat the first line as data.")
@click.option("--null-token", default="", help="Token read as a missing value.")
@friendly_errors
def ingest(csv_path: Path, out: Path, name, delimiter, no_header, null_token) -> None:
    """Build a dataset store (typed columns + moment summaries) from a CSV."""
    ds = ingest_csv(
        csv_path.read_bytes(),
        name=name or csv_path.stem,
        delimiter=delimiter,
        header=not no_header,
        null_token=null_token,
    )
    init_store(out, ds)
    numeric = len(ds.numeric_columns())
    click.echo(
        f"ingested {ds.n_rows} rows, {len(ds.columns)} columns "
        f"({numeric} numeric, {len(ds.columns) - numeric} categorical) -> {out}"
    )


@main.command()
@click.argument("store_path", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--k", type=click.IntRange(min=1), default=None, help="Sign bits per column (default: width rule for n).")
@click.option("--seed", type=int, default=0, show_default=True)
@friendly_errors
def sketch(store_path: Path, k, seed) -> None:
    """Build and persist hyperplane sketches for every numeric column."""
    store = open_store(store_path)
    width = k if k is not None else default_width(store.dataset.n_rows)
    stats = store.build_sketches(k=width, seed=seed)
    bits = stats["columns"] * width
    click.echo(
        f"sketched {stats['columns']} columns (k={width}, seed={seed}) "
        f"in {stats['seconds']:.3f}s"
    )
    click.echo(
        f"sign memory: {bits} bits total ({width} per column); "
        f"{stats['bytes_on_disk']} bytes on disk with accumulators"
    )


@main.command()
@click.argument("store_path", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--class", "class_id", required=True, help="Insight class id or alias.")
@click.option("--fix", "fixed", multiple=True, help="Attribute that must appear (repeatable).")
@click.option("--range", "metric_range", default=None, callback=_parse_range, help="Keep values inside lo,hi.")
@click.option("--top", type=click.IntRange(min=1), default=10, show_default=True)
@click.option("--mode", type=click.Choice(list(MODES)), default=AUTO, show_default=True)
@click.option("--order", type=click.Choice([DESCENDING, ASCENDING]), default=None)
@click.option("--json", "json_path", type=click.Path(path_type=Path), default=None, help="Also write descriptors as JSON lines.")
@friendly_errors
def query(store_path, class_id, fixed, metric_range, top, mode, order, json_path) -> None:
    """Rank insights of one class, with optional constraints."""
    eng = open_store(store_path).engine()
    results = rank_insights(
        eng,
        InsightQuery(
            class_id=class_id,
            fixed=tuple(fixed),
            metric_range=metric_range,
            limit=top,
            mode=mode,
            order=order,
        ),
    )
    if not results:
        click.echo("no insights matched")
    for i, d in enumerate(results, start=1):
        attrs = ", ".join(d.attributes)
        flag = "~" if d.approximate else " "
        signed = "" if d.signed_aux is None else f"  (signed {d.signed_aux:+.6g})"
        click.echo(f"{i:3d}. {flag} {d.metric_id}({attrs}) = {d.value:.6g}{signed}")
    if json_path is not None:
        _write_jsonl(Path(json_path), [_descriptor_record(d) for d in results])
        click.echo(f"wrote {len(results)} records -> {json_path}")


@main.command("overview")
@click.argument("store_path", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--class", "class_id", required=True, help="Insight class id or alias.")
@click.option("--mode", type=click.Choice(list(MODES)), default=AUTO, show_default=True)
@click.option("--json", "json_path", type=click.Path(path_type=Path), default=None)
@friendly_errors
def overview_cmd(store_path, class_id, mode, json_path) -> None:
    """Print the class-wide matrix (pair classes) or value list (unary)."""
    eng = open_store(store_path).engine()
    ov = overview(eng, class_id, mode=mode)
    note = " (approximate)" if ov.approximate else ""
    click.echo(f"{ov.class_id} overview by {ov.metric_id}{note}")
    if ov.kind == "matrix":
        width = max(len(a) for a in ov.attributes)
        header = " " * (width + 2) + "  ".join(a.rjust(8) for a in ov.attributes)
        click.echo(header)
        for name, row in zip(ov.attributes, ov.matrix):
            cells = "  ".join(
                ("--".rjust(8) if v is None else f"{v:+.4f}".rjust(8)) for v in row
            )
            click.echo(f"{name.ljust(width + 2)}{cells}")
    else:
        for name, v in zip(ov.attributes, ov.values):
            shown = "undefined" if v is None else f"{v:.6g}"
            click.echo(f"{name}: {shown}")
    if json_path is not None:
        record = {
            "class_id": ov.class_id,
            "metric_id": ov.metric_id,
            "kind": ov.kind,
            "attributes": list(ov.attributes),
            "approximate": ov.approximate,
        }
        if ov.kind == "matrix":
            record["matrix"] = [list(row) for row in ov.matrix]
        else:
            record["values"] = list(ov.values)
        _write_jsonl(Path(json_path), [record])
        click.echo(f"wrote overview -> {json_path}")


def _pairwise_phase_times(ds, k: int, seed: int) -> dict:
    """Time the all-pairs correlation phase in both modes.

    Sign vectors are prepared before the timed sketch phase: building them is
    the `sketch` step's one-off cost, reported separately as build_seconds.
    """
    eng = Engine(ds, k=k, seed=seed)
    started = time.perf_counter()
    eng.exact_correlation_matrix()
    exact_seconds = time.perf_counter() - started

    started = time.perf_counter()
    eng.sketches()
    for col in ds.numeric_columns():
        eng.sign_vector(col.name)
    build_seconds = time.perf_counter() - started

    started = time.perf_counter()
    eng.sketch_correlation_matrix()
    sketch_seconds = time.perf_counter() - started
    return {
        "n_rows": ds.n_rows,
        "exact_seconds": exact_seconds,
        "sketch_seconds": sketch_seconds,
        "build_seconds": build_seconds,
    }


@main.command()
@click.argument("store_path", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--k", type=click.IntRange(min=1), default=256, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--sizes", default=None, help="Comma-separated row counts for a scaling run.")
@click.option("--json", "json_path", type=click.Path(path_type=Path), default=None)
@friendly_errors
def bench(store_path, k, seed, sizes, json_path) -> None:
    """Time exact vs sketch all-pairs correlation and report the ratio."""
    ds = open_store(store_path).dataset
    d = len(ds.numeric_columns())
    rows = []
    if sizes:
        try:
            cuts = [int(s) for s in sizes.split(",")]
        except ValueError:
            raise click.BadParameter(f"--sizes expects integers, got {sizes!r}")
        for n in cuts:
            rows.append(_pairwise_phase_times(head(ds, n), k, seed))
    else:
        rows.append(_pairwise_phase_times(ds, k, seed))
    click.echo(f"all-pairs correlation over {d} numeric columns, k={k}")
    click.echo(f"{'rows':>10}  {'exact':>10}  {'sketch':>10}  {'speedup':>8}  {'build':>10}")
    for r in rows:
        ratio = r["exact_seconds"] / max(r["sketch_seconds"], 1e-12)
        click.echo(
            f"{r['n_rows']:>10}  {r['exact_seconds']:>9.4f}s  {r['sketch_seconds']:>9.4f}s  "
            f"{ratio:>7.1f}x  {r['build_seconds']:>9.4f}s"
        )
    if json_path is not None:
        record = {
            "n_columns": d,
            "k": k,
            "seed": seed,
            "phases": [
                {**r, "speedup": r["exact_seconds"] / max(r["sketch_seconds"], 1e-12)}
                for r in rows
            ],
        }
        _write_jsonl(Path(json_path), [record])
        click.echo(f"wrote bench results -> {json_path}")


@main.command()
@click.option("--rows", type=click.IntRange(min=1), required=True)
@click.option("--cols", type=click.IntRange(min=1), required=True)
@click.option("--plant", "plants", multiple=True, help="kind:value:attrs (repeatable).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(path_type=Path))
@click.option("--name", default="synth", show_default=True)
def synth(rows, cols, plants, seed, out: Path, name) -> None:
    """Generate a CSV with planted structure; ground truth lands alongside."""
    try:
        specs = [parse_plant(p) for p in plants]
        ds, truth = generate(rows, cols, specs, seed=seed, name=name)
    except ValueError as exc:
        raise click.BadParameter(str(exc))
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(to_csv(ds), encoding="utf-8")
    truth_path = out.with_name(out.stem + ".truth.json")
    truth_path.write_text(json.dumps(truth, indent=2, sort_keys=True), encoding="utf-8")
    click.echo(f"wrote {rows} rows x {cols} columns -> {out}")
    click.echo(f"ground truth -> {truth_path}")


@main.command()
@click.argument("store_path", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--port", type=int, default=8718, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@friendly_errors
def serve(store_path: Path, port: int, host: str) -> None:
    """Run the HTTP service over one dataset store."""
    import uvicorn

    from .service import create_app

    app = create_app(store_path)
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
