"""Command-line client for the chainforge pipeline.

Each subcommand posts to the HTTP service — by default an in-process
instance, or a remote one via ``--server`` — and prints the JSON
result to stdout. Domain errors print to stderr and exit with code 1.
"""

from __future__ import annotations

import asyncio
import json
import sys

import click
import httpx

from chainforge import __version__
from chainforge.chain import EXPORT_FORMATS
from chainforge.pipeline import REPORT_FORMATS, configure_logging

REQUEST_TIMEOUT = 600.0


@click.group()
@click.version_option(version=__version__, prog_name="chainforge")
@click.option(
    "--server",
    metavar="URL",
    default=None,
    help="Base URL of a running service; defaults to in-process execution.",
)
@click.pass_context
def main(ctx: click.Context, server: str | None) -> None:
    """Package supply-chain analysis pipeline."""
    configure_logging()
    ctx.obj = server


def _post(ctx: click.Context, path: str, payload: dict) -> dict:
    server: str | None = ctx.obj
    if server:
        response = httpx.post(
            server.rstrip("/") + path, json=payload, timeout=REQUEST_TIMEOUT
        )
    else:
        response = asyncio.run(_post_in_process(path, payload))
    if response.status_code != 200:
        try:
            body = response.json()
        except ValueError:
            body = {}
        if "error" in body:
            detail = f"{body['error']}: {body['detail']}"
        elif "detail" in body:
            detail = json.dumps(body["detail"])
        else:
            detail = response.text or f"HTTP {response.status_code}"
        click.echo(f"error: {detail}", err=True)
        sys.exit(1)
    return response.json()


async def _post_in_process(path: str, payload: dict) -> httpx.Response:
    from chainforge.service import create_app

    transport = httpx.ASGITransport(app=create_app())
    async with httpx.AsyncClient(
        transport=transport, base_url="http://chainforge.internal"
    ) as client:
        return await client.post(path, json=payload, timeout=REQUEST_TIMEOUT)


def _emit(payload: dict) -> None:
    click.echo(json.dumps(payload, indent=2, sort_keys=True))


def _parse_seeds(raw: str) -> list[str]:
    seeds = [part.strip() for part in raw.split(",") if part.strip()]
    if not seeds:
        raise click.UsageError("--seeds needs at least one package name")
    return seeds


@main.command("ingest-db")
@click.option("--input", "input_path", required=True, help="Registry metadata JSONL file.")
@click.option("--db", "db_path", required=True, help="Output dependency database path.")
@click.option(
    "--include-extra-gated/--no-include-extra-gated",
    default=True,
    show_default=True,
    help="Keep requirements that apply only when an extra is enabled.",
)
@click.option("--threads", default=1, show_default=True, type=click.IntRange(min=1))
@click.pass_context
def ingest_db(ctx, input_path, db_path, include_extra_gated, threads):
    """Ingest a metadata dump into a dependency database."""
    result = _post(
        ctx,
        "/ingest-db",
        {
            "input": input_path,
            "db": db_path,
            "include_extra_gated": include_extra_gated,
            "threads": threads,
        },
    )
    _emit(result["manifest"])


@main.command("build-sc")
@click.option("--db", "db_path", required=True, help="Dependency database path.")
@click.option("--seeds", required=True, help="Comma-separated seed package names.")
@click.option("--out", "out_path", required=True, help="Output graph JSON path.")
@click.option(
    "--on-missing-seed",
    type=click.Choice(["error", "skip"]),
    default="error",
    show_default=True,
)
@click.option("--stable", is_flag=True, help="Omit timestamps for diffable output.")
@click.pass_context
def build_sc(ctx, db_path, seeds, out_path, on_missing_seed, stable):
    """Build the supply-chain graph of the given seeds."""
    result = _post(
        ctx,
        "/build-sc",
        {
            "db": db_path,
            "seeds": _parse_seeds(seeds),
            "out": out_path,
            "on_missing_seed": on_missing_seed,
            "stable": stable,
        },
    )
    _emit(result["stats"])


@main.command("clusters")
@click.option("--input", "graph_path", required=True, help="Graph JSON path.")
@click.option("--out", "out_path", required=True, help="Output report JSON path.")
@click.option("--rng-seed", default=0, show_default=True, type=int)
@click.option("--resolution", default=1.0, show_default=True, type=float)
@click.option("--max-passes", default=10, show_default=True, type=click.IntRange(min=1))
@click.option("--dot-dir", default=None, help="Directory for per-cluster DOT files.")
@click.pass_context
def clusters(ctx, graph_path, out_path, rng_seed, resolution, max_passes, dot_dir):
    """Cluster the pruned graph and classify cluster shapes."""
    result = _post(
        ctx,
        "/clusters",
        {
            "graph": graph_path,
            "out": out_path,
            "rng_seed": rng_seed,
            "resolution": resolution,
            "max_passes": max_passes,
            "dot_dir": dot_dir,
        },
    )
    _emit(result["report"])


@main.command("disengagement")
@click.option("--input", "graph_path", required=True, help="Graph JSON path.")
@click.option("--db", "db_path", required=True, help="Dependency database path.")
@click.option("--out", "out_path", required=True, help="Output report JSON path.")
@click.option(
    "--include-prereleases/--no-include-prereleases",
    default=True,
    show_default=True,
    help="Treat pre-releases as candidates for the latest version.",
)
@click.pass_context
def disengagement(ctx, graph_path, db_path, out_path, include_prereleases):
    """Detect packages whose newest release left the supply chain."""
    result = _post(
        ctx,
        "/disengagement",
        {
            "graph": graph_path,
            "db": db_path,
            "out": out_path,
            "include_prereleases": include_prereleases,
        },
    )
    _emit(result["report"])


@main.command("report")
@click.option("--input", "graph_path", required=True, help="Graph JSON path.")
@click.option("--clusters", "clusters_path", required=True, help="Cluster report path.")
@click.option(
    "--disengagement", "disengagement_path", required=True, help="Disengagement report path."
)
@click.option("--downloads", default=None, help="Optional downloads CSV path.")
@click.option("--out", "out_path", required=True, help="Output summary path.")
@click.option(
    "--format",
    "fmt",
    type=click.Choice(list(REPORT_FORMATS)),
    default="json",
    show_default=True,
)
@click.option("--stable", is_flag=True, help="Omit timestamps for diffable output.")
@click.pass_context
def report(ctx, graph_path, clusters_path, disengagement_path, downloads, out_path, fmt, stable):
    """Consolidate all artifacts into one summary document."""
    result = _post(
        ctx,
        "/report",
        {
            "graph": graph_path,
            "clusters": clusters_path,
            "disengagement": disengagement_path,
            "downloads": downloads,
            "out": out_path,
            "format": fmt,
            "stable": stable,
        },
    )
    _emit(result["summary"])


@main.command("export")
@click.option("--input", "graph_path", required=True, help="Graph JSON path.")
@click.option("--out", "out_path", required=True, help="Output file path.")
@click.option(
    "--format",
    "fmt",
    type=click.Choice(list(EXPORT_FORMATS)),
    required=True,
)
@click.pass_context
def export(ctx, graph_path, out_path, fmt):
    """Re-export a saved graph as edge-csv, dot, graphml, or json."""
    result = _post(
        ctx, "/export", {"graph": graph_path, "out": out_path, "format": fmt}
    )
    _emit(result)


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from chainforge.service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
