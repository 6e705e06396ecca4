"""Command-line interface: one-shot assessments, the HTTP service, and
taxonomy validation."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .dynamic import (
    HttpSearchClient,
    RecordingSearchClient,
    ReplaySearchClient,
    replay_search_client_from_file,
)
from .errors import GuardError, TaxonomyValidationError
from .gateway import HttpChatBackend, RecordingBackend, replay_backend_from_file
from .intake import profile_from_json
from .pipeline import PipelineConfig, run_pipeline
from .register import load_default_band_config, load_band_config
from .report import render_report
from .service import INFERENCE_TRANSCRIPT, SEARCH_TRANSCRIPT, ServiceConfig, create_app
from .taxonomy import load_default_taxonomy, load_taxonomy, validate_registry
from ._util import fixed_clock, utc_now


@click.group()
def main() -> None:
    """Risk assessment engine for downstream LLM use cases."""


@main.command()
@click.option(
    "--profile", "profile_path", required=True, type=click.Path(exists=True),
    help="Use-case profile document (JSON).",
)
@click.option(
    "--out-dir", "out_dir", required=True, type=click.Path(),
    help="Directory for report.json, report.md, and report.html.",
)
@click.option(
    "--replay", "replay_dir", type=click.Path(exists=True), default=None,
    help="Read inference and search transcripts from this directory.",
)
@click.option(
    "--record", "record_dir", type=click.Path(), default=None,
    help="Record inference and search transcripts into this directory.",
)
@click.option("--force", is_flag=True, help="Run below the completeness threshold.")
@click.option(
    "--bands", "bands_path", type=click.Path(exists=True), default=None,
    help="Band configuration file (defaults to the bundled bands.json).",
)
@click.option("--max-parallel", default=8, show_default=True)
def assess(profile_path, out_dir, replay_dir, record_dir, force, bands_path, max_parallel):
    """Run one assessment over a profile document and write report files."""
    profile = profile_from_json(json.loads(Path(profile_path).read_text(encoding="utf-8")))
    registry = load_default_taxonomy()

    if replay_dir:
        backend = replay_backend_from_file(Path(replay_dir) / INFERENCE_TRANSCRIPT)
        search_path = Path(replay_dir) / SEARCH_TRANSCRIPT
        search_client = (
            replay_search_client_from_file(search_path)
            if search_path.exists()
            else ReplaySearchClient({})
        )
        clock = fixed_clock()
    else:
        backend = HttpChatBackend()
        search_client = HttpSearchClient()
        clock = utc_now
    if record_dir:
        backend = RecordingBackend(backend, Path(record_dir) / INFERENCE_TRANSCRIPT)
        search_client = RecordingSearchClient(
            search_client, Path(record_dir) / SEARCH_TRANSCRIPT
        )

    band_config = (
        load_band_config(Path(bands_path).read_bytes())
        if bands_path
        else load_default_band_config()
    )
    cfg = PipelineConfig(force=force, max_parallel=max_parallel, band_config=band_config)

    from .gateway import InferenceGateway

    try:
        outcome = run_pipeline(
            profile, registry, InferenceGateway(backend, max_in_flight=max_parallel),
            search_client, cfg, clock=clock,
        )
    except GuardError as exc:
        raise click.ClickException(str(exc)) from exc

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_bytes(render_report(outcome.report, "structured"))
    (out / "report.md").write_bytes(render_report(outcome.report, "markdown"))
    (out / "report.html").write_bytes(render_report(outcome.report, "html"))
    click.echo(
        f"assessment complete: {len(outcome.risk_register.records)} register record(s), "
        f"{len(outcome.eliminated)} eliminated; reports written to {out}"
    )


@main.command()
@click.option("--addr", default="127.0.0.1:8000", show_default=True, help="HOST:PORT")
@click.option(
    "--store", "store_dir", required=True, type=click.Path(),
    help="Session store directory.",
)
@click.option("--replay", "replay_dir", type=click.Path(exists=True), default=None)
@click.option("--record", "record_dir", type=click.Path(), default=None)
@click.option(
    "--static-dir", "static_dir", type=click.Path(), default=None,
    help="Directory of built web UI assets to serve at /.",
)
def serve(addr, store_dir, replay_dir, record_dir, static_dir):
    """Run the HTTP service."""
    import uvicorn

    host, _, port = addr.rpartition(":")
    config = ServiceConfig(
        store_dir=store_dir,
        replay_dir=replay_dir,
        record_dir=record_dir,
        static_dir=static_dir,
    )
    app = create_app(config)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))


@main.group()
def taxonomy() -> None:
    """Taxonomy file utilities."""


@taxonomy.command()
@click.argument("file", type=click.Path(exists=True))
def validate(file):
    """Validate a taxonomy document and report violations."""
    data = Path(file).read_bytes()
    try:
        registry = load_taxonomy(data)
    except TaxonomyValidationError as exc:
        click.echo(f"FAIL: {file}")
        for violation in exc.violations:
            click.echo(f"  {violation.constraint} [{violation.entity_id}]: {violation.detail}")
        sys.exit(1)
    except GuardError as exc:
        click.echo(f"FAIL: {file}: {exc}")
        sys.exit(1)
    report = validate_registry(registry)
    click.echo(
        f"OK: {file} ({len(registry.broad_risks)} broad risks, "
        f"{len(registry.sub_risks)} sub-risks, version {registry.version})"
    )
    assert report.passed


if __name__ == "__main__":
    main()
