# ============================================================================
# apps/corpus/commands.py - `synth` subcommand
# ============================================================================

import logging

import click

from apps.cli.options import resolve_config, shared_options
from .services import write_corpus
from .synthetic import generate_synthetic_corpus

logger = logging.getLogger(__name__)


@click.command("synth")
@shared_options
@click.option("--n", "n_samples", type=int, default=64, show_default=True, help="Number of samples")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
def synth_command(config_path, seed, task, set_pairs, n_samples, out_path):
    """Write a deterministic synthetic corpus"""
    config = resolve_config(config_path, seed, task, set_pairs)
    samples = generate_synthetic_corpus(config.seed, n_samples, task=config.task)
    write_corpus(samples, out_path)
    click.echo(f"Wrote {len(samples)} samples to {out_path}")
