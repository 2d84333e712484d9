# ============================================================================
# apps/stylelab/commands.py - `label` subcommand
# ============================================================================

import logging

import click

from apps.cli.options import resolve_config, shared_options
from apps.corpus.services import load_corpus, write_corpus
from .services import format_style_report, label_samples, prune_functional_only

logger = logging.getLogger(__name__)


@click.command("label")
@shared_options
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="Labeled corpus destination (omit to only report)")
@click.option("--report", is_flag=True, help="Print the style distribution table")
@click.option("--keep-functional-only", is_flag=True, help="Do not drop all-functional argument samples")
def label_command(config_path, seed, task, set_pairs, input_path, out_path, report, keep_functional_only):
    """Assign rule-based style labels to every target sentence"""
    config = resolve_config(config_path, seed, task, set_pairs)
    samples = label_samples(load_corpus(input_path, n_styles=config.style_arity), config.task)
    if config.task == "argument" and not keep_functional_only:
        samples = prune_functional_only(samples)
    if out_path:
        write_corpus(samples, out_path)
        click.echo(f"Labeled {len(samples)} samples -> {out_path}")
    if report:
        click.echo(format_style_report(samples, config.task))
