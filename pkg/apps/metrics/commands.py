# ============================================================================
# apps/metrics/commands.py - `evaluate` subcommand
# ============================================================================

import logging

import click

from apps.cli.options import resolve_config, shared_options
from apps.cli.services import require_paths
from apps.corpus.services import load_corpus, prepare_samples
from apps.inference.schemas import DecodeOptions, GenerationRecord
from apps.training.checkpoint import load_checkpoint
from shared.utils import atomic_write_text, iter_jsonl
from .corruption import format_corruption, run_corruption_study
from .services import (
    build_eval_records, format_correlation, format_summary, plan_quality_correlation, summarize, write_bins_csv,
)

logger = logging.getLogger(__name__)


def load_generations(path: str):
    return [GenerationRecord.model_validate(record) for _, record in iter_jsonl(path)]


@click.command("evaluate")
@shared_options
@click.option("--generations", "generations_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Generation JSONL from `generate`")
@click.option("--references", "test_path", type=click.Path(dir_okay=False), default=None,
              help="Reference corpus JSONL")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None, help="Write the table here")
@click.option("--bins", "n_bins", type=int, default=10, show_default=True)
@click.option("--bins-csv", "bins_path", type=click.Path(dir_okay=False), default=None)
@click.option("--checkpoint", type=click.Path(file_okay=False), default=None,
              help="Model for --corruption-study")
@click.option("--corruption-study", is_flag=True, default=False,
              help="Generate from corrupted oracle plans and report BLEU per corruption level")
def evaluate_command(config_path, seed, task, set_pairs, generations_path, test_path, out_path, n_bins, bins_path,
                     checkpoint, corruption_study):
    """Score generations against references; optionally run the plan-corruption study"""
    config = resolve_config(config_path, seed, task, set_pairs, test_path=test_path, checkpoint=checkpoint)
    require_paths(config, "test_path")
    references = prepare_samples(load_corpus(config.test_path, n_styles=config.style_arity),
                                 config.effective_bank_cap, config.extract_candidates)
    sections = []

    if generations_path:
        records = build_eval_records(load_generations(generations_path), references)
        summary, scored = summarize(records)
        sections.append(format_summary(summary))
        if len(scored) >= max(n_bins, 2):
            correlation = plan_quality_correlation(scored, n_bins)
            sections.append(format_correlation(correlation))
            if bins_path:
                write_bins_csv(correlation, bins_path)
        else:
            logger.warning(f"Skipping bin correlation: {len(scored)} records for {n_bins} bins")

    if corruption_study:
        require_paths(config, "checkpoint")
        model = load_checkpoint(config.checkpoint)
        report = run_corruption_study(references, model, DecodeOptions.from_run_config(config),
                                      seed=config.seed, n_bins=n_bins)
        sections.append(format_corruption(report))
        if report.correlation is not None:
            sections.append(format_correlation(report.correlation))

    if not sections:
        raise click.UsageError("nothing to evaluate: pass --generations and/or --corruption-study")
    text = "\n\n".join(sections) + "\n"
    if out_path:
        atomic_write_text(out_path, text)
        logger.info(f"Wrote evaluation table to {out_path}")
    click.echo(text, nl=False)
