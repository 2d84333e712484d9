# ============================================================================
# apps/inference/commands.py - `generate` subcommand
# ============================================================================

import logging

import click

from apps.cli.options import resolve_config, shared_options
from apps.cli.services import require_paths
from apps.corpus.services import load_corpus, prepare_samples
from apps.training.checkpoint import load_checkpoint
from shared.utils import write_jsonl
from .schemas import DecodeOptions
from .services import generate_corpus

logger = logging.getLogger(__name__)


@click.command("generate")
@shared_options
@click.option("--input", "test_path", type=click.Path(dir_okay=False), default=None, help="Corpus to generate for")
@click.option("--checkpoint", type=click.Path(file_okay=False), default=None, help="Checkpoint directory")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True, help="Generation JSONL")
@click.option("--beam", type=int, default=None)
@click.option("--max-sentences", type=int, default=None)
@click.option("--threshold", type=float, default=None)
@click.option("--oracle-plan/--predicted-plan", default=None, help="Use gold selections and styles")
@click.option("--global-style", type=click.Choice(["normal", "simple"]), default=None)
@click.option("--dump-plan", "plan_path", type=click.Path(dir_okay=False), default=None,
              help="Also write the executed plans as JSONL")
@click.option("--workers", type=int, default=None)
def generate_command(config_path, seed, task, set_pairs, test_path, checkpoint, out_path, beam, max_sentences,
                     threshold, oracle_plan, global_style, plan_path, workers):
    """Plan and realize every sample of a corpus"""
    config = resolve_config(config_path, seed, task, set_pairs, test_path=test_path, checkpoint=checkpoint,
                            beam=beam, max_sentences=max_sentences, threshold=threshold,
                            oracle_plan=oracle_plan, global_style=global_style, workers=workers)
    require_paths(config, "test_path", "checkpoint")

    model = load_checkpoint(config.checkpoint)
    samples = prepare_samples(load_corpus(config.test_path, require_targets=config.oracle_plan,
                                          n_styles=config.style_arity),
                              config.effective_bank_cap, config.extract_candidates)
    options = DecodeOptions.from_run_config(config)
    records = generate_corpus(samples, model, options, workers=config.workers, checkpoint_path=config.checkpoint)

    write_jsonl(out_path, (record.model_dump() for record in records))
    if plan_path:
        write_jsonl(plan_path, ({"id": r.id, "plan": [e.model_dump() for e in r.plan]} for r in records))
    n_sentences = sum(len(r.sentences) for r in records)
    logger.info(f"Generated {len(records)} outputs ({n_sentences} sentences) -> {out_path}")
    click.echo(f"Wrote {len(records)} generations to {out_path}")
