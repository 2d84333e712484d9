# ============================================================================
# apps/training/commands.py - `train` subcommand
# ============================================================================

import logging
import os

import click

from apps.cli.options import resolve_config, shared_options
from apps.cli.services import require_paths, write_run_config
from apps.corpus.services import load_corpus, prepare_samples
from apps.corpus.vocabulary import build_vocabulary
from apps.encoder.embeddings import load_embeddings
from .model import PlanGenModel
from .schemas import TrainConfig
from .services import fit

logger = logging.getLogger(__name__)


@click.command("train")
@shared_options
@click.option("--train", "train_path", type=click.Path(dir_okay=False), default=None, help="Training corpus")
@click.option("--dev", "dev_path", type=click.Path(dir_okay=False), default=None, help="Validation corpus")
@click.option("--checkpoint", type=click.Path(file_okay=False), default=None, help="Checkpoint directory")
@click.option("--output-dir", type=click.Path(file_okay=False), default=None)
@click.option("--epochs", "max_epochs", type=int, default=None)
@click.option("--hidden", type=int, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--lr", type=float, default=None)
def train_command(config_path, seed, task, set_pairs, train_path, dev_path, checkpoint, output_dir,
                  max_epochs, hidden, batch_size, lr):
    """Train planner and realizer jointly; keeps the best checkpoint and a loss curve"""
    config = resolve_config(config_path, seed, task, set_pairs, scope="train", train_path=train_path,
                            dev_path=dev_path, checkpoint=checkpoint, output_dir=output_dir,
                            max_epochs=max_epochs, hidden=hidden, batch_size=batch_size, lr=lr)
    require_paths(config, "train_path")
    if config.dev_path:
        require_paths(config, "dev_path")
    if config.embeddings_path:
        require_paths(config, "embeddings_path")

    n_styles = config.style_arity
    train_set = prepare_samples(load_corpus(config.train_path, n_styles=n_styles),
                                config.effective_bank_cap, config.extract_candidates)
    dev_set = None
    if config.dev_path:
        dev_set = prepare_samples(load_corpus(config.dev_path, n_styles=n_styles),
                                  config.effective_bank_cap, config.extract_candidates)

    vocab = build_vocabulary(train_set, config.vocab_size)
    train_config = TrainConfig.from_run_config(config)
    model = PlanGenModel(train_config, vocab)
    if config.embeddings_path:
        load_embeddings(config.embeddings_path, vocab, model.params)

    checkpoint_dir = config.checkpoint or os.path.join(config.output_dir, "checkpoint")
    os.makedirs(config.output_dir, exist_ok=True)
    write_run_config(config, os.path.join(config.output_dir, "run_config.env"))
    logger.info(f"Training on {len(train_set)} samples, {model.params.num_values} parameters, seed {config.seed}")

    result = fit(model, train_set, dev_set, train_config, checkpoint_dir)
    click.echo(f"Best epoch {result.best_epoch} (loss {result.best_loss:.4f}); checkpoints in {checkpoint_dir}")
