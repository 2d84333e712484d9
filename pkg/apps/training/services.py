# ============================================================================
# apps/training/services.py - Joint objective, epochs and best-checkpoint tracking
# ============================================================================

import csv
import io
import logging
import os
from typing import List, Optional, Sequence, Union

import numpy as np

from apps.corpus.schemas import Sample
from apps.numcore import ops
from apps.numcore.optim import OptimState, adagrad_update, clip_global_norm
from apps.numcore.tensor import Array, Tape, backprop_tape, constant
from shared.errors import NumericError
from shared.utils import atomic_write_text, make_rng
from .checkpoint import save_checkpoint
from .model import PlanGenModel
from .schemas import EpochStats, FitResult, TrainConfig

logger = logging.getLogger(__name__)

Scalar = Union[Array, float]

LOSS_CURVE_FILE = "loss_curve.csv"


def _as_scalar(x: Scalar) -> Array:
    return x if isinstance(x, Array) else constant(float(x))


def joint_loss(l_gen: Scalar, l_style: Scalar, l_sel: Scalar, gamma: float, eta: float) -> Array:
    """L = L_gen + gamma * L_style + eta * L_sel"""
    return ops.add(ops.add(_as_scalar(l_gen), ops.scale(_as_scalar(l_style), gamma)),
                   ops.scale(_as_scalar(l_sel), eta))


def _accumulate(stats: EpochStats, joint: Array, gen: Array, sel: Array, style: Array, size: int,
                tokens: int, correct: int) -> None:
    stats.joint += joint.item() * size
    stats.gen += gen.item() * size
    stats.sel += sel.item() * size
    stats.style += style.item() * size
    stats.samples += size
    stats.tokens += tokens
    stats.correct_tokens += correct
    stats.batches += 1


def _finalize(stats: EpochStats) -> EpochStats:
    if stats.samples:
        for name in ("joint", "gen", "sel", "style"):
            setattr(stats, name, getattr(stats, name) / stats.samples)
    return stats


def train_epoch(model: PlanGenModel, dataset: Sequence[Sample], config: TrainConfig, opt_state: OptimState,
                rng: np.random.Generator) -> EpochStats:
    """One shuffled pass: forward, backward, clip, AdaGrad per batch (final partial batch kept)"""
    if not dataset:
        raise ValueError("cannot train on an empty dataset")
    order = rng.permutation(len(dataset))
    stats = EpochStats()
    for batch_id, start in enumerate(range(0, len(dataset), config.batch_size)):
        batch = [dataset[i] for i in order[start:start + config.batch_size]]
        model.params.zero_grad()
        try:
            with Tape() as tape:
                gen, sel, style, tokens, correct = model.batch_loss(batch, training=True, rng=rng)
                joint = joint_loss(gen, style, sel, config.gamma, config.eta)
        except NumericError as e:
            raise NumericError(f"batch {batch_id}: {e}")
        if not np.isfinite(joint.item()):
            raise NumericError(f"batch {batch_id}: loss is not finite")
        backprop_tape(tape, joint)
        grads, norm = clip_global_norm(model.params.grads(), opt_state.clip_norm)
        adagrad_update(dict(model.params.items()), grads, opt_state)
        stats.max_grad_norm = max(stats.max_grad_norm, norm)
        _accumulate(stats, joint, gen, sel, style, len(batch), tokens, correct)
        logger.debug(f"batch {batch_id}: joint {joint.item():.4f} grad norm {norm:.3f}")
    return _finalize(stats)


def evaluate_loss(model: PlanGenModel, dataset: Sequence[Sample], config: TrainConfig) -> EpochStats:
    """Joint loss and teacher-forced token accuracy with dropout off and no updates"""
    stats = EpochStats()
    for start in range(0, len(dataset), config.batch_size):
        batch = list(dataset[start:start + config.batch_size])
        gen, sel, style, tokens, correct = model.batch_loss(batch, training=False)
        joint = joint_loss(gen, style, sel, config.gamma, config.eta)
        _accumulate(stats, joint, gen, sel, style, len(batch), tokens, correct)
    return _finalize(stats)


def write_loss_curve(rows: List[dict], path: str) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["epoch", "train_joint", "train_gen", "train_sel", "train_style", "dev_joint"])
    for row in rows:
        writer.writerow([row["epoch"], f"{row['train_joint']:.6f}", f"{row['train_gen']:.6f}",
                         f"{row['train_sel']:.6f}", f"{row['train_style']:.6f}",
                         "" if row["dev_joint"] is None else f"{row['dev_joint']:.6f}"])
    atomic_write_text(path, buffer.getvalue())


def fit(model: PlanGenModel, train_set: Sequence[Sample], dev_set: Optional[Sequence[Sample]],
        config: TrainConfig, checkpoint_dir: Optional[str] = None) -> FitResult:
    """Train for max_epochs, keeping the epoch with the lowest validation joint loss.

    Without a dev set the epoch's mean training loss stands in for the validation loss.
    """
    rng = make_rng(config.seed)
    opt_state = OptimState.for_params(dict(model.params.items()), config.lr, config.acc_init, config.clip)
    curve: List[dict] = []
    best_epoch, best_loss = 0, float("inf")

    for epoch in range(1, config.max_epochs + 1):
        stats = train_epoch(model, train_set, config, opt_state, rng)
        dev_stats = evaluate_loss(model, dev_set, config) if dev_set else None
        val_loss = dev_stats.joint if dev_stats is not None else stats.joint
        curve.append({"epoch": epoch, "train_joint": stats.joint, "train_gen": stats.gen,
                      "train_sel": stats.sel, "train_style": stats.style,
                      "dev_joint": dev_stats.joint if dev_stats is not None else None})
        logger.info(f"epoch {epoch}: joint {stats.joint:.4f} gen {stats.gen:.4f} sel {stats.sel:.4f} "
                    f"style {stats.style:.4f} | val {val_loss:.4f} acc {stats.token_accuracy:.3f}")

        if val_loss < best_loss:
            best_epoch, best_loss = epoch, val_loss
            if checkpoint_dir:
                save_checkpoint(model, config, os.path.join(checkpoint_dir, "best"), epoch, best_loss)
            logger.info(f"New best validation loss {best_loss:.4f} at epoch {epoch}")

    if checkpoint_dir:
        save_checkpoint(model, config, os.path.join(checkpoint_dir, "last"), config.max_epochs, curve[-1]["dev_joint"])
        write_loss_curve(curve, os.path.join(checkpoint_dir, LOSS_CURVE_FILE))
    return FitResult(best_epoch=best_epoch, best_loss=best_loss, epochs_run=config.max_epochs,
                     checkpoint_dir=checkpoint_dir)
