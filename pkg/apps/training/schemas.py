# ============================================================================
# apps/training/schemas.py - Training configuration and epoch statistics
# ============================================================================

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

from config import (
    ACCUMULATOR_INIT, BATCH_SIZE, CLIP_NORM, DEFAULT_SEED, DROPOUT, EMBED_SIZE, ETA, GAMMA,
    HIDDEN_SIZE, LEARNING_RATE, MAX_EPOCHS, NUM_LAYERS,
)

# Fields that change parameter shapes; a checkpoint only loads into a matching config
ARCHITECTURE_FIELDS = ("hidden", "embed", "layers", "n_styles", "global_style", "title_encoder")


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    gamma: float = Field(default=GAMMA, ge=0.0)
    eta: float = Field(default=ETA, ge=0.0)
    batch_size: int = Field(default=BATCH_SIZE, ge=1)
    lr: float = Field(default=LEARNING_RATE, ge=0.0)
    acc_init: float = Field(default=ACCUMULATOR_INIT, gt=0.0)
    clip: float = Field(default=CLIP_NORM, gt=0.0)
    hidden: int = Field(default=HIDDEN_SIZE, gt=0)
    embed: int = Field(default=EMBED_SIZE, gt=0)
    layers: int = Field(default=NUM_LAYERS, ge=1)
    dropout: float = Field(default=DROPOUT, ge=0.0, lt=1.0)
    seed: int = DEFAULT_SEED
    max_epochs: int = Field(default=MAX_EPOCHS, ge=1)
    n_styles: int = Field(default=3, ge=0)
    global_style: bool = False
    title_encoder: bool = False
    logit_scale: float = Field(default=1.0, gt=0.0)

    @classmethod
    def from_run_config(cls, run) -> "TrainConfig":
        return cls(
            gamma=run.gamma, eta=run.eta, batch_size=run.batch_size, lr=run.lr, acc_init=run.acc_init,
            clip=run.clip, hidden=run.hidden, embed=run.embed, layers=run.layers, dropout=run.dropout,
            seed=run.seed, max_epochs=run.max_epochs, n_styles=run.n_styles,
            global_style=run.has_global_style, title_encoder=run.title_encoder, logit_scale=run.logit_scale,
        )

    @property
    def style_dims(self) -> int:
        return self.n_styles + (1 if self.global_style else 0)


class EpochStats(BaseModel):
    """Per-sample mean losses over one pass"""
    joint: float = 0.0
    gen: float = 0.0
    sel: float = 0.0
    style: float = 0.0
    samples: int = 0
    tokens: int = 0
    correct_tokens: int = 0
    batches: int = 0
    max_grad_norm: float = 0.0

    @property
    def token_accuracy(self) -> float:
        return self.correct_tokens / self.tokens if self.tokens else 0.0


class FitResult(BaseModel):
    best_epoch: int
    best_loss: float
    epochs_run: int
    checkpoint_dir: Optional[str] = None
