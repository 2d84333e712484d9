# ============================================================================
# apps/cli/schemas.py - Run configuration
# ============================================================================

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from config import (
    ACCUMULATOR_INIT, BANK_CAPS, BATCH_SIZE, BEAM_SIZE, CLIP_NORM, DEFAULT_SEED, DEFAULT_TASK,
    DEFAULT_WORKERS, DROPOUT, EMBED_SIZE, ETA, GAMMA, HIDDEN_SIZE, LEARNING_RATE, MAX_EPOCHS,
    MAX_SENTENCE_TOKENS, MAX_SENTENCES, NUM_LAYERS, SELECTION_THRESHOLD, STYLE_ARITY, VOCAB_SIZE,
)

Task = Literal["argument", "wikipedia", "abstract"]

# Options that only make sense when decoding; `train` refuses them on its command line
DECODE_KEYS = frozenset({"beam", "max_sentences", "threshold", "max_sentence_tokens",
                         "oracle_plan", "global_style", "workers"})


class RunConfig(BaseModel):
    """Every knob of a run; flat so it reads and writes as key=value lines"""
    model_config = ConfigDict(extra="forbid")

    task: Task = DEFAULT_TASK
    seed: int = DEFAULT_SEED

    # Paths
    train_path: Optional[str] = None
    dev_path: Optional[str] = None
    test_path: Optional[str] = None
    output_dir: str = "runs"
    checkpoint: Optional[str] = None
    embeddings_path: Optional[str] = None

    # Data
    vocab_size: int = Field(default=VOCAB_SIZE, ge=6)
    bank_cap: Optional[int] = Field(default=None, ge=1)
    extract_candidates: bool = False

    # Model
    hidden: int = Field(default=HIDDEN_SIZE, gt=0)
    embed: int = Field(default=EMBED_SIZE, gt=0)
    layers: int = Field(default=NUM_LAYERS, ge=1)
    dropout: float = Field(default=DROPOUT, ge=0.0, lt=1.0)
    style_enabled: bool = True
    logit_scale: float = Field(default=1.0, gt=0.0)
    lm_pretrain: bool = False

    # Optimisation
    lr: float = Field(default=LEARNING_RATE, ge=0.0)
    acc_init: float = Field(default=ACCUMULATOR_INIT, gt=0.0)
    clip: float = Field(default=CLIP_NORM, gt=0.0)
    batch_size: int = Field(default=BATCH_SIZE, ge=1)
    gamma: float = Field(default=GAMMA, ge=0.0)
    eta: float = Field(default=ETA, ge=0.0)
    max_epochs: int = Field(default=MAX_EPOCHS, ge=1)

    # Decoding
    beam: int = Field(default=BEAM_SIZE, ge=1)
    max_sentences: int = Field(default=MAX_SENTENCES, ge=1)
    threshold: float = Field(default=SELECTION_THRESHOLD, gt=0.0, lt=1.0)
    max_sentence_tokens: int = Field(default=MAX_SENTENCE_TOKENS, ge=1)
    oracle_plan: bool = False
    global_style: Optional[Literal["normal", "simple"]] = None
    workers: int = Field(default=DEFAULT_WORKERS, ge=1)

    @field_validator("hidden")
    @classmethod
    def hidden_is_even(cls, v: int) -> int:
        if v % 2:
            raise ValueError("hidden must be even (bidirectional readers split it in two)")
        return v

    @field_validator("lm_pretrain")
    @classmethod
    def no_lm_pretraining(cls, v: bool) -> bool:
        if v:
            raise ValueError("language-model pretraining needs external corpora and is not available")
        return v

    @property
    def style_arity(self) -> int:
        return STYLE_ARITY[self.task]

    @property
    def n_styles(self) -> int:
        """Styles the model predicts; 0 when style specification is off"""
        return self.style_arity if self.style_enabled and self.style_arity > 1 else 0

    @property
    def has_global_style(self) -> bool:
        return self.task == "wikipedia"

    @property
    def title_encoder(self) -> bool:
        return self.task == "wikipedia"

    @property
    def effective_bank_cap(self) -> int:
        return self.bank_cap if self.bank_cap is not None else BANK_CAPS[self.task]
