# ============================================================================
# apps/inference/schemas.py - Decoding options and generation records
# ============================================================================

from typing import List, Optional

from pydantic import BaseModel, Field

from config import BEAM_SIZE, MAX_SENTENCE_TOKENS, MAX_SENTENCES, SELECTION_THRESHOLD
from apps.planner.schemas import PlanEntry


class DecodeOptions(BaseModel):
    beam: int = Field(default=BEAM_SIZE, ge=1)
    max_sentences: int = Field(default=MAX_SENTENCES, ge=1)
    threshold: float = Field(default=SELECTION_THRESHOLD, gt=0.0, lt=1.0)
    max_sentence_tokens: int = Field(default=MAX_SENTENCE_TOKENS, ge=1)
    oracle_plan: bool = False
    global_style: Optional[int] = Field(default=None, ge=0, le=1)
    greedy: bool = False
    replace_unk: bool = True

    @classmethod
    def from_run_config(cls, run) -> "DecodeOptions":
        bits = {"normal": 1, "simple": 0}
        return cls(beam=run.beam, max_sentences=run.max_sentences, threshold=run.threshold,
                   max_sentence_tokens=run.max_sentence_tokens, oracle_plan=run.oracle_plan,
                   global_style=bits.get(run.global_style) if run.global_style else None)


class GenerationRecord(BaseModel):
    """One line of the generation file"""
    id: str
    output: List[str]
    plan: List[PlanEntry]
    sentences: List[List[str]] = Field(default_factory=list)
