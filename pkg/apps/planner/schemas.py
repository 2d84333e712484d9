# ============================================================================
# apps/planner/schemas.py - Plan serialization and inference limits
# ============================================================================

from typing import List

from pydantic import BaseModel, Field, field_validator

from config import MAX_SENTENCES, SELECTION_THRESHOLD


class PlanEntry(BaseModel):
    """One sentence of a plan; selection uses keyphrase positions without sentinels"""
    selection: List[int] = Field(default_factory=list)
    style: int = Field(default=0, ge=0)

    @field_validator("selection")
    @classmethod
    def sorted_unique(cls, v: List[int]) -> List[int]:
        if any(k < 0 for k in v):
            raise ValueError("selection positions must be nonnegative")
        return sorted(set(v))


class PlanLimits(BaseModel):
    max_sentences: int = Field(default=MAX_SENTENCES, ge=1)
    threshold: float = Field(default=SELECTION_THRESHOLD, gt=0.0, lt=1.0)
