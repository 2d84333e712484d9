# ============================================================================
# apps/metrics/schemas.py - Evaluation records and reports
# ============================================================================

from typing import List, Optional

from pydantic import BaseModel, Field


class EvalRecord(BaseModel):
    """A generation paired with its references; plans use bank positions without sentinels"""
    id: str
    candidate: List[str]
    references: List[List[str]] = Field(..., min_length=1)
    predicted_plan: List[List[int]] = Field(default_factory=list)
    gold_plan: List[List[int]] = Field(default_factory=list)
    n_sentences: int = 0


class ScoredRecord(BaseModel):
    id: str
    bleu2: float
    bleu4: float
    rouge_l: float
    selection_f1: float
    length: int
    n_sentences: int


class EvalSummary(BaseModel):
    samples: int
    bleu2: float
    bleu4: float
    rouge_l: float
    selection_f1: float
    avg_length: float
    avg_sentences: float


class BinSummary(BaseModel):
    bin_index: int
    size: int
    mean_f1: float
    mean_bleu: float
    mean_rouge: float


class CorrelationReport(BaseModel):
    """Per-bin means; r is None when either side has zero variance"""
    bins: List[BinSummary]
    r_bleu: Optional[float] = None
    r_rouge: Optional[float] = None


class CorruptionLevel(BaseModel):
    fraction: float
    mean_f1: float
    mean_bleu: float
    mean_rouge: float


class CorruptionReport(BaseModel):
    levels: List[CorruptionLevel]
    correlation: Optional[CorrelationReport] = None

    @property
    def monotone_bleu(self) -> bool:
        bleus = [level.mean_bleu for level in self.levels]
        return all(b <= a + 1e-12 for a, b in zip(bleus, bleus[1:]))
