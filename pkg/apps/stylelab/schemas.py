# ============================================================================
# apps/stylelab/schemas.py - Style labels and rule tables
# ============================================================================

import re
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator

CLAIM, PREMISE, FUNCTIONAL = 0, 1, 2


class StyleLabel(BaseModel):
    model_config = ConfigDict(frozen=True)

    task: Literal["argument", "wikipedia"]
    id: int = Field(..., ge=0)
    name: str
    rule: Optional[str] = None


class StyleRuleSet(BaseModel):
    """Claim/Premise pattern tables plus the length and word-count thresholds"""
    names: List[str] = Field(..., min_length=3, max_length=3)
    claim_max_tokens: int = Field(..., gt=0)
    premise_min_tokens: int = Field(..., gt=0)
    functional_max_alpha: int = Field(..., gt=0)
    claim_patterns: Dict[str, str] = Field(..., min_length=1)
    premise_patterns: Dict[str, str] = Field(..., min_length=1)
    non_noun_verb: List[str] = Field(default_factory=list)

    _compiled: Dict[str, Dict[str, "re.Pattern"]] = PrivateAttr(default_factory=dict)

    @model_validator(mode="after")
    def compile_patterns(self) -> "StyleRuleSet":
        compiled = {}
        for group in ("claim_patterns", "premise_patterns"):
            table = {}
            for name, pattern in getattr(self, group).items():
                try:
                    table[name] = re.compile(pattern, re.IGNORECASE)
                except re.error as e:
                    raise ValueError(f"{group}.{name}: invalid pattern ({e})")
            compiled[group] = table
        self._compiled = compiled
        return self

    def first_match(self, group: str, text: str):
        """Name of the first rule in the group matching text, else None"""
        for name, pattern in self._compiled[group].items():
            if pattern.search(text):
                return name
        return None


class LengthBuckets(BaseModel):
    names: List[str] = Field(..., min_length=2)
    upper_bounds: List[int] = Field(..., min_length=1)

    @model_validator(mode="after")
    def check_bounds(self) -> "LengthBuckets":
        if len(self.names) != len(self.upper_bounds) + 1:
            raise ValueError("need one more bucket name than upper bounds")
        if any(b <= a for a, b in zip(self.upper_bounds, self.upper_bounds[1:])) or self.upper_bounds[0] < 1:
            raise ValueError("upper bounds must be positive and strictly increasing")
        return self
