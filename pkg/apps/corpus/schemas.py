# ============================================================================
# apps/corpus/schemas.py - Corpus records
# ============================================================================

from typing import Any, List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from config import MAX_KEYPHRASE_TOKENS
from .lexicon import content_words

START_TOKEN = "<START>"
END_TOKEN = "<END>"

GLOBAL_STYLE_SIMPLE = 0
GLOBAL_STYLE_NORMAL = 1
GLOBAL_STYLE_NAMES = {GLOBAL_STYLE_SIMPLE: "simple", GLOBAL_STYLE_NORMAL: "normal"}


class Keyphrase(BaseModel):
    """A talking point: 1-10 lowercased tokens with at least one content word"""
    tokens: List[str] = Field(..., min_length=1, max_length=MAX_KEYPHRASE_TOKENS)
    content_words: List[str] = Field(..., min_length=1)

    model_config = {"frozen": True}

    @model_validator(mode="before")
    @classmethod
    def derive_content_words(cls, data: Any) -> Any:
        if isinstance(data, (list, tuple)):
            data = {"tokens": list(data)}
        if not isinstance(data, dict) or not isinstance(data.get("tokens"), list):
            raise ValueError("keyphrase must be a list of tokens")
        tokens = [str(t).lower() for t in data["tokens"] if str(t).strip()]
        if len(tokens) > MAX_KEYPHRASE_TOKENS:
            raise ValueError(f"keyphrase has {len(tokens)} tokens, at most {MAX_KEYPHRASE_TOKENS} allowed")
        words = data.get("content_words") or content_words(tokens)
        if not words:
            raise ValueError(f"keyphrase {' '.join(tokens)!r} has no content word")
        return {"tokens": tokens, "content_words": list(words)}

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


class TargetSentence(BaseModel):
    """One reference sentence with its gold selection (bank indices incl. sentinels) and style"""
    tokens: List[str] = Field(..., min_length=1)
    selection: List[int] = Field(default_factory=list)
    style: int = Field(default=0, ge=0)

    @field_validator("selection")
    @classmethod
    def sort_selection(cls, v: List[int]) -> List[int]:
        if any(k < 0 for k in v):
            raise ValueError("selection indices must be nonnegative")
        return sorted(set(v))


class Sample(BaseModel):
    """One training/evaluation item; bank holds content keyphrases without sentinels"""
    id: str = Field(..., min_length=1)
    topic: List[str] = Field(default_factory=list)
    passages: Optional[List[str]] = None
    bank: List[Keyphrase] = Field(default_factory=list)
    targets: List[TargetSentence] = Field(default_factory=list)
    global_style: Optional[int] = Field(default=None, ge=0, le=1)

    @model_validator(mode="after")
    def check_selection_range(self) -> "Sample":
        limit = len(self.bank) + 2
        for j, target in enumerate(self.targets):
            for k in target.selection:
                if k >= limit:
                    raise ValueError(f"targets[{j}] selects index {k}, bank with sentinels has {limit} entries")
        return self

    @property
    def gold_selections(self) -> List[List[int]]:
        return [list(t.selection) for t in self.targets]

    @property
    def gold_styles(self) -> List[int]:
        return [t.style for t in self.targets]
