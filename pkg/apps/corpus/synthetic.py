# ============================================================================
# apps/corpus/synthetic.py - Template-grammar corpus with recoverable plans
# ============================================================================

import logging
import os
import re
from functools import lru_cache
from typing import Dict, List, Optional

import yaml
from pydantic import BaseModel, Field, model_validator

from shared.utils import make_rng
from .lexicon import content_words
from .schemas import Keyphrase, Sample, TargetSentence
from .services import KeyphraseBank, align_selection_labels

logger = logging.getLogger(__name__)

GRAMMAR_PATH = os.path.join(os.path.dirname(__file__), "synthetic_grammar.yaml")
_SLOT = re.compile(r"\{(\d+)\}")


class TaskGrammar(BaseModel):
    topic: str
    global_style: bool = False
    position_styles: List[int] = Field(..., min_length=1)
    templates: Dict[int, Dict[int, List[str]]]

    @model_validator(mode="after")
    def check_templates(self) -> "TaskGrammar":
        for style in self.position_styles:
            if style not in self.templates:
                raise ValueError(f"no templates for style {style}")
        for style, by_slots in self.templates.items():
            for slots, templates in by_slots.items():
                if not templates:
                    raise ValueError(f"style {style}: empty template list for {slots} slots")
                for template in templates:
                    found = sorted({int(s) for s in _SLOT.findall(template)})
                    if found != list(range(slots)):
                        raise ValueError(f"template {template!r} does not fill exactly {slots} slots")
        return self

    def style_for(self, position: int, offset: int = 0) -> int:
        return self.position_styles[(position + offset) % len(self.position_styles)]


class GrammarConfig(BaseModel):
    max_sentences: int = Field(default=4, ge=1)
    max_slots: int = Field(default=2, ge=1)
    min_bank: int = Field(default=4, ge=1)
    max_bank: int = Field(default=8, ge=1)
    adjective_rate: float = Field(default=0.5, ge=0.0, le=1.0)
    adjectives: List[str]
    nouns: List[str]
    tasks: Dict[str, TaskGrammar]

    @model_validator(mode="after")
    def check_word_lists(self) -> "GrammarConfig":
        if self.max_bank < self.min_bank:
            raise ValueError("max_bank must be at least min_bank")
        if self.max_bank < self.max_sentences * self.max_slots:
            raise ValueError("max_bank cannot hold a fully selected plan")
        if len(self.nouns) < self.max_bank or len(self.adjectives) < self.max_bank:
            raise ValueError("word lists are shorter than max_bank")
        bank_words = set(self.adjectives) | set(self.nouns)
        if len(content_words(bank_words)) != len(bank_words):
            raise ValueError("every bank word must be a content word")
        for name, task in self.tasks.items():
            for by_slots in task.templates.values():
                for slots in by_slots:
                    if slots > self.max_slots:
                        raise ValueError(f"task {name}: template with {slots} slots exceeds max_slots")
                for templates in by_slots.values():
                    for template in templates:
                        clash = set(_SLOT.sub(" ", template).split()) & bank_words
                        if clash:
                            raise ValueError(f"task {name}: template reuses bank words {sorted(clash)}")
        return self


@lru_cache(maxsize=4)
def load_grammar(path: str = GRAMMAR_PATH) -> GrammarConfig:
    with open(path, "r") as f:
        return GrammarConfig.model_validate(yaml.safe_load(f))


def _generate_sample(index: int, rng, grammar: GrammarConfig, task_grammar: TaskGrammar) -> Sample:
    n_sentences = int(rng.integers(1, grammar.max_sentences + 1))
    slots = [int(rng.integers(1, grammar.max_slots + 1)) for _ in range(n_sentences)]
    n_selected = sum(slots)
    bank_size = int(rng.integers(max(grammar.min_bank, n_selected), grammar.max_bank + 1))

    nouns = rng.choice(len(grammar.nouns), size=bank_size, replace=False)
    adjectives = rng.choice(len(grammar.adjectives), size=bank_size, replace=False)
    phrases = []
    for noun, adjective in zip(nouns, adjectives):
        if rng.random() < grammar.adjective_rate:
            phrases.append(Keyphrase(tokens=[grammar.adjectives[adjective], grammar.nouns[noun]]))
        else:
            phrases.append(Keyphrase(tokens=[grammar.nouns[noun]]))
    plan_order = [int(k) for k in rng.permutation(bank_size)[:n_selected]]
    global_style = int(rng.integers(0, 2)) if task_grammar.global_style else None

    bank = KeyphraseBank(phrases)
    offset = global_style or 0
    occurrences: Dict[int, int] = {}
    targets = []
    cursor = 0
    for j, n_slots in enumerate(slots):
        style = task_grammar.style_for(j, offset)
        by_slots = task_grammar.templates[style]
        n_slots = min(n_slots, max(by_slots))
        chosen = plan_order[cursor:cursor + n_slots]
        cursor += n_slots
        templates = by_slots[n_slots]
        template = templates[occurrences.get(style, 0) % len(templates)]
        occurrences[style] = occurrences.get(style, 0) + 1
        tokens = template.format(*[phrases[k].text for k in chosen]).split()
        selection = sorted(align_selection_labels(tokens, bank))
        targets.append(TargetSentence(tokens=tokens, selection=selection, style=style))

    mentioned = plan_order[:cursor]
    topic = task_grammar.topic.format(phrases=" and ".join(phrases[k].text for k in mentioned)).split()
    return Sample(id=f"syn-{index:05d}", topic=topic, passages=None, bank=phrases,
                  targets=targets, global_style=global_style)


def generate_synthetic_corpus(seed: int, n_samples: int, grammar_config: Optional[GrammarConfig] = None,
                              task: str = "argument") -> List[Sample]:
    """Deterministic corpus whose gold plans are exactly recoverable from the targets"""
    if n_samples < 1:
        raise ValueError(f"n_samples must be at least 1, got {n_samples}")
    grammar = grammar_config or load_grammar()
    if task not in grammar.tasks:
        raise ValueError(f"grammar has no task {task!r}; known: {sorted(grammar.tasks)}")
    rng = make_rng(seed)
    samples = [_generate_sample(i, rng, grammar, grammar.tasks[task]) for i in range(n_samples)]
    logger.info(f"Generated {len(samples)} synthetic {task} samples (seed {seed})")
    return samples
