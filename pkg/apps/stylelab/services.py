# ============================================================================
# apps/stylelab/services.py - Rule-based sentence style labeling
# ============================================================================

import logging
import os
from collections import Counter, defaultdict
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import yaml

from apps.corpus.lexicon import is_content_word
from apps.corpus.schemas import Sample
from shared.utils import format_table
from .schemas import CLAIM, FUNCTIONAL, PREMISE, LengthBuckets, StyleLabel, StyleRuleSet

logger = logging.getLogger(__name__)

RULES_PATH = os.path.join(os.path.dirname(__file__), "style_rules.yaml")


@lru_cache(maxsize=4)
def _load_tables(path: str = RULES_PATH) -> Tuple[StyleRuleSet, LengthBuckets]:
    with open(path, "r") as f:
        data = yaml.safe_load(f)
    return StyleRuleSet.model_validate(data["argument"]), LengthBuckets.model_validate(data["wikipedia"])


def load_rules(path: str = RULES_PATH) -> StyleRuleSet:
    return _load_tables(path)[0]


def load_buckets(path: str = RULES_PATH) -> LengthBuckets:
    return _load_tables(path)[1]


def style_names(task: str) -> List[str]:
    if task == "argument":
        return list(load_rules().names)
    if task == "wikipedia":
        return list(load_buckets().names)
    return ["plain"]


def _is_alphabetical(token: str) -> bool:
    return token.isalpha()


def _has_noun_or_verb(tokens: Sequence[str], pos_hints: Optional[Sequence[bool]], rules: StyleRuleSet) -> bool:
    if pos_hints is not None:
        return any(pos_hints)
    non_noun_verb = set(rules.non_noun_verb)
    return any(is_content_word(t) and t.lower() not in non_noun_verb for t in tokens)


def label_argument_sentence(tokens: Sequence[str], pos_hints: Optional[Sequence[bool]] = None,
                            rules: Optional[StyleRuleSet] = None) -> StyleLabel:
    """Functional, then Claim, then Premise; Premise when nothing matches"""
    if not tokens:
        raise ValueError("cannot label an empty sentence")
    rules = rules or load_rules()
    has_content = _has_noun_or_verb(tokens, pos_hints, rules)
    text = " ".join(tokens).lower()

    alpha_words = sum(1 for t in tokens if _is_alphabetical(t))
    rule = None
    if alpha_words < rules.functional_max_alpha and not has_content:
        style, rule = FUNCTIONAL, "functional"
    elif len(tokens) < rules.claim_max_tokens and rules.first_match("claim_patterns", text):
        style, rule = CLAIM, rules.first_match("claim_patterns", text)
    else:
        style = PREMISE
        if len(tokens) > rules.premise_min_tokens and has_content:
            rule = rules.first_match("premise_patterns", text)
    return StyleLabel(task="argument", id=style, name=rules.names[style], rule=rule or "default")


def label_wikipedia_sentence(tokens: Sequence[str], buckets: Optional[LengthBuckets] = None) -> StyleLabel:
    """Length bucket; every upper bound is inclusive"""
    if not tokens:
        raise ValueError("cannot label an empty sentence")
    buckets = buckets or load_buckets()
    length = len(tokens)
    style = len(buckets.upper_bounds)
    for i, bound in enumerate(buckets.upper_bounds):
        if length <= bound:
            style = i
            break
    return StyleLabel(task="wikipedia", id=style, name=buckets.names[style])


def label_samples(samples: Sequence[Sample], task: str) -> List[Sample]:
    """Fill every target's style id from the task's rules"""
    labeled = []
    for sample in samples:
        targets = []
        for target in sample.targets:
            if task == "argument":
                style = label_argument_sentence(target.tokens).id
            elif task == "wikipedia":
                style = label_wikipedia_sentence(target.tokens).id
            else:
                style = 0
            targets.append(target.model_copy(update={"style": style}))
        labeled.append(sample.model_copy(update={"targets": targets}))
    return labeled


def prune_functional_only(samples: Sequence[Sample]) -> List[Sample]:
    kept = [s for s in samples if not s.targets or any(t.style != FUNCTIONAL for t in s.targets)]
    if len(kept) != len(samples):
        logger.info(f"Pruned {len(samples) - len(kept)} samples made only of functional sentences")
    return kept


# ----------------------------------------------------------------------------
# Reports
# ----------------------------------------------------------------------------

def style_distribution(samples: Sequence[Sample], names: Sequence[str]) -> List[Dict]:
    """Per style: count, share of sentences, mean tokens, mean selected keyphrases"""
    counts = Counter()
    tokens = defaultdict(int)
    selected = defaultdict(int)
    for sample in samples:
        for target in sample.targets:
            counts[target.style] += 1
            tokens[target.style] += len(target.tokens)
            selected[target.style] += len(target.selection)
    total = sum(counts.values())
    rows = []
    for style, name in enumerate(names):
        n = counts.get(style, 0)
        rows.append({
            "style": name,
            "count": n,
            "percent": 100.0 * n / total if total else 0.0,
            "mean_tokens": tokens[style] / n if n else 0.0,
            "mean_keyphrases": selected[style] / n if n else 0.0,
        })
    return rows


def top_leading_patterns(samples: Sequence[Sample], names: Sequence[str], n_tokens: int = 3,
                         top_k: int = 3) -> Dict[str, List[Tuple[str, int]]]:
    """Most frequent sentence openings per style"""
    openings: Dict[int, Counter] = defaultdict(Counter)
    for sample in samples:
        for target in sample.targets:
            openings[target.style][" ".join(t.lower() for t in target.tokens[:n_tokens])] += 1
    return {name: sorted(openings[style].items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]
            for style, name in enumerate(names)}


def format_style_report(samples: Sequence[Sample], task: str) -> str:
    names = style_names(task)
    rows = style_distribution(samples, names)
    table = format_table(
        ["style", "count", "%", "# tokens", "# keyphrases"],
        [(r["style"], r["count"], r["percent"], r["mean_tokens"], r["mean_keyphrases"]) for r in rows],
        float_fmt="{:.1f}",
    )
    lines = [table, "", "top leading patterns:"]
    for name, patterns in top_leading_patterns(samples, names).items():
        shown = "; ".join(f"{p} ({n})" for p, n in patterns) or "-"
        lines.append(f"  {name}: {shown}")
    return "\n".join(lines)
