# ============================================================================
# apps/corpus/services.py - Keyphrase banks, selection labels, corpus files
# ============================================================================

import logging
from typing import Any, Dict, List, Optional, Sequence, Set

from pydantic import ValidationError

from config import MAX_KEYPHRASE_TOKENS, MAX_PASSAGE_TOKENS, MAX_TOPIC_TOKENS
from shared.errors import CorpusFormatError
from shared.utils import iter_jsonl, write_jsonl
from .lexicon import content_words, is_content_word
from .schemas import END_TOKEN, START_TOKEN, Keyphrase, Sample
from .vocabulary import SNT

logger = logging.getLogger(__name__)

START_INDEX = 0


class KeyphraseBank:
    """Ordered bank: <START> at 0, content keyphrases at 1..n, <END> at n+1"""

    def __init__(self, phrases: Sequence[Keyphrase]):
        self.phrases: List[Keyphrase] = list(phrases)

    def __len__(self) -> int:
        return len(self.phrases) + 2

    @property
    def start_index(self) -> int:
        return START_INDEX

    @property
    def end_index(self) -> int:
        return len(self.phrases) + 1

    @property
    def content_indices(self) -> List[int]:
        return list(range(1, len(self.phrases) + 1))

    def is_sentinel(self, index: int) -> bool:
        return index in (self.start_index, self.end_index)

    def phrase(self, index: int) -> Optional[Keyphrase]:
        if self.is_sentinel(index):
            return None
        return self.phrases[index - 1]

    def entry_tokens(self, index: int) -> List[str]:
        phrase = self.phrase(index)
        return list(phrase.tokens) if phrase is not None else []

    def labels(self) -> List[str]:
        return [START_TOKEN] + [p.text for p in self.phrases] + [END_TOKEN]


def build_keyphrase_bank(candidates: Sequence[Keyphrase], cap: int) -> KeyphraseBank:
    """De-duplicate by exact token sequence, keep the first cap, add sentinels"""
    if cap < 1:
        raise ValueError(f"bank cap must be at least 1, got {cap}")
    seen: Set[tuple] = set()
    kept: List[Keyphrase] = []
    for phrase in candidates:
        key = tuple(phrase.tokens)
        if key in seen:
            continue
        seen.add(key)
        kept.append(phrase)
        if len(kept) == cap:
            break
    return KeyphraseBank(kept)


def align_selection_labels(sentence: Sequence[str], bank: KeyphraseBank) -> Set[int]:
    """Indices of bank phrases sharing at least one content word with the sentence"""
    words = {t.lower() for t in sentence}
    return {k for k in bank.content_indices if words.intersection(bank.phrase(k).content_words)}


def cap_sample_bank(sample: Sample, cap: int) -> Sample:
    """Apply bank de-duplication and the cap to a sample, remapping gold selections"""
    bank = build_keyphrase_bank(sample.bank, cap)
    position = {tuple(p.tokens): i + 1 for i, p in enumerate(bank.phrases)}
    old_to_new: Dict[int, int] = {}
    for old_index, phrase in enumerate(sample.bank, 1):
        new_index = position.get(tuple(phrase.tokens))
        if new_index is not None:
            old_to_new[old_index] = new_index
    old_end = len(sample.bank) + 1
    old_to_new[0] = 0
    old_to_new[old_end] = bank.end_index

    targets = []
    dropped = 0
    for target in sample.targets:
        kept = [old_to_new[k] for k in target.selection if k in old_to_new]
        dropped += len(target.selection) - len(kept)
        selection = sorted(set(kept))
        targets.append(target.model_copy(update={"selection": selection}))
    if dropped:
        logger.warning(f"Sample {sample.id}: {dropped} gold selections fell outside the bank cap {cap}")
    return sample.model_copy(update={"bank": list(bank.phrases), "targets": targets})


def build_input_tokens(sample: Sample, topic_cap: int = MAX_TOPIC_TOKENS,
                       passage_cap: int = MAX_PASSAGE_TOKENS) -> List[str]:
    """Truncated topic, then the separator and truncated passages when present"""
    tokens = list(sample.topic[:topic_cap])
    if sample.passages:
        tokens.append(SNT)
        tokens.extend(sample.passages[:passage_cap])
    return tokens


def extract_candidates(tokens: Sequence[str], max_len: int = MAX_KEYPHRASE_TOKENS) -> List[Keyphrase]:
    """Maximal runs of content words (stopword-trimmed n-grams), split at max_len"""
    candidates: List[Keyphrase] = []
    run: List[str] = []

    def flush():
        for start in range(0, len(run), max_len):
            chunk = run[start:start + max_len]
            if content_words(chunk):
                candidates.append(Keyphrase(tokens=chunk))
        run.clear()

    for token in tokens:
        if is_content_word(token):
            run.append(token.lower())
        else:
            flush()
    flush()
    return candidates


# ----------------------------------------------------------------------------
# Corpus files
# ----------------------------------------------------------------------------

def sample_to_record(sample: Sample) -> Dict[str, Any]:
    """File record; selection indices are shifted back to pre-sentinel positions"""
    return {
        "id": sample.id,
        "topic": list(sample.topic),
        "passages": list(sample.passages) if sample.passages is not None else None,
        "keyphrases": [list(p.tokens) for p in sample.bank],
        "targets": [
            {"tokens": list(t.tokens), "selection": [k - 1 for k in t.selection], "style": t.style}
            for t in sample.targets
        ],
        "global_style": sample.global_style,
    }


def record_to_sample(record: Dict[str, Any], line: int, require_targets: bool = True,
                     n_styles: Optional[int] = None) -> Sample:
    if not isinstance(record, dict):
        raise CorpusFormatError("record is not a JSON object", line=line)
    for field in ("id", "topic", "keyphrases"):
        if field not in record:
            raise CorpusFormatError(f"missing field '{field}'", line=line, field=field)
    if require_targets and not record.get("targets"):
        raise CorpusFormatError("missing field 'targets'", line=line, field="targets")

    phrases = record["keyphrases"]
    if not isinstance(phrases, list):
        raise CorpusFormatError("'keyphrases' must be a list", line=line, field="keyphrases")
    targets = []
    for j, target in enumerate(record.get("targets") or []):
        if not isinstance(target, dict):
            raise CorpusFormatError(f"targets[{j}] is not an object", line=line, field="targets")
        selection = target.get("selection", [])
        for k in selection:
            if not isinstance(k, int) or k < 0 or k >= len(phrases):
                raise CorpusFormatError(f"targets[{j}] selection {k!r} outside keyphrases", line=line,
                                        field="selection")
        style = target.get("style", 0)
        if n_styles is not None and (not isinstance(style, int) or not 0 <= style < n_styles):
            raise CorpusFormatError(f"targets[{j}] has unknown style id {style!r}", line=line, field="style")
        targets.append({"tokens": target.get("tokens"), "selection": [k + 1 for k in selection], "style": style})

    try:
        return Sample(
            id=str(record["id"]),
            topic=record["topic"],
            passages=record.get("passages"),
            bank=phrases,
            targets=targets,
            global_style=record.get("global_style"),
        )
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(p) for p in first.get("loc", ())) or None
        raise CorpusFormatError(first.get("msg", str(e)), line=line, field=field)


def load_corpus(path: str, require_targets: bool = True, n_styles: Optional[int] = None) -> List[Sample]:
    """Parse a JSON-lines corpus; selection indices are rebased past <START>"""
    samples = [record_to_sample(record, line, require_targets, n_styles) for line, record in iter_jsonl(path)]
    logger.info(f"Loaded {len(samples)} samples from {path}")
    return samples


def write_corpus(samples: Sequence[Sample], path: str) -> int:
    count = write_jsonl(path, (sample_to_record(s) for s in samples))
    logger.info(f"Wrote {count} samples to {path}")
    return count


def prepare_samples(samples: Sequence[Sample], bank_cap: int, extract: bool = False) -> List[Sample]:
    """Cap every bank; with extract, samples without keyphrases get heuristic candidates and fresh labels"""
    prepared = []
    for sample in samples:
        if extract and not sample.bank:
            sources = list(sample.topic) + list(sample.passages or [])
            bank = extract_candidates(sources)
            aligned = KeyphraseBank(bank)
            targets = [t.model_copy(update={"selection": sorted(align_selection_labels(t.tokens, aligned))})
                       for t in sample.targets]
            sample = sample.model_copy(update={"bank": bank, "targets": targets})
        prepared.append(cap_sample_bank(sample, bank_cap))
    return prepared
