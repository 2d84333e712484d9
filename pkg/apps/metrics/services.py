# ============================================================================
# apps/metrics/services.py - Automatic metrics and plan-quality correlation
# ============================================================================

import csv
import io
import logging
import math
from collections import Counter
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from apps.corpus.schemas import Sample
from apps.inference.schemas import GenerationRecord
from shared.errors import CorpusFormatError
from shared.utils import atomic_write_text, format_table
from .schemas import BinSummary, CorrelationReport, EvalRecord, EvalSummary, ScoredRecord

logger = logging.getLogger(__name__)

BLEU_ORDERS = (2, 4)


# ----------------------------------------------------------------------------
# Sequence metrics
# ----------------------------------------------------------------------------

def ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def closest_reference_length(candidate_length: int, references: Sequence[Sequence[str]]) -> int:
    return min((abs(len(ref) - candidate_length), len(ref)) for ref in references)[1]


def bleu_score(candidate: Sequence[str], references: Sequence[Sequence[str]], max_n: int = 2) -> float:
    """Unsmoothed BLEU up to max_n; clip counts take the max over references"""
    if max_n not in BLEU_ORDERS:
        raise ValueError(f"max_n must be one of {BLEU_ORDERS}, got {max_n}")
    if not references:
        raise ValueError("at least one reference is required")
    if not candidate:
        return 0.0

    log_precision = 0.0
    for n in range(1, max_n + 1):
        counts = ngram_counts(candidate, n)
        total = sum(counts.values())
        if total == 0:
            return 0.0
        max_ref: Counter = Counter()
        for ref in references:
            for gram, count in ngram_counts(ref, n).items():
                max_ref[gram] = max(max_ref[gram], count)
        clipped = sum(min(count, max_ref[gram]) for gram, count in counts.items())
        if clipped == 0:
            return 0.0
        log_precision += math.log(clipped / total) / max_n

    c = len(candidate)
    r = closest_reference_length(c, references)
    brevity = 1.0 if c > r else math.exp(1.0 - r / c)
    return brevity * math.exp(log_precision)


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        row = [0]
        for j, y in enumerate(b, 1):
            row.append(prev[j - 1] + 1 if x == y else max(prev[j], row[j - 1]))
        prev = row
    return prev[-1]


def rouge_l_score(candidate: Sequence[str], reference: Sequence[str]) -> float:
    """LCS F-measure with beta = 1"""
    if not reference:
        raise ValueError("reference must be nonempty")
    lcs = lcs_length(candidate, reference)
    if lcs == 0:
        return 0.0
    precision = lcs / len(candidate)
    recall = lcs / len(reference)
    return 2 * precision * recall / (precision + recall)


def best_match_scores(candidate: Sequence[str], references: Sequence[Sequence[str]]) -> Dict[str, float]:
    """Each metric against its highest-scoring single reference"""
    return {
        "bleu2": max(bleu_score(candidate, [ref], 2) for ref in references),
        "bleu4": max(bleu_score(candidate, [ref], 4) for ref in references),
        "rouge_l": max(rouge_l_score(candidate, ref) for ref in references),
    }


# ----------------------------------------------------------------------------
# Keyphrase selection
# ----------------------------------------------------------------------------

def _aggregate(plan: Sequence[Sequence[int]]) -> Set[int]:
    return {k for selection in plan for k in selection}


def selection_counts(predicted: Sequence[Sequence[int]], gold: Sequence[Sequence[int]]) -> Tuple[int, int, int]:
    """(tp, fp, fn) of the per-sample selection sets unioned over sentences"""
    pred, ref = _aggregate(predicted), _aggregate(gold)
    return len(pred & ref), len(pred - ref), len(ref - pred)


def _f1(tp: int, fp: int, fn: int) -> float:
    denominator = 2 * tp + fp + fn
    return 1.0 if denominator == 0 else 2 * tp / denominator


def sample_selection_f1(predicted: Sequence[Sequence[int]], gold: Sequence[Sequence[int]]) -> float:
    return _f1(*selection_counts(predicted, gold))


def selection_f1(predicted_plans: Sequence[Sequence[Sequence[int]]],
                 gold_plans: Sequence[Sequence[Sequence[int]]]) -> float:
    """Micro-averaged F1 over the corpus; both sides empty counts as a perfect match"""
    if len(predicted_plans) != len(gold_plans):
        raise ValueError(f"{len(predicted_plans)} predicted plans but {len(gold_plans)} gold plans")
    tp = fp = fn = 0
    for predicted, gold in zip(predicted_plans, gold_plans):
        a, b, c = selection_counts(predicted, gold)
        tp, fp, fn = tp + a, fp + b, fn + c
    return _f1(tp, fp, fn)


# ----------------------------------------------------------------------------
# Correlation
# ----------------------------------------------------------------------------

def pearson(xs: Sequence[float], ys: Sequence[float]) -> Optional[float]:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.size < 2:
        raise ValueError("pearson needs two equal-length sequences of at least 2 values")
    dx, dy = x - x.mean(), y - y.mean()
    denominator = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denominator == 0.0:
        return None
    return float(np.clip((dx @ dy) / denominator, -1.0, 1.0))


def plan_quality_correlation(records: Sequence[ScoredRecord], n_bins: int = 10) -> CorrelationReport:
    """Sort by selection F1, cut into equal-count bins and correlate bin-mean F1 with bin-mean BLEU-2/ROUGE-L"""
    if n_bins < 2:
        raise ValueError(f"n_bins must be at least 2, got {n_bins}")
    if len(records) < n_bins:
        raise ValueError(f"need at least {n_bins} records, got {len(records)}")
    ordered = sorted(records, key=lambda r: r.selection_f1)
    bins = []
    for index, chunk in enumerate(np.array_split(np.arange(len(ordered)), n_bins)):
        members = [ordered[i] for i in chunk]
        bins.append(BinSummary(
            bin_index=index,
            size=len(members),
            mean_f1=float(np.mean([r.selection_f1 for r in members])),
            mean_bleu=float(np.mean([r.bleu2 for r in members])),
            mean_rouge=float(np.mean([r.rouge_l for r in members])),
        ))
    f1s = [b.mean_f1 for b in bins]
    report = CorrelationReport(bins=bins, r_bleu=pearson(f1s, [b.mean_bleu for b in bins]),
                               r_rouge=pearson(f1s, [b.mean_rouge for b in bins]))
    if report.r_bleu is None or report.r_rouge is None:
        logger.warning("Correlation undefined for a zero-variance side")
    return report


# ----------------------------------------------------------------------------
# Corpus layer
# ----------------------------------------------------------------------------

def build_eval_records(generations: Sequence[GenerationRecord], references: Sequence[Sample]) -> List[EvalRecord]:
    """Pair generations with reference samples by id; gold plans drop the <START> offset"""
    by_id = {sample.id: sample for sample in references}
    records = []
    for generation in generations:
        sample = by_id.get(generation.id)
        if sample is None:
            raise CorpusFormatError(f"generation {generation.id} has no reference sample", field="id")
        if not sample.targets:
            raise CorpusFormatError(f"reference sample {sample.id} has no targets", field="targets")
        reference = [token for target in sample.targets for token in target.tokens]
        records.append(EvalRecord(
            id=generation.id,
            candidate=generation.output,
            references=[reference],
            predicted_plan=[entry.selection for entry in generation.plan],
            gold_plan=[[k - 1 for k in selection] for selection in sample.gold_selections],
            n_sentences=len(generation.sentences) if generation.sentences else len(generation.plan),
        ))
    return records


def score_record(record: EvalRecord) -> ScoredRecord:
    scores = best_match_scores(record.candidate, record.references)
    return ScoredRecord(id=record.id, selection_f1=sample_selection_f1(record.predicted_plan, record.gold_plan),
                        length=len(record.candidate), n_sentences=record.n_sentences, **scores)


def summarize(records: Sequence[EvalRecord]) -> Tuple[EvalSummary, List[ScoredRecord]]:
    """Record-averaged best-match metrics plus corpus micro selection F1"""
    if not records:
        raise ValueError("no records to evaluate")
    scored = [score_record(r) for r in records]
    summary = EvalSummary(
        samples=len(scored),
        bleu2=float(np.mean([s.bleu2 for s in scored])),
        bleu4=float(np.mean([s.bleu4 for s in scored])),
        rouge_l=float(np.mean([s.rouge_l for s in scored])),
        selection_f1=selection_f1([r.predicted_plan for r in records], [r.gold_plan for r in records]),
        avg_length=float(np.mean([s.length for s in scored])),
        avg_sentences=float(np.mean([s.n_sentences for s in scored])),
    )
    return summary, scored


def format_summary(summary: EvalSummary, label: str = "system") -> str:
    headers = ["System", "BLEU-2", "BLEU-4", "ROUGE-L", "METEOR", "Sel-F1", "Len", "#Sent"]
    row = [label, f"{summary.bleu2 * 100:.2f}", f"{summary.bleu4 * 100:.2f}", f"{summary.rouge_l * 100:.2f}",
           "-", f"{summary.selection_f1 * 100:.2f}", f"{summary.avg_length:.1f}", f"{summary.avg_sentences:.2f}"]
    return format_table(headers, [row])


def format_correlation(report: CorrelationReport) -> str:
    rows = [[b.bin_index, b.size, b.mean_f1, b.mean_bleu, b.mean_rouge] for b in report.bins]
    table = format_table(["Bin", "N", "F1", "BLEU-2", "ROUGE-L"], rows)

    def show(r: Optional[float]) -> str:
        return "undefined" if r is None else f"{r:.4f}"

    return f"{table}\nPearson r (F1 vs BLEU-2): {show(report.r_bleu)}\nPearson r (F1 vs ROUGE-L): {show(report.r_rouge)}"


def write_bins_csv(report: CorrelationReport, path: str) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["bin_index", "mean_f1", "mean_bleu", "mean_rouge"])
    for b in report.bins:
        writer.writerow([b.bin_index, f"{b.mean_f1:.6f}", f"{b.mean_bleu:.6f}", f"{b.mean_rouge:.6f}"])
    atomic_write_text(path, buffer.getvalue())
