# ============================================================================
# apps/metrics/corruption.py - Oracle-plan corruption study
# ============================================================================

import logging
from typing import List, Optional, Sequence

import numpy as np

from apps.corpus.schemas import Sample
from apps.inference.schemas import DecodeOptions
from apps.inference.services import generate_corpus
from apps.training.model import PlanGenModel
from shared.utils import format_table, make_rng
from .schemas import CorruptionLevel, CorruptionReport, ScoredRecord
from .services import build_eval_records, plan_quality_correlation, score_record

logger = logging.getLogger(__name__)

CORRUPTION_LEVELS = (0.0, 0.25, 0.5, 0.75, 1.0)


def corrupt_selections(sample: Sample, fraction: float, rng: np.random.Generator) -> Sample:
    """Swap round(fraction * |selection|) gold entries of every sentence for random non-gold phrases.

    Replacements come from bank phrases no sentence selects; when those run out,
    phrases outside the current sentence are used. Targets keep their tokens.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must lie in [0, 1], got {fraction}")
    content = list(range(1, len(sample.bank) + 1))
    gold_anywhere = {k for selection in sample.gold_selections for k in selection}
    targets = []
    for target in sample.targets:
        selection = list(target.selection)
        n_swap = int(np.floor(fraction * len(selection) + 0.5))
        if n_swap:
            pool = [k for k in content if k not in gold_anywhere]
            if len(pool) < n_swap:
                pool += [k for k in content if k in gold_anywhere and k not in selection]
            n_swap = min(n_swap, len(pool))
            swapped = {int(i) for i in rng.choice(len(selection), size=n_swap, replace=False)}
            replacements = [pool[int(i)] for i in rng.choice(len(pool), size=n_swap, replace=False)]
            kept = [k for i, k in enumerate(selection) if i not in swapped]
            selection = kept + replacements
        targets.append(target.model_copy(update={"selection": sorted(set(selection))}))
    return sample.model_copy(update={"targets": targets})


def run_corruption_study(samples: Sequence[Sample], model: PlanGenModel, options: Optional[DecodeOptions] = None,
                         levels: Sequence[float] = CORRUPTION_LEVELS, seed: int = 0,
                         n_bins: int = 10) -> CorruptionReport:
    """Generate from increasingly corrupted oracle plans and score against the untouched references"""
    options = (options or DecodeOptions()).model_copy(update={"oracle_plan": True})
    rng = make_rng(seed)
    pooled: List[ScoredRecord] = []
    report_levels = []
    for fraction in levels:
        corrupted = [corrupt_selections(sample, fraction, rng) for sample in samples]
        generations = generate_corpus(corrupted, model, options)
        scored = [score_record(r) for r in build_eval_records(generations, samples)]
        pooled.extend(scored)
        level = CorruptionLevel(
            fraction=fraction,
            mean_f1=float(np.mean([s.selection_f1 for s in scored])),
            mean_bleu=float(np.mean([s.bleu2 for s in scored])),
            mean_rouge=float(np.mean([s.rouge_l for s in scored])),
        )
        logger.info(f"Corruption {fraction:.2f}: F1 {level.mean_f1:.4f}, BLEU-2 {level.mean_bleu:.4f}")
        report_levels.append(level)

    bins = min(n_bins, len(pooled))
    correlation = plan_quality_correlation(pooled, bins) if bins >= 2 else None
    return CorruptionReport(levels=report_levels, correlation=correlation)


def format_corruption(report: CorruptionReport) -> str:
    rows = [[f"{level.fraction:.2f}", level.mean_f1, level.mean_bleu, level.mean_rouge] for level in report.levels]
    text = format_table(["Corrupted", "F1", "BLEU-2", "ROUGE-L"], rows)
    if not report.monotone_bleu:
        text += "\nBLEU-2 is not monotonically non-increasing across levels"
    return text
