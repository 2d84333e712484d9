import itertools
import math

import numpy as np
import pytest

from apps.corpus.schemas import Keyphrase
from apps.inference.schemas import DecodeOptions, GenerationRecord
from apps.metrics.corruption import corrupt_selections, format_corruption, run_corruption_study
from apps.metrics.schemas import ScoredRecord
from apps.metrics.services import (
    best_match_scores, bleu_score, build_eval_records, format_correlation, format_summary, pearson,
    plan_quality_correlation, rouge_l_score, sample_selection_f1, selection_f1, summarize, write_bins_csv,
)
from apps.planner.schemas import PlanEntry
from shared.errors import CorpusFormatError
from factories import make_toy_sample


def scored(index: int, f1: float, bleu: float, rouge: float) -> ScoredRecord:
    return ScoredRecord(id=str(index), bleu2=bleu, bleu4=bleu, rouge_l=rouge, selection_f1=f1, length=5,
                        n_sentences=1)


def wide_sample(sample_id: str = "toy-1"):
    sample = make_toy_sample(sample_id)
    return sample.model_copy(update={"bank": sample.bank + [Keyphrase(tokens=["tax"]), Keyphrase(tokens=["trade"])]})


# ----------------------------------------------------------------------------
# BLEU / ROUGE-L
# ----------------------------------------------------------------------------

def test_bleu_identity():
    tokens = "foreign aid is a bargaining chip .".split()
    assert bleu_score(tokens, [tokens], 2) == pytest.approx(1.0)
    assert bleu_score(tokens, [tokens], 4) == pytest.approx(1.0)


def test_bleu_partial_overlap():
    candidate, reference = ["a", "b", "c", "d"], ["a", "b", "c", "e"]
    assert bleu_score(candidate, [reference], 2) == pytest.approx(math.sqrt(0.75 * 2 / 3))
    assert bleu_score(candidate, [reference], 4) == 0.0


def test_bleu_brevity_penalty():
    assert bleu_score(["a", "b"], [["a", "b", "c", "d"]], 2) == pytest.approx(math.exp(-1.0))


def test_bleu_edge_cases():
    assert bleu_score([], [["a"]]) == 0.0
    assert bleu_score(["a"], [["a"]], 2) == 0.0
    with pytest.raises(ValueError):
        bleu_score(["a"], [["a"]], 3)
    with pytest.raises(ValueError):
        bleu_score(["a"], [])


def test_rouge_l():
    assert rouge_l_score(["a", "c", "b"], ["a", "b", "c"]) == pytest.approx(2 / 3)
    assert rouge_l_score(["x", "y"], ["a", "b"]) == 0.0
    assert rouge_l_score([], ["a"]) == 0.0
    with pytest.raises(ValueError):
        rouge_l_score(["a"], [])


def test_best_match_takes_the_closest_reference():
    candidate = ["a", "b", "c", "d"]
    scores = best_match_scores(candidate, [["x", "y", "z"], list(candidate)])
    assert scores == {"bleu2": pytest.approx(1.0), "bleu4": pytest.approx(1.0), "rouge_l": pytest.approx(1.0)}


# Hand fixture: (candidate, reference)
TEXT_CASES = [
    ("foreign aid is a bargaining chip", "foreign aid is a bargaining chip"),
    ("foreign aid is a chip", "foreign aid is a useful bargaining chip"),
    ("the the the the", "the cat sat on the mat"),
    ("the cat the cat", "the cat sat on the mat"),
    ("cat sat the mat on", "the cat sat on the mat"),
    ("we should cut the budget now", "we should not cut the budget"),
    ("a b c d e f g h", "a b c d"),
    ("a b", "a b c d e f"),
    ("x y z", "a b c"),
    ("a", "a"),
    ("a b c", "a b c"),
    ("a b c d", "a b c d"),
    ("b a d c", "a b c d"),
    ("tax cuts help the economy grow", "tax cuts do not help the economy"),
    ("i believe i believe i believe", "i believe foreign aid matters"),
    ("the budget grew by ten percent", "the budget grew by ten percent last year"),
    ("last year the budget grew", "the budget grew last year"),
    ("aid aid aid chip chip", "aid chip aid chip"),
    ("what about the budget ?", "what about the budget ?"),
    ("voters care about taxes and trade", "voters care about trade"),
]

# Hand fixture: (predicted plan, gold plan)
SELECTION_CASES = [
    ([[0, 1], [2]], [[0, 1], [2]]),
    ([[0]], [[1]]),
    ([[0, 1]], [[0], [1], [2]]),
    ([], [[0]]),
    ([[3]], []),
    ([], []),
    ([[0, 1, 2, 3]], [[0], [4]]),
    ([[1], [1]], [[1]]),
    ([[2, 5], [7]], [[5], [7, 9]]),
    ([[0], [2], [4]], [[1], [3], [5]]),
]


def _ngrams(tokens, n):
    return [tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


def _reference_bleu(candidate, reference, max_n):
    """Clipped precision by explicit one-to-one matching of reference n-grams"""
    if not candidate:
        return 0.0
    precisions = []
    for n in range(1, max_n + 1):
        grams = _ngrams(candidate, n)
        pool = _ngrams(reference, n)
        if not grams:
            return 0.0
        used = [False] * len(pool)
        matched = 0
        for gram in grams:
            for j, other in enumerate(pool):
                if not used[j] and other == gram:
                    used[j] = True
                    matched += 1
                    break
        if matched == 0:
            return 0.0
        precisions.append(matched / len(grams))
    c, r = len(candidate), len(reference)
    brevity = 1.0 if c > r else math.exp(1.0 - r / c)
    return brevity * math.prod(precisions) ** (1.0 / max_n)


def _is_subsequence(items, sequence):
    it = iter(sequence)
    return all(any(item == x for x in it) for item in items)


def _reference_rouge_l(candidate, reference):
    """Longest common subsequence found by trying every subsequence of the candidate"""
    lcs = 0
    for size in range(min(len(candidate), len(reference)), 0, -1):
        if any(_is_subsequence(combo, reference) for combo in itertools.combinations(candidate, size)):
            lcs = size
            break
    if lcs == 0:
        return 0.0
    precision, recall = lcs / len(candidate), lcs / len(reference)
    return 2 * precision * recall / (precision + recall)


def _reference_selection_f1(predicted, gold):
    pred = set(itertools.chain.from_iterable(predicted))
    ref = set(itertools.chain.from_iterable(gold))
    if not pred and not ref:
        return 1.0
    tp = sum(1 for k in pred if k in ref)
    return 2 * tp / (len(pred) + len(ref))


@pytest.mark.parametrize("candidate, reference", TEXT_CASES)
def test_sequence_metrics_match_brute_force(candidate, reference):
    candidate, reference = candidate.split(), reference.split()
    for max_n in (2, 4):
        assert abs(bleu_score(candidate, [reference], max_n) - _reference_bleu(candidate, reference, max_n)) < 1e-9
    assert abs(rouge_l_score(candidate, reference) - _reference_rouge_l(candidate, reference)) < 1e-9


@pytest.mark.parametrize("predicted, gold", SELECTION_CASES)
def test_selection_f1_matches_brute_force(predicted, gold):
    assert abs(sample_selection_f1(predicted, gold) - _reference_selection_f1(predicted, gold)) < 1e-9


def test_corpus_selection_f1_pools_the_fixture():
    predicted = [p for p, _ in SELECTION_CASES]
    gold = [g for _, g in SELECTION_CASES]
    tp = fp = fn = 0
    for p, g in SELECTION_CASES:
        pred = set(itertools.chain.from_iterable(p))
        ref = set(itertools.chain.from_iterable(g))
        tp, fp, fn = tp + len(pred & ref), fp + len(pred - ref), fn + len(ref - pred)
    assert abs(selection_f1(predicted, gold) - 2 * tp / (2 * tp + fp + fn)) < 1e-9


# ----------------------------------------------------------------------------
# Selection F1
# ----------------------------------------------------------------------------

def test_sample_selection_f1_unions_sentences():
    assert sample_selection_f1([[0, 1], [2]], [[0], [1, 3]]) == pytest.approx(4 / 6)
    assert sample_selection_f1([], []) == 1.0
    assert sample_selection_f1([[0]], []) == 0.0


def test_selection_f1_is_micro_averaged():
    predicted = [[[0, 1]], [[0]]]
    gold = [[[0, 1]], [[1, 2, 3]]]
    # tp = 2, fp = 1, fn = 3
    assert selection_f1(predicted, gold) == pytest.approx(4 / 8)
    with pytest.raises(ValueError):
        selection_f1(predicted, gold[:1])


# ----------------------------------------------------------------------------
# Correlation
# ----------------------------------------------------------------------------

def test_pearson():
    assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    assert pearson([1, 2, 3], [5, 5, 5]) is None
    with pytest.raises(ValueError):
        pearson([1], [1])


def test_correlation_of_a_metric_equal_to_f1():
    records = [scored(i, i / 22, i / 22, i / 22) for i in range(23)]
    report = plan_quality_correlation(list(reversed(records)), n_bins=10)
    assert [b.size for b in report.bins] == [3, 3, 3, 2, 2, 2, 2, 2, 2, 2]
    assert [b.bin_index for b in report.bins] == list(range(10))
    assert all(a.mean_f1 <= b.mean_f1 for a, b in zip(report.bins, report.bins[1:]))
    assert report.r_bleu == pytest.approx(1.0)
    assert report.r_rouge == pytest.approx(1.0)


def test_correlation_undefined_for_constant_metric():
    report = plan_quality_correlation([scored(i, i / 9, 0.3, i / 9) for i in range(10)], n_bins=5)
    assert report.r_bleu is None
    assert report.r_rouge == pytest.approx(1.0)
    assert "undefined" in format_correlation(report)


def test_correlation_needs_enough_records():
    with pytest.raises(ValueError):
        plan_quality_correlation([scored(i, 0.5, 0.5, 0.5) for i in range(4)], n_bins=5)
    with pytest.raises(ValueError):
        plan_quality_correlation([scored(i, 0.5, 0.5, 0.5) for i in range(4)], n_bins=1)


def test_bins_csv(tmp_path):
    report = plan_quality_correlation([scored(i, i / 3, i / 3, i / 3) for i in range(4)], n_bins=2)
    path = tmp_path / "bins.csv"
    write_bins_csv(report, str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "bin_index,mean_f1,mean_bleu,mean_rouge"
    assert len(lines) == 3


# ----------------------------------------------------------------------------
# Corpus layer
# ----------------------------------------------------------------------------

def test_eval_records_pair_by_id():
    reference = make_toy_sample()
    generation = GenerationRecord(id="toy-1", output="foreign aid is a bargaining chip .".split(),
                                  plan=[PlanEntry(selection=[0, 1], style=0)],
                                  sentences=["foreign aid is a bargaining chip .".split()])
    records = build_eval_records([generation], [reference])
    assert records[0].gold_plan == [[0, 1], [2]]
    assert records[0].references[0][-1] == "?"

    summary, per_record = summarize(records)
    assert summary.samples == 1
    assert per_record[0].selection_f1 == pytest.approx(0.8)
    assert summary.selection_f1 == pytest.approx(0.8)
    assert summary.avg_sentences == 1.0
    assert "METEOR" in format_summary(summary)


def test_eval_records_reject_unknown_id():
    generation = GenerationRecord(id="missing", output=["a"], plan=[])
    with pytest.raises(CorpusFormatError) as excinfo:
        build_eval_records([generation], [make_toy_sample()])
    assert excinfo.value.field == "id"


def test_summarize_rejects_empty():
    with pytest.raises(ValueError):
        summarize([])


# ----------------------------------------------------------------------------
# Corruption
# ----------------------------------------------------------------------------

def test_no_corruption_keeps_selections():
    sample = wide_sample()
    assert corrupt_selections(sample, 0.0, np.random.default_rng(0)) == sample


def test_full_corruption_uses_unselected_phrases():
    sample = wide_sample()
    corrupted = corrupt_selections(sample, 1.0, np.random.default_rng(0))
    assert corrupted.targets[0].selection == [4, 5]
    assert len(corrupted.targets[1].selection) == 1
    assert corrupted.targets[1].selection[0] in (4, 5)
    assert [t.tokens for t in corrupted.targets] == [t.tokens for t in sample.targets]


def test_half_corruption_rounds_up():
    corrupted = corrupt_selections(wide_sample(), 0.5, np.random.default_rng(3))
    first = set(corrupted.targets[0].selection)
    assert len(first & {1, 2}) == 1 and len(first & {4, 5}) == 1
    assert corrupted.targets[1].selection[0] in (4, 5)


def test_corruption_falls_back_to_other_sentences():
    corrupted = corrupt_selections(make_toy_sample(), 1.0, np.random.default_rng(0))
    assert 3 in corrupted.targets[0].selection
    assert set(corrupted.targets[1].selection) <= {1, 2}


def test_corruption_rejects_bad_fraction():
    with pytest.raises(ValueError):
        corrupt_selections(make_toy_sample(), 1.5, np.random.default_rng(0))


def test_corruption_study(toy_model):
    samples = [wide_sample("a"), wide_sample("b")]
    options = DecodeOptions(beam=1, max_sentence_tokens=4)
    report = run_corruption_study(samples, toy_model, options, levels=(0.0, 1.0), n_bins=2)
    assert [level.fraction for level in report.levels] == [0.0, 1.0]
    assert report.levels[0].mean_f1 == pytest.approx(1.0)
    assert report.levels[1].mean_f1 == 0.0
    assert report.correlation is not None and len(report.correlation.bins) == 2
    assert "Corrupted" in format_corruption(report)
