import numpy as np
import pytest

from apps.corpus.synthetic import generate_synthetic_corpus
from apps.corpus.vocabulary import build_vocabulary
from apps.inference.schemas import DecodeOptions
from apps.inference.services import generate, generate_corpus
from apps.metrics.corruption import run_corruption_study
from apps.metrics.services import selection_f1
from apps.numcore.optim import OptimState
from apps.training.model import PlanGenModel
from apps.training.services import evaluate_loss, train_epoch
from factories import tiny_config

pytestmark = pytest.mark.slow

MAX_EPOCHS = 500
ORACLE_GREEDY = DecodeOptions(oracle_plan=True, greedy=True, max_sentence_tokens=40)


@pytest.fixture(scope="module")
def corpus():
    return generate_synthetic_corpus(seed=0, n_samples=64)


@pytest.fixture(scope="module")
def trained(corpus):
    """Train until teacher-forced accuracy reaches 99% or the epoch cap runs out"""
    config = tiny_config(hidden=64, embed=32, batch_size=8, dropout=0.0, seed=0)
    model = PlanGenModel(config, build_vocabulary(corpus, max_size=300))
    opt = OptimState.for_params(dict(model.params.items()), config.lr, config.acc_init, config.clip)
    rng = np.random.default_rng(config.seed)
    for _ in range(MAX_EPOCHS):
        train_epoch(model, corpus, config, opt, rng)
        if evaluate_loss(model, corpus, config).token_accuracy >= 0.99:
            break
    return model


def _gold_plan(sample):
    return [[k - 1 for k in t.selection] for t in sample.targets]


def test_overfit_reaches_token_accuracy(trained, corpus):
    assert evaluate_loss(trained, corpus, trained.config).token_accuracy >= 0.99


def test_oracle_greedy_reproduces_targets(trained, corpus):
    records = generate_corpus(corpus, trained, ORACLE_GREEDY)
    total = exact = 0
    for sample, record in zip(corpus, records):
        for target, sentence in zip(sample.targets, record.sentences):
            exact += sentence == list(target.tokens)
        total += len(sample.targets)
    assert exact / total >= 0.9


def test_inferred_plans_match_gold(trained, corpus):
    records = generate_corpus(corpus, trained, DecodeOptions(max_sentence_tokens=40))
    predicted = [[entry.selection for entry in record.plan] for record in records]
    assert selection_f1(predicted, [_gold_plan(s) for s in corpus]) >= 0.95

    styled = correct = 0
    for sample, record in zip(corpus, records):
        predicted_styles = [entry.style for entry in record.plan]
        for j, style in enumerate(sample.gold_styles):
            correct += j < len(predicted_styles) and predicted_styles[j] == style
        styled += max(len(sample.gold_styles), len(predicted_styles))
    assert correct / styled >= 0.95


def test_style_swap_changes_most_outputs(trained, corpus):
    n_styles = trained.config.n_styles
    changed = 0
    for sample in corpus:
        swapped = sample.model_copy(update={"targets": [
            t.model_copy(update={"style": (t.style + 1) % n_styles}) for t in sample.targets]})
        changed += generate(swapped, trained, ORACLE_GREEDY).output != generate(sample, trained, ORACLE_GREEDY).output
    assert changed > len(corpus) / 2


def test_corruption_lowers_bleu_and_tracks_selection_quality(trained, corpus):
    report = run_corruption_study(corpus, trained, ORACLE_GREEDY, seed=0)
    assert report.monotone_bleu
    assert report.correlation is not None and report.correlation.r_bleu > 0
