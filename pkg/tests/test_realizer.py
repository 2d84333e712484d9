import math

import numpy as np
import pytest

from apps.corpus.schemas import Keyphrase
from apps.corpus.services import KeyphraseBank
from apps.corpus.vocabulary import PAD_ID, UNK_ID, Vocabulary, RESERVED
from apps.numcore.recurrent import stacked_lstm_step
from apps.numcore.tensor import constant
from apps.realizer.extended import bank_scatter, build_copy_sources, build_extended_vocab
from apps.realizer.services import (
    generation_loss, initial_generation_state, mix_distributions, output_distribution, realize_step,
    realizer_layers,
)


@pytest.fixture
def setup(model, toy_sample):
    prepared = model.prepare(toy_sample)
    enc, memory = model.encode(prepared)
    states = initial_generation_state(enc.final_state, model.params).layer_states
    y_emb = model.token_embedding(model.vocab.id("foreign"), prepared.sources)
    return prepared, enc, memory, states, y_emb


def test_realize_step_shape_and_plan_sensitivity(model, setup, rng):
    _, _, _, states, y_emb = setup
    s1 = constant(rng.normal(size=6))
    s2 = constant(rng.normal(size=6))
    z1 = realize_step(states, y_emb, s1, model.params)[-1][0]
    z2 = realize_step(states, y_emb, s2, model.params)[-1][0]
    assert z1.shape == (6,)
    assert not np.allclose(z1.values, z2.values)


def test_zero_fusion_weights_feed_a_zero_input(model, setup, rng):
    _, _, _, states, y_emb = setup
    model.params["realizer.W_ws"].values[:] = 0.0
    model.params["realizer.W_ww"].values[:] = 0.0
    out = realize_step(states, y_emb, constant(rng.normal(size=6)), model.params)
    expected = stacked_lstm_step(constant(np.zeros(6)), states, realizer_layers(model.params))
    for (h, c), (h_ref, c_ref) in zip(out, expected):
        np.testing.assert_allclose(h.values, h_ref.values)
        np.testing.assert_allclose(c.values, c_ref.values)


def test_output_distribution_is_a_distribution(model, setup):
    prepared, enc, memory, states, y_emb = setup
    z = realize_step(states, y_emb, enc.final_state[0], model.params)[-1][0]
    out = output_distribution(z, y_emb, enc, memory, model.style_vector(0, None), prepared.sources, model.params)
    assert out.dist.shape == (len(prepared.sources.ext),)
    assert out.dist.values.sum() == pytest.approx(1.0, abs=1e-9)
    assert out.dist.values[PAD_ID] == 0.0
    for weights in (out.attn_input, out.attn_bank, out.gate):
        assert weights.values.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.all(weights.values >= 0)


def test_style_swap_changes_the_word_distribution(model, setup):
    prepared, enc, memory, states, y_emb = setup
    z = realize_step(states, y_emb, enc.final_state[0], model.params)[-1][0]
    dists = [output_distribution(z, y_emb, enc, memory, model.style_vector(style, None), prepared.sources,
                                 model.params).dist.values for style in range(3)]
    for a in range(3):
        for b in range(a + 1, 3):
            assert not np.allclose(dists[a], dists[b], rtol=0.0, atol=1e-12)


def test_bank_gate_is_closed_without_content(model, toy_sample):
    prepared = model.prepare(toy_sample.model_copy(update={"bank": [], "targets": []}))
    enc, memory = model.encode(prepared)
    y_emb = model.token_embedding(model.vocab.id("aid"), prepared.sources)
    out = output_distribution(enc.final_state[0], y_emb, enc, memory, model.style_vector(1, None),
                              prepared.sources, model.params)
    assert out.gate.values[2] == 0.0
    assert out.dist.values.sum() == pytest.approx(1.0, abs=1e-9)


def test_mixture_degenerate_gates():
    generation = constant([0.1, 0.2, 0.3, 0.4])
    copy_input = constant([0.0, 1.0, 0.0, 0.0])
    copy_bank = constant([0.0, 0.0, 0.5, 0.5])
    only_generate = mix_distributions(constant([1.0, 0.0, 0.0]), generation, copy_input, copy_bank)
    np.testing.assert_allclose(only_generate.values, generation.values)
    only_bank = mix_distributions(constant([0.0, 0.0, 1.0]), generation, copy_input, copy_bank)
    np.testing.assert_allclose(only_bank.values, copy_bank.values)


def test_bank_copy_spreads_over_phrase_tokens():
    vocab = Vocabulary(RESERVED + ["bargaining"])
    bank = KeyphraseBank([Keyphrase(tokens=["bargaining", "chip"])])
    ext = build_extended_vocab(vocab, ["topic"], bank)
    matrix = bank_scatter(ext, bank)
    row = matrix[1]
    assert row[ext.id("bargaining")] == 0.5
    assert row[ext.id("chip")] == 0.5
    assert row.sum() == 1.0
    assert not matrix[0].any() and not matrix[2].any()


def test_extended_vocab_orders_input_then_bank():
    vocab = Vocabulary(RESERVED + ["aid"])
    bank = KeyphraseBank([Keyphrase(tokens=["foreign", "aid"]), Keyphrase(tokens=["zloty"])])
    sources = build_copy_sources(vocab, ["aid", "kwacha", "foreign"], bank)
    ext = sources.ext
    assert ext.oov == ["kwacha", "foreign", "zloty"]
    assert ext.id("kwacha") == len(vocab)
    assert ext.id("unseen") == UNK_ID
    assert ext.input_id(ext.id("zloty")) == UNK_ID
    assert ext.decode(ext.encode(["aid", "zloty"])) == ["aid", "zloty"]
    np.testing.assert_array_equal(sources.input_matrix.sum(axis=1), [1.0, 1.0, 1.0])


def test_generation_loss_reference_values():
    onehot = [constant([0.0, 1.0, 0.0]), constant([0.0, 0.0, 1.0])]
    assert generation_loss(onehot, [1, 2]).item() == pytest.approx(0.0)
    uniform = [constant(np.full(8, 1 / 8))] * 3
    assert generation_loss(uniform, [0, 3, 7]).item() == pytest.approx(3 * math.log(8))
