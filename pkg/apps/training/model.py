# ============================================================================
# apps/training/model.py - Encoder + planner + realizer with teacher forcing
# ============================================================================

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from apps.corpus.schemas import Sample
from apps.corpus.services import KeyphraseBank, build_input_tokens
from apps.corpus.vocabulary import BOS_ID, SNT, Vocabulary
from apps.encoder import services as encoder
from apps.encoder.services import EncoderState, KeyphraseMemory
from apps.numcore import ops
from apps.numcore.params import ModelParams
from apps.numcore.tensor import Array, constant
from apps.planner import services as planner
from apps.realizer import services as realizer
from apps.realizer.extended import CopySources, build_copy_sources
from shared.errors import PlanError, ShapeError
from .schemas import TrainConfig

logger = logging.getLogger(__name__)


@dataclass
class PreparedSample:
    sample: Sample
    input_tokens: List[str]
    input_ids: List[int]
    bank: KeyphraseBank
    sources: CopySources


@dataclass
class SampleLosses:
    gen: Array
    sel: Array
    style: Array
    tokens: int
    correct: int


class PlanGenModel:
    """All trainable arrays plus the forward passes shared by training and decoding"""

    def __init__(self, config: TrainConfig, vocab: Vocabulary, params: Optional[ModelParams] = None):
        self.config = config
        self.vocab = vocab
        self.params = params or ModelParams.initialize(self.param_specs(config, len(vocab)), config.seed)

    @staticmethod
    def param_specs(config: TrainConfig, vocab_size: int):
        specs = encoder.param_specs(vocab_size, config.embed, config.hidden, config.title_encoder)
        specs.update(planner.param_specs(config.hidden, config.layers, 1 if config.global_style else 0,
                                         config.n_styles))
        specs.update(realizer.param_specs(vocab_size, config.embed, config.hidden, config.layers,
                                          config.style_dims))
        return specs

    # ------------------------------------------------------------------
    # Inputs
    # ------------------------------------------------------------------

    def prepare(self, sample: Sample) -> PreparedSample:
        input_tokens = build_input_tokens(sample)
        if not input_tokens:
            raise ShapeError(f"sample {sample.id} has an empty input")
        bank = KeyphraseBank(sample.bank)
        sources = build_copy_sources(self.vocab, input_tokens, bank)
        return PreparedSample(sample, input_tokens, self.vocab.encode(input_tokens), bank, sources)

    def encode(self, prepared: PreparedSample) -> Tuple[EncoderState, KeyphraseMemory]:
        if self.config.title_encoder:
            state = encoder.encode_title(prepared.input_ids, self.params)
        else:
            state = encoder.encode_input(prepared.input_ids, self.params)
        memory = encoder.encode_keyphrase_bank(prepared.bank, self.vocab, self.params)
        return state, memory

    def global_bit(self, sample: Sample, override: Optional[int] = None) -> Optional[int]:
        if not self.config.global_style:
            return None
        if override is not None:
            return override
        return sample.global_style if sample.global_style is not None else 1

    def style_vector(self, style: Optional[int], global_bit: Optional[int]) -> np.ndarray:
        """Realizer style input: style one-hot (when styles are on) then the global bit (when defined)"""
        parts = []
        if self.config.n_styles >= 2:
            parts.append(planner.one_hot(self.config.n_styles, [style or 0]))
        if global_bit is not None:
            parts.append(np.array([float(global_bit)]))
        return np.concatenate(parts) if parts else np.zeros(0)

    def token_embedding(self, ext_id: int, sources: CopySources) -> Array:
        return ops.take_row(self.params["embedding"], sources.ext.input_id(ext_id))

    # ------------------------------------------------------------------
    # Teacher-forced forward
    # ------------------------------------------------------------------

    def forward(self, sample: Sample, training: bool = False,
                rng: Optional[np.random.Generator] = None) -> SampleLosses:
        """Losses of one sample with gold selections, gold styles and gold tokens fed back"""
        if not sample.targets:
            raise PlanError(f"sample {sample.id} has no targets to train on")
        config = self.config
        dropout = config.dropout if training else 0.0
        prepared = self.prepare(sample)
        enc, memory = self.encode(prepared)
        bit = self.global_bit(sample)
        selections = sample.gold_selections
        for selection in selections:
            if any(k >= memory.size for k in selection):
                raise PlanError(f"sample {sample.id}: selection {selection} outside a bank of {memory.size}")
        if config.n_styles >= 2 and any(s >= config.n_styles for s in sample.gold_styles):
            raise PlanError(f"sample {sample.id}: style id outside the {config.n_styles} known styles")

        plan = planner.teacher_forced_plan(memory, enc.final_state, self.params, selections,
                                           config.n_styles, bit, dropout, rng, training)
        l_sel = planner.selection_loss(plan.scores, planner.gold_selection_vectors(memory, selections))
        if config.n_styles >= 2:
            l_style = planner.style_loss([step.style_dist for step in plan.steps], sample.gold_styles)
        else:
            l_style = constant(0.0)

        sources = prepared.sources
        layer_states = realizer.initial_generation_state(enc.final_state, self.params).layer_states
        y_prev = BOS_ID
        dists, gold_ids = [], []
        correct = 0
        for target, step in zip(sample.targets, plan.steps):
            style_vec = self.style_vector(target.style, bit)
            for token in list(target.tokens) + [SNT]:
                y_emb = self.token_embedding(y_prev, sources)
                layer_states = realizer.realize_step(layer_states, y_emb, step.s, self.params,
                                                     dropout, rng, training)
                out = realizer.output_distribution(layer_states[-1][0], y_emb, enc, memory, style_vec,
                                                   sources, self.params, config.logit_scale)
                gold = sources.ext.id(token)
                dists.append(out.dist)
                gold_ids.append(gold)
                correct += int(np.argmax(out.dist.values) == gold)
                y_prev = gold
        l_gen = realizer.generation_loss(dists, gold_ids)
        return SampleLosses(l_gen, l_sel, l_style, len(gold_ids), correct)

    def batch_loss(self, batch: Sequence[Sample], training: bool = False,
                   rng: Optional[np.random.Generator] = None):
        """Batch-averaged (gen, sel, style) and token counts"""
        gen = sel = style = constant(0.0)
        tokens = correct = 0
        for sample in batch:
            losses = self.forward(sample, training, rng)
            gen = ops.add(gen, losses.gen)
            sel = ops.add(sel, losses.sel)
            style = ops.add(style, losses.style)
            tokens += losses.tokens
            correct += losses.correct
        factor = 1.0 / len(batch)
        return ops.scale(gen, factor), ops.scale(sel, factor), ops.scale(style, factor), tokens, correct
