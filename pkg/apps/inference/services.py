# ============================================================================
# apps/inference/services.py - Plan execution, constrained beam search, UNK repair
# ============================================================================

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, List, Optional, Sequence, Set, Tuple

import numpy as np

from config import LOG_EPS
from apps.corpus.schemas import Sample
from apps.corpus.services import KeyphraseBank
from apps.corpus.vocabulary import BOS_ID, EOS_ID, SNT_ID, UNK
from apps.encoder.services import EncoderState, KeyphraseMemory
from apps.numcore.recurrent import State
from apps.planner import services as planner
from apps.planner.schemas import PlanLimits
from apps.planner.services import PlanStep
from apps.realizer import services as realizer
from apps.training.model import PlanGenModel, PreparedSample
from shared.errors import PlanError
from .schemas import DecodeOptions, GenerationRecord

logger = logging.getLogger(__name__)

TERMINATORS = (SNT_ID, EOS_ID)


@dataclass
class DecodeContext:
    """Everything a decode step reads; fixed for one sample"""
    model: PlanGenModel
    prepared: PreparedSample
    encoder_state: EncoderState
    memory: KeyphraseMemory
    global_bit: Optional[int]
    replace_unk: bool = True

    def surface(self, token: int, attention: np.ndarray) -> List[str]:
        """Words `token` contributes to the output, UNK already repaired"""
        if token in TERMINATORS:
            return []
        word = self.prepared.sources.ext.token(token)
        if word == UNK and self.replace_unk:
            best = most_attended_phrase(attention, self.prepared.bank)
            if best is not None:
                return self.prepared.bank.entry_tokens(best)
        return [word]


def repeats_trigram(trigrams: Set[Tuple], tail: Tuple, words: Sequence) -> bool:
    window = tuple(tail)
    added = set()
    for word in words:
        if len(window) == 2:
            gram = (window[0], window[1], word)
            if gram in trigrams or gram in added:
                return True
            added.add(gram)
        window = (window + (word,))[-2:]
    return False


@dataclass
class BeamHypothesis:
    tokens: List[int]
    logprob: float
    layer_states: List[State]
    trigrams: Set[Tuple[int, int, int]]
    tail: Tuple[int, ...]
    bank_attention: List[np.ndarray] = field(default_factory=list)
    # word-level trigrams of the written output, across sentences
    surface_trigrams: Set[Tuple[str, str, str]] = field(default_factory=set)
    surface_tail: Tuple[str, ...] = ()

    @property
    def finished(self) -> bool:
        return bool(self.tokens) and self.tokens[-1] in TERMINATORS

    @property
    def score(self) -> float:
        """Length-normalized: mean log-probability per emitted token"""
        return self.logprob / max(len(self.tokens), 1)

    def blocks(self, token: int) -> bool:
        return len(self.tail) == 2 and (self.tail[0], self.tail[1], token) in self.trigrams

    def blocks_surface(self, words: Sequence[str]) -> bool:
        return repeats_trigram(self.surface_trigrams, self.surface_tail, words)

    def extend(self, token: int, logprob: float, layer_states: List[State],
               bank_attention: np.ndarray, words: Sequence[str] = ()) -> "BeamHypothesis":
        trigrams = self.trigrams
        if len(self.tail) == 2:
            trigrams = trigrams | {(self.tail[0], self.tail[1], token)}
        written = self.surface_tail + tuple(words)
        surface_trigrams = self.surface_trigrams | trigram_set(written)
        return BeamHypothesis(self.tokens + [token], self.logprob + logprob, layer_states, trigrams,
                              (self.tail + (token,))[-2:], self.bank_attention + [bank_attention],
                              surface_trigrams, written[-2:])


def trigram_set(history: Sequence) -> Set[Tuple]:
    return {tuple(history[i:i + 3]) for i in range(len(history) - 2)}


def start_hypothesis(layer_states: List[State], history: Sequence[int],
                     written: Sequence[str] = ()) -> BeamHypothesis:
    """history holds the token ids decoded so far, written the output words so far"""
    written = tuple(written)
    return BeamHypothesis([], 0.0, layer_states, trigram_set(history), tuple(history[-2:]),
                          surface_trigrams=trigram_set(written), surface_tail=written[-2:])


def _advance(hyp: BeamHypothesis, prev_token: int, step: PlanStep, style_vector: np.ndarray,
             ctx: DecodeContext):
    model = ctx.model
    y_prev = hyp.tokens[-1] if hyp.tokens else prev_token
    y_emb = model.token_embedding(y_prev, ctx.prepared.sources)
    states = realizer.realize_step(hyp.layer_states, y_emb, step.s, model.params)
    out = realizer.output_distribution(states[-1][0], y_emb, ctx.encoder_state, ctx.memory, style_vector,
                                       ctx.prepared.sources, model.params, model.config.logit_scale)
    return states, out


def _ranked_candidates(hyp: BeamHypothesis, probs: np.ndarray, limit: int,
                       surface: Optional[Callable[[int], List[str]]] = None) -> List[Tuple[int, float]]:
    """Best `limit` tokens by probability that carry mass and repeat no trigram.

    With `surface` given, a token is also skipped when its output words would
    repeat a word trigram of the written output.
    """
    picked = []
    for token in np.argsort(-probs, kind="stable"):
        token = int(token)
        if probs[token] <= 0.0:
            break
        if hyp.blocks(token):
            continue
        if surface is not None and hyp.blocks_surface(surface(token)):
            continue
        picked.append((token, float(np.log(max(probs[token], LOG_EPS)))))
        if len(picked) == limit:
            break
    return picked


def beam_search_sentence(layer_states: List[State], prev_token: int, step: PlanStep, style_vector: np.ndarray,
                         ctx: DecodeContext, beam_size: int, max_len: int,
                         history: Sequence[int] = (), written: Sequence[str] = ()) -> BeamHypothesis:
    """Decode one sentence; any extension repeating a trigram of the whole output is pruned"""
    if beam_size < 1 or max_len < 1:
        raise ValueError(f"beam_size and max_len must be positive, got {beam_size}, {max_len}")
    live = [start_hypothesis(layer_states, list(history), written)]
    completed: List[BeamHypothesis] = []
    for _ in range(max_len):
        candidates = []
        for hyp in live:
            states, out = _advance(hyp, prev_token, step, style_vector, ctx)
            attention = out.attn_bank.values
            surface = partial(ctx.surface, attention=attention)
            for token, logprob in _ranked_candidates(hyp, out.dist.values, beam_size, surface):
                candidates.append((hyp.logprob + logprob, hyp, token, logprob, states, attention))
        if not candidates:
            if not completed:
                best = live[0]
                completed.append(best.extend(EOS_ID, 0.0, best.layer_states, np.zeros(ctx.memory.size)))
                logger.debug("All extensions pruned; forced EOS")
            break
        candidates.sort(key=lambda c: -c[0])
        live = []
        for _, hyp, token, logprob, states, attention in candidates[:beam_size]:
            new = hyp.extend(token, logprob, states, attention, ctx.surface(token, attention))
            (completed if new.finished else live).append(new)
        if not live or len(completed) >= beam_size:
            break
    if not completed:
        completed = live
    return max(completed, key=lambda h: h.score)


def greedy_decode_sentence(layer_states: List[State], prev_token: int, step: PlanStep, style_vector: np.ndarray,
                           ctx: DecodeContext, max_len: int, history: Sequence[int] = (),
                           written: Sequence[str] = ()) -> BeamHypothesis:
    """Arg-max decoding under the same trigram constraint"""
    hyp = start_hypothesis(layer_states, list(history), written)
    for _ in range(max_len):
        states, out = _advance(hyp, prev_token, step, style_vector, ctx)
        attention = out.attn_bank.values
        ranked = _ranked_candidates(hyp, out.dist.values, 1, partial(ctx.surface, attention=attention))
        if not ranked:
            return hyp.extend(EOS_ID, 0.0, hyp.layer_states, np.zeros(ctx.memory.size))
        token, logprob = ranked[0]
        hyp = hyp.extend(token, logprob, states, attention, ctx.surface(token, attention))
        if hyp.finished:
            break
    return hyp


def most_attended_phrase(attention: np.ndarray, bank: KeyphraseBank) -> Optional[int]:
    """Content entry with the highest bank attention, lowest index on ties; None for an empty bank"""
    content = bank.content_indices
    if not content:
        return None
    return max(content, key=lambda k: (attention[k], -k))


def replace_unknown_tokens(tokens: Sequence[str], attention_records: Sequence[np.ndarray],
                           bank: KeyphraseBank) -> List[str]:
    """Swap each UNK for the tokens of the content phrase with the highest bank attention at that step"""
    if len(tokens) != len(attention_records):
        raise ValueError(f"{len(tokens)} tokens but {len(attention_records)} attention records")
    if UNK not in tokens:
        return list(tokens)
    if not bank.content_indices:
        logger.warning("UNK left in place: keyphrase bank has no content phrases")
        return list(tokens)
    repaired = []
    for token, attention in zip(tokens, attention_records):
        if token == UNK:
            repaired.extend(bank.entry_tokens(most_attended_phrase(attention, bank)))
        else:
            repaired.append(token)
    return repaired


def _oracle_steps(sample: Sample, ctx: DecodeContext) -> List[PlanStep]:
    if not sample.targets:
        raise PlanError(f"sample {sample.id}: oracle plan needs gold selections")
    model = ctx.model
    plan = planner.teacher_forced_plan(ctx.memory, ctx.encoder_state.final_state, model.params,
                                       sample.gold_selections, model.config.n_styles, ctx.global_bit)
    if model.config.n_styles >= 2:
        for step, style in zip(plan.steps, sample.gold_styles):
            step.style_onehot = planner.one_hot(model.config.n_styles, [style])
    return plan.steps


def generate(sample: Sample, model: PlanGenModel, options: Optional[DecodeOptions] = None) -> GenerationRecord:
    """Plan (predicted or oracle), then decode one sentence per plan step"""
    options = options or DecodeOptions()
    prepared = model.prepare(sample)
    enc, memory = model.encode(prepared)
    ctx = DecodeContext(model, prepared, enc, memory, model.global_bit(sample, options.global_style),
                        options.replace_unk)

    if options.oracle_plan:
        steps = _oracle_steps(sample, ctx)
    else:
        limits = PlanLimits(max_sentences=options.max_sentences, threshold=options.threshold)
        steps = planner.infer_plan(memory, enc.final_state, model.params, limits,
                                   model.config.n_styles, ctx.global_bit)

    ext = prepared.sources.ext
    layer_states = realizer.initial_generation_state(enc.final_state, model.params).layer_states
    prev_token = BOS_ID
    history: List[int] = []
    written: List[str] = []
    sentences: List[List[str]] = []
    for step in steps:
        style_vector = model.style_vector(step.style, ctx.global_bit)
        if options.greedy:
            hyp = greedy_decode_sentence(layer_states, prev_token, step, style_vector, ctx,
                                         options.max_sentence_tokens, history, written)
        else:
            hyp = beam_search_sentence(layer_states, prev_token, step, style_vector, ctx, options.beam,
                                       options.max_sentence_tokens, history, written)
        body = hyp.tokens[:-1] if hyp.finished else hyp.tokens
        words = ext.decode(body)
        if options.replace_unk:
            words = replace_unknown_tokens(words, hyp.bank_attention[:len(body)], prepared.bank)
        sentences.append(words)
        written.extend(words)
        history.extend(hyp.tokens)
        layer_states = hyp.layer_states
        prev_token = hyp.tokens[-1] if hyp.tokens else prev_token

    output = [token for sentence in sentences for token in sentence]
    return GenerationRecord(id=sample.id, output=output, plan=planner.plan_to_entries(steps), sentences=sentences)


# ----------------------------------------------------------------------------
# Corpus-level generation
# ----------------------------------------------------------------------------

_worker_model: Optional[PlanGenModel] = None
_worker_options: Optional[DecodeOptions] = None


def _init_worker(checkpoint_path: str, options: dict) -> None:
    global _worker_model, _worker_options
    from apps.training.checkpoint import load_checkpoint
    _worker_model = load_checkpoint(checkpoint_path)
    _worker_options = DecodeOptions.model_validate(options)


def _generate_in_worker(sample: Sample) -> GenerationRecord:
    return generate(sample, _worker_model, _worker_options)


def generate_corpus(samples: Sequence[Sample], model: PlanGenModel, options: Optional[DecodeOptions] = None,
                    workers: int = 1, checkpoint_path: Optional[str] = None) -> List[GenerationRecord]:
    """Generate for every sample; with workers > 1 a process pool is used and input order is kept"""
    options = options or DecodeOptions()
    if workers <= 1 or len(samples) <= 1:
        return [generate(sample, model, options) for sample in samples]
    if checkpoint_path is None:
        raise ValueError("a worker pool needs the checkpoint path to load the model in each worker")
    logger.info(f"Generating {len(samples)} samples with {workers} workers")
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                             initargs=(checkpoint_path, options.model_dump())) as pool:
        return list(pool.map(_generate_in_worker, samples, chunksize=1))
