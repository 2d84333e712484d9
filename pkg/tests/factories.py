# ============================================================================
# tests/factories.py - Hand-built samples and tiny configurations
# ============================================================================

from apps.corpus.schemas import Keyphrase, Sample, TargetSentence
from apps.training.schemas import TrainConfig


def tiny_config(**overrides) -> TrainConfig:
    values = dict(hidden=6, embed=4, layers=2, dropout=0.0, seed=7, batch_size=2, max_epochs=1, n_styles=3)
    values.update(overrides)
    return TrainConfig(**values)


def make_toy_sample(sample_id: str = "toy-1") -> Sample:
    """Two sentences over a three-phrase bank; selections include the <START> offset"""
    return Sample(
        id=sample_id,
        topic=["should", "foreign", "aid", "be", "cut", "?"],
        bank=[Keyphrase(tokens=["foreign", "aid"]), Keyphrase(tokens=["bargaining", "chip"]),
              Keyphrase(tokens=["budget"])],
        targets=[
            TargetSentence(tokens=["foreign", "aid", "is", "a", "bargaining", "chip", "."], selection=[1, 2], style=0),
            TargetSentence(tokens=["what", "about", "the", "budget", "?"], selection=[3], style=2),
        ],
    )
