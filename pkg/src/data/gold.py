"""
Hidden gold reward and the surrogate pairwise judge.

The gold reward is a correctness bonus plus a fixed random linear functional over word
counts, squashed into [0, 1]. The judge adds a per-filler-token bonus on top, modeling
the length preference of LLM judges; only biased_judge-mode pair labeling uses it.
"""
from functools import lru_cache
from typing import Sequence, Tuple

import numpy as np

from .. import seeding
from . import vocab
from .tasks import SyntheticTask
from .verifiers import has_verifier, verify

CORRECTNESS_WEIGHT = 0.8


@lru_cache(maxsize=8)
def word_weights(fn_id: str) -> np.ndarray:
    weights = seeding.substream(0, f"gold/{fn_id}").normal(0.0, 1.0, size=len(vocab.WORDS))
    weights.setflags(write=False)
    return weights


def style_score(response: Sequence[int], fn_id: str = "linear_v1") -> float:
    w = word_weights(fn_id)
    total = sum(w[t - vocab.WORDS[0]] for t in vocab.strip_stop(response) if t in vocab.WORDS)
    return float(1.0 / (1.0 + np.exp(-total)))


def gold_reward(task: SyntheticTask, response: Sequence[int]) -> float:
    """Ground-truth quality in [0, 1]."""
    style = style_score(response, task.gold_reward_fn)
    if has_verifier(task.kind):
        return CORRECTNESS_WEIGHT * float(verify(task, response)) + (1.0 - CORRECTNESS_WEIGHT) * style
    return style


def judge_score(task: SyntheticTask, response: Sequence[int], length_bias: float) -> float:
    fillers = sum(1 for t in vocab.strip_stop(response) if t == vocab.FILLER)
    return gold_reward(task, response) + length_bias * fillers


def best_freeform_words(fn_id: str = "linear_v1") -> Tuple[int, ...]:
    """The two highest-weighted words."""
    order = np.argsort(-word_weights(fn_id), kind="stable")[:2]
    return tuple(vocab.WORDS[int(i)] for i in order)
