import itertools

import numpy as np
import pytest

from src.config import ModelConfig
from src.data import vocab
from src.data.gold import word_weights
from src.data.tasks import generate_tasks
from src.model.network import SequenceSample
from src.model.params import init_params
from src.reward.types import PreferencePair

TINY_MODAL_DIM = 4


@pytest.fixture
def tiny_model_cfg():
    return ModelConfig(vocab_size=vocab.VOCAB_SIZE, hidden_dim=32, modal_dim=TINY_MODAL_DIM, max_positions=24)


@pytest.fixture
def params(tiny_model_cfg):
    return init_params(tiny_model_cfg, seed=0)


@pytest.fixture
def scoring_params(params):
    """Initialized params with a non-zero score head, so rewards are informative."""
    rng = np.random.default_rng(7)
    return params.replace({"score_head": rng.normal(0.0, 1.0, size=params["score_head"].shape)})


@pytest.fixture
def tasks():
    weights = {"arithmetic": 1.0, "instruction_constraint": 1.0, "modal_count": 0.5, "freeform_gold": 0.5}
    return generate_tasks(weights, 40, TINY_MODAL_DIM, seed=0)


@pytest.fixture
def chat_samples():
    """100 distinct freeform samples: one topic word prompt, two-word answers."""
    samples = []
    for i, a in enumerate(vocab.WORDS):
        for b in vocab.WORDS:
            samples.append(SequenceSample.of([vocab.BOS, vocab.CHAT, vocab.WORDS[i % 3]], [a, b, vocab.EOS]))
    return samples[:100]


@pytest.fixture
def ranked_words():
    """(best six, worst six) words under the hidden gold weights."""
    order = [vocab.WORDS[int(i)] for i in np.argsort(-word_weights("linear_v1"), kind="stable")]
    return order[:6], order[-6:]


@pytest.fixture
def preference_pairs(ranked_words):
    """108 pairs preferring a highly-weighted word over a poorly-weighted one, shuffled."""
    good, bad = ranked_words
    combos = list(itertools.product(vocab.WORDS[:3], good, bad))
    order = np.random.default_rng(0).permutation(len(combos))
    return [
        PreferencePair(f"pref-{i:03d}", (vocab.BOS, vocab.CHAT, combos[j][0]),
                       (combos[j][1], vocab.EOS), (combos[j][2], vocab.EOS))
        for i, j in enumerate(int(k) for k in order)
    ]
