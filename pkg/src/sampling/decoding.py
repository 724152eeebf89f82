"""
Ancestral and greedy decoding from the policy's language-model head.
"""
import logging
from typing import Tuple

import numpy as np

from ..autodiff import Tensor, ops
from ..config import DecodeConfig
from ..model.network import ParamsLike, SequenceSample, next_token_logits
from ..model.params import ModelParams

logger = logging.getLogger(__name__)


def token_distribution(logits: np.ndarray, temperature: float) -> np.ndarray:
    """softmax(logits / temperature)."""
    return ops.softmax(Tensor(np.asarray(logits, dtype=np.float64) / temperature)).data


def sample_token(logits: np.ndarray, decode: DecodeConfig, rng: np.random.Generator) -> int:
    if decode.is_greedy:
        return int(np.argmax(logits))
    probs = token_distribution(logits, decode.temperature)
    return int(rng.choice(len(probs), p=probs))


def generate(policy: ParamsLike, prompt: SequenceSample, decode: DecodeConfig, seed: int) -> Tuple[int, ...]:
    """Samples a response until the stop token (kept as the last token) or max_len."""
    decode.validate()
    weights = policy.bind() if isinstance(policy, ModelParams) else policy
    rng = np.random.default_rng(seed)
    response = []
    for _ in range(decode.max_len):
        logits = next_token_logits(weights, prompt.with_response(response))
        token = sample_token(logits, decode, rng)
        response.append(token)
        if token == decode.stop_token:
            break
    return tuple(response)
