"""
Causal sequence encoder with language-model, value and score heads.

Every position t embeds as x_t = token_embedding[tok] + position_embedding[t]; an optional
modal prefix embeds as tanh(obs @ modal_encoder) @ modal_projector. The mixer computes
    h_t = x_t + tanh(x_t W_in + c_t W_ctx + b),   c_t = mean(x_0..x_t)
so h_t depends only on positions <= t.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Union

import numpy as np

from ..autodiff import Tensor, ops
from ..errors import ModelError
from .params import ModelParams

logger = logging.getLogger(__name__)

Weights = Mapping[str, Tensor]
ParamsLike = Union[ModelParams, Weights]


@dataclass(frozen=True)
class ModalContext:
    """Stand-in for encoded image/video features."""
    observation: tuple
    present: bool = True

    @classmethod
    def from_vector(cls, values: Sequence[float]) -> "ModalContext":
        return cls(tuple(float(v) for v in values), True)


@dataclass(frozen=True)
class SequenceSample:
    prompt_tokens: tuple
    response_tokens: tuple = ()
    modal: Optional[ModalContext] = None

    @classmethod
    def of(cls, prompt: Sequence[int], response: Sequence[int] = (), modal: Optional[ModalContext] = None) -> "SequenceSample":
        return cls(tuple(int(t) for t in prompt), tuple(int(t) for t in response), modal)

    @property
    def has_modal(self) -> bool:
        return self.modal is not None and self.modal.present

    @property
    def prefix_len(self) -> int:
        return int(self.has_modal) + len(self.prompt_tokens)

    @property
    def length(self) -> int:
        return self.prefix_len + len(self.response_tokens)

    def with_response(self, response: Sequence[int]) -> "SequenceSample":
        return SequenceSample(self.prompt_tokens, tuple(int(t) for t in response), self.modal)


def _weights(params: ParamsLike) -> Weights:
    return params.bind() if isinstance(params, ModelParams) else params


def _causal_average(n: int) -> np.ndarray:
    """Row t averages rows 0..t."""
    return np.tril(np.ones((n, n))) / np.arange(1, n + 1)[:, None]


def _check_sample(w: Weights, sample: SequenceSample):
    vocab = w["token_embedding"].shape[0]
    tokens = sample.prompt_tokens + sample.response_tokens
    bad = [t for t in tokens if t < 0 or t >= vocab]
    if bad:
        raise ModelError(f"token ids {bad[:5]} outside vocabulary of size {vocab}")
    if sample.has_modal and len(sample.modal.observation) != w["modal_projector"].shape[0]:
        raise ModelError(
            f"modal observation has length {len(sample.modal.observation)}, "
            f"projector expects {w['modal_projector'].shape[0]}")
    if sample.length == 0:
        raise ModelError("sample has no positions to encode")
    if sample.length > w["position_embedding"].shape[0]:
        raise ModelError(f"sequence length {sample.length} exceeds {w['position_embedding'].shape[0]} positions")


def encode(params: ParamsLike, sample: SequenceSample) -> Tensor:
    """Hidden states [T x d] for the modal prefix, prompt and response positions."""
    w = _weights(params)
    _check_sample(w, sample)
    tokens = list(sample.prompt_tokens + sample.response_tokens)
    pieces = []
    if sample.has_modal:
        obs = Tensor(np.asarray(sample.modal.observation, dtype=np.float64).reshape(1, -1))
        pieces.append(ops.tanh(obs @ w["modal_encoder"]) @ w["modal_projector"])
    if tokens:
        pieces.append(ops.gather(w["token_embedding"], tokens))
    x = pieces[0] if len(pieces) == 1 else ops.concat(pieces, axis=0)
    n = sample.length
    x = x + ops.gather(w["position_embedding"], list(range(n)))
    ctx = Tensor(_causal_average(n)) @ x
    mixed = ops.tanh(x @ w["mixer_in"] + ctx @ w["mixer_ctx"] + w["mixer_bias"])
    return x + mixed


def _response_positions(sample: SequenceSample) -> List[int]:
    return list(range(sample.prefix_len, sample.length))


def pooled_score(w: Weights, hidden: Tensor) -> Tensor:
    """score_head applied to the mean over the given hidden rows."""
    pooled = ops.reshape(ops.mean(hidden, axis=0), (1, -1))
    return ops.reshape(pooled @ w["score_head"], ())


def reward_score(params: ParamsLike, sample: SequenceSample, pooling: str = "all") -> Tensor:
    """Scalar r(x, y) from mean-pooled hidden states ('all' positions or 'response' only)."""
    if not sample.response_tokens:
        raise ModelError("cannot score an empty response")
    w = _weights(params)
    hidden = encode(w, sample)
    if pooling == "response":
        hidden = ops.gather(hidden, _response_positions(sample))
    elif pooling != "all":
        raise ModelError(f"unknown pooling mode {pooling!r}")
    return pooled_score(w, hidden)


def _state_positions(sample: SequenceSample) -> List[int]:
    if not sample.response_tokens:
        raise ModelError("sample has no response tokens")
    if sample.prefix_len < 1:
        raise ModelError("the first response token needs a preceding prompt or modal position")
    # The state before response token i is the position just before it.
    return [p - 1 for p in _response_positions(sample)]


def response_logits(params: ParamsLike, sample: SequenceSample) -> Tensor:
    """lm_head logits [len(response) x V], row i predicting response token i."""
    w = _weights(params)
    hidden = encode(w, sample)
    return ops.gather(hidden, _state_positions(sample)) @ w["lm_head"]


def policy_logprobs(params: ParamsLike, sample: SequenceSample) -> Tensor:
    """log pi(a_t | s_t) of each realized response token."""
    logp = ops.log_softmax(response_logits(params, sample))
    return ops.gather(logp, list(sample.response_tokens), axis=-1)


def next_token_logits(params: ParamsLike, sample: SequenceSample) -> np.ndarray:
    """Logits for the token following `sample` (used by the decoder, never differentiated)."""
    w = _weights(params)
    hidden = encode(w, sample)
    last = hidden.data[-1:]
    return (last @ w["lm_head"].data)[0]


def value_estimates(params: ParamsLike, sample: SequenceSample) -> Tensor:
    """V(s_t) per response step: value_head over the causal mean of hidden states up to s_t."""
    w = _weights(params)
    hidden = encode(w, sample)
    pooled = Tensor(_causal_average(sample.length)) @ hidden
    states = ops.gather(pooled, _state_positions(sample))
    return ops.reshape(states @ w["value_head"], (-1,))


def critic_from_reward_model(rm: ModelParams) -> ModelParams:
    """Critic initialized from the reward model: shared backbone, score_head copied into value_head."""
    return rm.replace({"value_head": rm["score_head"]})


def reward_scores(params: ParamsLike, samples: Sequence[SequenceSample], pooling: str = "all", workers: int = 1) -> List[float]:
    """Scores a batch; each value equals scoring the sample alone."""
    w = _weights(params)

    def _score(s: SequenceSample) -> float:
        return reward_score(w, s, pooling).item()

    if workers <= 1 or len(samples) < 2:
        return [_score(s) for s in samples]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(_score, samples))
