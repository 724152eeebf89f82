import numpy as np
import pytest

from src.autodiff import ops
from src.config import DecodeConfig, ModelConfig
from src.data import vocab
from src.errors import ConfigError, ModelError
from src.model import (
    FROZEN_PARAMS,
    ModalContext,
    SequenceSample,
    critic_from_reward_model,
    encode,
    init_params,
    policy_logprobs,
    reward_score,
    reward_scores,
    value_estimates,
)
from src.model.network import response_logits
from src.sampling import generate

PROMPT = [vocab.BOS, vocab.digit(2), vocab.PLUS, vocab.digit(3)]


def test_init_is_deterministic_and_marks_frozen_tensors(tiny_model_cfg):
    a = init_params(tiny_model_cfg, seed=5)
    b = init_params(tiny_model_cfg, seed=5)
    assert a.identical(b)
    assert not a.identical(init_params(tiny_model_cfg, seed=6))
    for name in FROZEN_PARAMS:
        assert not a.is_trainable(name)
    assert a.is_trainable("score_head")


def test_hidden_dim_outside_range_is_rejected():
    with pytest.raises(ConfigError):
        init_params(ModelConfig(hidden_dim=16), seed=0)


def test_encode_shape_includes_modal_prefix(params):
    sample = SequenceSample.of(PROMPT, [vocab.ANSWER], ModalContext.from_vector([0.0, 1.0, 0.0, 1.0]))
    hidden = encode(params, sample)
    assert hidden.shape == (1 + len(PROMPT) + 1, params.hidden_dim)


def test_encoding_is_causal(params):
    a = encode(params, SequenceSample.of(PROMPT, [vocab.ANSWER, vocab.digit(5)])).data
    b = encode(params, SequenceSample.of(PROMPT, [vocab.ANSWER, vocab.digit(7)])).data
    np.testing.assert_array_equal(a[:-1], b[:-1])
    assert not np.array_equal(a[-1], b[-1])


def test_zero_score_head_scores_zero(params):
    assert reward_score(params, SequenceSample.of(PROMPT, [vocab.ANSWER, vocab.EOS])).item() == 0.0


def test_pooling_modes_differ(scoring_params):
    sample = SequenceSample.of(PROMPT, [vocab.ANSWER, vocab.digit(5), vocab.EOS])
    whole = reward_score(scoring_params, sample, "all").item()
    response_only = reward_score(scoring_params, sample, "response").item()
    assert whole != response_only
    with pytest.raises(ModelError):
        reward_score(scoring_params, sample, "max")


@pytest.mark.parametrize("sample", [
    SequenceSample.of(PROMPT, []),
    SequenceSample.of(PROMPT, [99]),
    SequenceSample.of(PROMPT, [vocab.FILLER] * 30),
    SequenceSample.of(PROMPT, [vocab.EOS], ModalContext.from_vector([1.0, 2.0])),
])
def test_invalid_samples_raise_model_error(params, sample):
    with pytest.raises(ModelError):
        reward_score(params, sample)


def test_batched_scores_equal_single_scores(scoring_params, chat_samples):
    samples = chat_samples[:12]
    single = [reward_score(scoring_params, s).item() for s in samples]
    assert reward_scores(scoring_params, samples) == single
    assert reward_scores(scoring_params, samples, workers=3) == single


def test_policy_logprobs_are_per_token_and_non_positive(params):
    sample = SequenceSample.of(PROMPT, [vocab.ANSWER, vocab.digit(5), vocab.EOS])
    logp = policy_logprobs(params, sample).data
    assert logp.shape == (3,)
    assert np.all(logp <= 0.0)


def test_critic_init_reproduces_reward_on_prefix(scoring_params):
    critic = critic_from_reward_model(scoring_params)
    sample = SequenceSample.of(PROMPT, [vocab.ANSWER, vocab.digit(5)])
    extended = sample.with_response(sample.response_tokens + (vocab.EOS,))
    values = value_estimates(critic, extended).data
    assert values.shape == (3,)
    assert values[-1] == pytest.approx(reward_score(scoring_params, sample).item(), rel=1e-9, abs=1e-12)


def test_replace_rejects_shape_changes(params):
    with pytest.raises(ModelError):
        params.replace({"score_head": np.zeros((3, 3))})
    with pytest.raises(ModelError):
        params.replace({"not_a_tensor": np.zeros(1)})


def test_params_are_read_only(params):
    with pytest.raises(ValueError):
        params["score_head"][0, 0] = 1.0


def test_uniform_logits_give_uniform_log_probs():
    small = init_params(ModelConfig(vocab_size=8, hidden_dim=32, modal_dim=4, max_positions=16), seed=0)
    flat = small.replace({"lm_head": np.zeros((32, 8))})
    sample = SequenceSample.of([0, 3, 5], [2, 7, 1])
    np.testing.assert_allclose(policy_logprobs(flat, sample).data, np.log(1 / 8), rtol=0, atol=1e-12)


def test_every_position_is_a_normalized_distribution(params):
    sample = SequenceSample.of(PROMPT, [vocab.ANSWER, vocab.digit(5), vocab.EOS])
    logp = ops.log_softmax(response_logits(params, sample)).data
    np.testing.assert_allclose(np.log(np.exp(logp).sum(axis=1)), 0.0, atol=1e-12)


def test_greedy_tokens_have_the_highest_log_prob(params):
    prompt = SequenceSample.of(PROMPT)
    sample = prompt.with_response(generate(params, prompt, DecodeConfig(greedy=True, max_len=5), seed=0))
    rows = ops.log_softmax(response_logits(params, sample)).data
    realized = policy_logprobs(params, sample).data
    assert np.all(realized >= rows.max(axis=1) - 1e-12)


def test_reward_forward_pass_is_deterministic(scoring_params):
    sample = SequenceSample.of(PROMPT, [vocab.ANSWER, vocab.digit(5), vocab.EOS],
                               ModalContext.from_vector([0.0, 1.0, 0.0, 1.0]))
    first = reward_score(scoring_params, sample).item()
    assert reward_score(scoring_params, sample).item() == first
    assert reward_score(scoring_params.bind(), sample).item() == first
    assert reward_score(scoring_params.replace({}), sample).item() == first
