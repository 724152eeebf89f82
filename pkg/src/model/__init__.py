from .params import ModelParams, FROZEN_PARAMS, init_params, param_shapes
from .network import (
    ModalContext,
    SequenceSample,
    encode,
    reward_score,
    reward_scores,
    pooled_score,
    policy_logprobs,
    response_logits,
    next_token_logits,
    value_estimates,
    critic_from_reward_model,
)
from .checkpoint import save_checkpoint, load_checkpoint, to_bytes, from_bytes
