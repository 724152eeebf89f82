"""
Clipped policy surrogate and critic regression losses.
"""
from typing import Union

import numpy as np

from ..autodiff import Tensor, ops
from ..errors import OpError, ShapeError

Vector = Union[Tensor, np.ndarray, list]


def ppo_policy_loss(new_logprobs: Vector, old_logprobs: Vector, advantages: Vector, epsilon: float) -> Tensor:
    """-mean_t min(rho_t A_t, clip(rho_t, 1-eps, 1+eps) A_t) with rho_t = exp(new - old)."""
    if not epsilon > 0:
        raise OpError("ppo_policy_loss", f"epsilon must be positive, got {epsilon}")
    new, old, adv = ops.reshape(new_logprobs, (-1,)), ops.reshape(old_logprobs, (-1,)), ops.reshape(advantages, (-1,))
    if not new.shape == old.shape == adv.shape:
        raise ShapeError("ppo_policy_loss", [new.shape, old.shape, adv.shape])
    ratio = ops.exp(new - old)
    unclipped = ratio * adv
    clipped = ops.clip(ratio, 1.0 - epsilon, 1.0 + epsilon) * adv
    return ops.neg(ops.mean(ops.minimum(unclipped, clipped)))


def critic_loss(values: Vector, returns: Vector) -> Tensor:
    """Sum over steps of (V(s_t) - R_t)^2."""
    v, r = ops.reshape(values, (-1,)), ops.reshape(returns, (-1,))
    if v.shape != r.shape:
        raise ShapeError("critic_loss", [v.shape, r.shape])
    return ops.sum(ops.square(v - r))
