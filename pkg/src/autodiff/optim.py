"""
Adam optimizer over named parameter sets with frozen/trainable masks.
"""
import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, Mapping, Optional, Tuple

import numpy as np

from .. import config
from ..errors import OpError
from .tensor import Tensor

if TYPE_CHECKING:
    from ..model.params import ModelParams

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def global_norm(grads: Mapping[str, Tensor]) -> float:
    return float(np.sqrt(sum(float(np.sum(g.data * g.data)) for g in grads.values())))


def sgd_adam_step(
    params: "ModelParams",
    grads: Mapping[str, Tensor],
    state: AdamState,
    lr: float,
    beta1: float = config.ADAM_BETA1,
    beta2: float = config.ADAM_BETA2,
    eps: float = config.ADAM_EPS,
    grad_clip: Optional[float] = None,
) -> Tuple["ModelParams", AdamState]:
    """One Adam update of every trainable tensor. Frozen tensors are returned untouched."""
    if not lr > 0:
        raise OpError("adam", f"learning rate must be positive, got {lr}")
    trainable = params.trainable_names()
    missing = [n for n in trainable if n not in grads]
    if missing:
        raise OpError("adam", f"no gradient for trainable parameters {missing}")

    coef = 1.0
    if grad_clip is not None:
        norm = global_norm({n: grads[n] for n in trainable})
        if norm > grad_clip:
            coef = grad_clip / norm

    t = state.step + 1
    new_m, new_v, updates = dict(state.m), dict(state.v), {}
    for name in trainable:
        g = grads[name].data * coef
        m = beta1 * state.m.get(name, 0.0) + (1.0 - beta1) * g
        v = beta2 * state.v.get(name, 0.0) + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        updates[name] = params[name] - lr * m_hat / (np.sqrt(v_hat) + eps)
        new_m[name], new_v[name] = m, v
    return params.replace(updates), AdamState(step=t, m=new_m, v=new_v)
