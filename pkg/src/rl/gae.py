"""
Rollout trajectories and generalized advantage estimation.
"""
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from ..errors import DataError, ShapeError
from ..model.network import SequenceSample

LOGPROB_TOLERANCE = 1e-9


def _vector(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Trajectory:
    """One sampled response: per-step log pi_old(a_t|s_t), V(s_t) and r_t."""
    sample: SequenceSample
    old_logprobs: np.ndarray
    values: np.ndarray
    rewards: np.ndarray
    ref_logprobs: Optional[np.ndarray] = None
    domain_tag: str = "general"
    rm_score: Optional[float] = None
    gold_reward: Optional[float] = None

    def __post_init__(self):
        for name in ("old_logprobs", "values", "rewards", "ref_logprobs"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, _vector(value))
        steps = len(self.sample.response_tokens)
        if steps < 1:
            raise DataError("trajectory needs at least one response token")
        lengths = {n: len(getattr(self, n)) for n in ("old_logprobs", "values", "rewards", "ref_logprobs")
                   if getattr(self, n) is not None}
        if any(n != steps for n in lengths.values()):
            raise ShapeError("trajectory", [(steps,)] + [(n,) for n in lengths.values()], f"per-step fields {lengths}")
        if np.any(self.old_logprobs > LOGPROB_TOLERANCE):
            raise DataError("trajectory log-probs must be <= 0")

    @property
    def actions(self) -> tuple:
        return self.sample.response_tokens

    @property
    def length(self) -> int:
        return len(self.sample.response_tokens)

    def with_rewards(self, rewards: Sequence[float], rm_score: Optional[float] = None) -> "Trajectory":
        return replace(self, rewards=rewards, rm_score=self.rm_score if rm_score is None else rm_score)


@dataclass(frozen=True)
class AdvantageTable:
    deltas: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray


def gae_arrays(rewards: Sequence[float], values: Sequence[float], gamma: float, beta: float) -> AdvantageTable:
    """
    delta_t = r_t + gamma V(s_{t+1}) - V(s_t)
    A_t     = delta_t + gamma beta A_{t+1}
    R_t     = A_t + V(s_t)
    with V(s_{T+1}) = A_{T+1} = 0.
    """
    r = np.asarray(rewards, dtype=np.float64).reshape(-1)
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    if r.shape != v.shape:
        raise ShapeError("gae", [r.shape, v.shape], "rewards and values must align")
    next_v = np.append(v[1:], 0.0)
    deltas = r + gamma * next_v - v
    adv = np.zeros_like(deltas)
    running = 0.0
    for t in range(len(deltas) - 1, -1, -1):
        running = deltas[t] + gamma * beta * running
        adv[t] = running
    return AdvantageTable(deltas, adv, adv + v)


def gae(traj: Trajectory, gamma: float, beta: float) -> AdvantageTable:
    return gae_arrays(traj.rewards, traj.values, gamma, beta)
