"""
PPO against a learned reward model: rollouts, reward assignment, GAE, then
one clipped policy step and one critic step per rollout batch.
"""
import logging
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .. import seeding
from ..autodiff import AdamState, Graph, ops, sgd_adam_step
from ..config import DecodeConfig, PPOConfig
from ..data.gold import gold_reward
from ..data.tasks import SyntheticTask
from ..errors import ModelError, OpError
from ..model.network import (
    ParamsLike,
    critic_from_reward_model,
    policy_logprobs,
    reward_score,
    value_estimates,
)
from ..model.params import ModelParams
from ..sampling.decoding import generate
from .gae import AdvantageTable, Trajectory, gae
from .losses import critic_loss, ppo_policy_loss

logger = logging.getLogger(__name__)

ADV_NORM_EPS = 1e-8


@dataclass
class PPOResult:
    policy: ModelParams
    critic: ModelParams
    log: List[Dict[str, Any]] = field(default_factory=list)


def assign_rewards(
    rm: ParamsLike,
    traj: Trajectory,
    mode: str = "terminal_only",
    kl_penalty_coeff: float = 0.0,
    pooling: str = "all",
) -> Trajectory:
    """Fills r_t from the reward model, optionally shaped by -coeff * (log pi - log pi_ref) per step."""
    steps = traj.length
    response = traj.sample.response_tokens
    if mode == "terminal_only":
        score = reward_score(rm, traj.sample, pooling).item()
        rewards = np.zeros(steps)
        rewards[-1] = score
    elif mode == "per_step":
        rewards = np.array([
            reward_score(rm, traj.sample.with_response(response[:t + 1]), pooling).item() for t in range(steps)
        ])
        score = float(rewards[-1])
    else:
        raise OpError("assign_rewards", f"unknown reward mode {mode!r}")

    if kl_penalty_coeff > 0:
        if traj.ref_logprobs is None:
            raise OpError("assign_rewards", "KL shaping needs reference log-probs on the trajectory")
        rewards = rewards - kl_penalty_coeff * (traj.old_logprobs - traj.ref_logprobs)
    return traj.with_rewards(rewards, rm_score=score)


def _check_vocab(policy: ModelParams, rm: ModelParams, ref: ModelParams):
    sizes = {"policy": policy.vocab_size, "reward model": rm.vocab_size, "reference": ref.vocab_size}
    if len(set(sizes.values())) != 1:
        raise ModelError(f"vocabulary sizes disagree: {sizes}")


def _normalize(adv: np.ndarray) -> np.ndarray:
    if adv.size < 2:
        return adv
    return (adv - adv.mean()) / (adv.std() + ADV_NORM_EPS)


def collect_rollouts(
    policy: ModelParams,
    critic: ModelParams,
    rm: ModelParams,
    ref: ModelParams,
    tasks: Sequence[SyntheticTask],
    cfg: PPOConfig,
    decode: DecodeConfig,
    seed: int,
    update: int,
    pooling: str = "all",
    workers: int = 1,
) -> List[Trajectory]:
    """Samples one response per task from an immutable policy snapshot and scores it."""
    policy_w, critic_w, rm_w, ref_w = policy.bind(), critic.bind(), rm.bind(), ref.bind()

    def _rollout(item: Tuple[int, SyntheticTask]) -> Trajectory:
        i, task = item
        prompt = task.prompt()
        response = generate(policy_w, prompt, decode, seeding.derive_seed(seed, f"rollout/{update}/{i}"))
        sample = prompt.with_response(response)
        traj = Trajectory(
            sample=sample,
            old_logprobs=policy_logprobs(policy_w, sample).data,
            values=value_estimates(critic_w, sample).data,
            rewards=np.zeros(len(response)),
            ref_logprobs=policy_logprobs(ref_w, sample).data,
            domain_tag=task.domain_tag,
            gold_reward=gold_reward(task, response),
        )
        return assign_rewards(rm_w, traj, cfg.reward_mode, cfg.kl_penalty_coeff, pooling)

    items = list(enumerate(tasks))
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(_rollout, items))
    return [_rollout(it) for it in items]


def _policy_step(policy: ModelParams, trajs: Sequence[Trajectory], old: np.ndarray, adv: np.ndarray,
                 cfg: PPOConfig, state: AdamState) -> Tuple[ModelParams, AdamState, float]:
    with Graph() as g:
        w = policy.bind(g)
        new = ops.concat([policy_logprobs(w, t.sample) for t in trajs], axis=0)
        loss = ppo_policy_loss(new, old, adv, cfg.clip_epsilon)
        grads = g.backward(loss)
    policy, state = sgd_adam_step(policy, grads, state, cfg.lr)
    return policy, state, loss.item()


def _critic_step(critic: ModelParams, trajs: Sequence[Trajectory], returns: np.ndarray,
                 cfg: PPOConfig, state: AdamState) -> Tuple[ModelParams, AdamState, float]:
    with Graph() as g:
        w = critic.bind(g)
        values = ops.concat([value_estimates(w, t.sample) for t in trajs], axis=0)
        loss = critic_loss(values, returns)
        grads = g.backward(loss)
    critic, state = sgd_adam_step(critic, grads, state, cfg.critic_lr)
    return critic, state, loss.item()


def _update_record(update: int, trajs: Sequence[Trajectory], policy_loss: float, critic_sum: float,
                   steps: int) -> Dict[str, Any]:
    by_domain: Dict[str, List[float]] = defaultdict(list)
    for t in trajs:
        by_domain[t.domain_tag].append(t.rm_score)
    golds = [t.gold_reward for t in trajs if t.gold_reward is not None]
    return {
        "update": update,
        "mean_reward_rm": float(np.mean([t.rm_score for t in trajs])),
        "mean_reward_gold": float(np.mean(golds)) if golds else None,
        "mean_kl": float(np.mean([np.sum(t.old_logprobs - t.ref_logprobs) for t in trajs])),
        "mean_len": float(np.mean([t.length for t in trajs])),
        "policy_loss": policy_loss,
        "critic_loss": critic_sum / steps,
        "critic_loss_sum": critic_sum,
        "reward_rm_by_domain": {k: float(np.mean(v)) for k, v in sorted(by_domain.items())},
    }


def ppo_train(
    policy_init: ModelParams,
    rm: ModelParams,
    ref: ModelParams,
    prompts: Sequence[SyntheticTask],
    cfg: PPOConfig,
    seed: int,
    decode: Optional[DecodeConfig] = None,
    critic_init: Optional[ModelParams] = None,
    pooling: str = "all",
    workers: int = 1,
) -> PPOResult:
    """
    Maximizes the learned reward of sampled responses.
    The critic starts from the reward model unless `critic_init` is given; `ref` is never updated.
    """
    cfg.validate()
    _check_vocab(policy_init, rm, ref)
    if not prompts:
        raise OpError("ppo_train", "needs at least one prompt")
    decode = decode or DecodeConfig()
    policy = policy_init
    critic = critic_init if critic_init is not None else critic_from_reward_model(rm)
    policy_state, critic_state = AdamState(), AdamState()
    log: List[Dict[str, Any]] = []
    logger.info(f"PPO: {cfg.updates} updates x {cfg.rollouts_per_update} rollouts over {len(prompts)} prompts")

    for update in range(1, cfg.updates + 1):
        # 1. Rollouts on prompts drawn from the task mix
        picks = seeding.substream(seed, f"ppo/prompts/{update}").integers(0, len(prompts), size=cfg.rollouts_per_update)
        tasks = [prompts[int(i)] for i in picks]
        trajs = collect_rollouts(policy, critic, rm, ref, tasks, cfg, decode, seed, update, pooling, workers)

        # 2. Advantages per trajectory, normalized over the batch
        tables: List[AdvantageTable] = [gae(t, cfg.gamma, cfg.gae_beta) for t in trajs]
        returns = np.concatenate([tb.returns for tb in tables])
        adv = np.concatenate([tb.advantages for tb in tables])
        if cfg.normalize_advantages:
            adv = _normalize(adv)
        denominators = [t.old_logprobs if cfg.ratio_denominator == "rollout_snapshot" else t.ref_logprobs for t in trajs]

        # 3. Policy and critic steps over minibatches of trajectories
        offsets = np.cumsum([0] + [t.length for t in trajs])
        policy_losses, critic_sum = [], 0.0
        for _ in range(cfg.policy_epochs):
            for lo in range(0, len(trajs), cfg.batch_size):
                hi = min(lo + cfg.batch_size, len(trajs))
                span = slice(offsets[lo], offsets[hi])
                old = np.concatenate(denominators[lo:hi])
                policy, policy_state, p_loss = _policy_step(policy, trajs[lo:hi], old, adv[span], cfg, policy_state)
                policy_losses.append(p_loss)
        for lo in range(0, len(trajs), cfg.batch_size):
            hi = min(lo + cfg.batch_size, len(trajs))
            critic, critic_state, c_loss = _critic_step(critic, trajs[lo:hi], returns[offsets[lo]:offsets[hi]], cfg, critic_state)
            critic_sum += c_loss

        record = _update_record(update, trajs, float(np.mean(policy_losses)), critic_sum, int(offsets[-1]))
        log.append(record)
        if update % cfg.log_every == 0 or update == cfg.updates:
            logger.info(
                f"PPO update {update}/{cfg.updates}: rm={record['mean_reward_rm']:.4f} "
                f"gold={record['mean_reward_gold']:.4f} kl={record['mean_kl']:.4f} len={record['mean_len']:.2f}"
            )

    return PPOResult(policy, critic, log)
