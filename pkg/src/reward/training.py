"""
Bradley-Terry reward-model training over the mean-pooled score head.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .. import seeding
from ..autodiff import Graph, Tensor, ops, sgd_adam_step, AdamState
from ..config import ModelConfig, RMTrainConfig
from ..data.filtering import length_filter
from ..data.vocab import VOCAB_SIZE
from ..errors import DataError, NonFiniteError
from ..model.network import ParamsLike, reward_score, reward_scores
from ..model.params import ModelParams, init_params
from .types import PreferencePair

logger = logging.getLogger(__name__)

Scalar = Union[Tensor, float]


def bt_loss(r_w: Scalar, r_l: Scalar) -> Tensor:
    """-log sigmoid(r_w - r_l), computed as a two-way log-softmax so large negative margins stay finite."""
    r_w, r_l = ops.reshape(r_w, (1, 1)), ops.reshape(r_l, (1, 1))
    if not (np.isfinite(r_w.data).all() and np.isfinite(r_l.data).all()):
        raise NonFiniteError("bt_loss", "reward scores must be finite")
    margin = r_w - r_l
    logits = ops.concat([margin, Tensor(np.zeros((1, 1)))], axis=1)
    return ops.reshape(ops.neg(ops.gather(ops.log_softmax(logits), [0], axis=-1)), ())


def pair_scores(params: ParamsLike, pairs: Sequence[PreferencePair], pooling: str = "all",
                workers: int = 1) -> Tuple[List[float], List[float]]:
    """(chosen scores, rejected scores) from the reward model."""
    chosen = reward_scores(params, [p.chosen_sample() for p in pairs], pooling, workers)
    rejected = reward_scores(params, [p.rejected_sample() for p in pairs], pooling, workers)
    return chosen, rejected


def pairwise_accuracy(params: ParamsLike, pairs: Sequence[PreferencePair], pooling: str = "all",
                      workers: int = 1) -> float:
    """Fraction of pairs with r(chosen) > r(rejected); exact ties count as incorrect."""
    if not pairs:
        raise DataError("pairwise_accuracy needs at least one pair")
    chosen, rejected = pair_scores(params, pairs, pooling, workers)
    return sum(c > r for c, r in zip(chosen, rejected)) / len(pairs)


@dataclass
class RMTrainResult:
    params: ModelParams
    log: List[Dict[str, Any]] = field(default_factory=list)
    train_pairs: List[PreferencePair] = field(default_factory=list)
    heldout_pairs: List[PreferencePair] = field(default_factory=list)
    removed_by_filter: int = 0

    @property
    def final_heldout_acc(self) -> Optional[float]:
        scored = [r["heldout_acc"] for r in self.log if r["heldout_acc"] is not None]
        return scored[-1] if scored else None


def batch_loss(params: ModelParams, batch: Sequence[PreferencePair], pooling: str) -> Tuple[float, Dict[str, Tensor]]:
    """Mean BT loss over a batch and its gradients."""
    with Graph() as g:
        w = params.bind(g)
        losses = [
            ops.reshape(bt_loss(reward_score(w, p.chosen_sample(), pooling),
                                reward_score(w, p.rejected_sample(), pooling)), (1,))
            for p in batch
        ]
        loss = ops.mean(ops.concat(losses, axis=0))
        grads = g.backward(loss)
    return loss.item(), grads


def _split(pairs: List[PreferencePair], eval_fraction: float, seed: int) -> Tuple[List[PreferencePair], List[PreferencePair]]:
    order = seeding.substream(seed, "rm/split").permutation(len(pairs))
    n_eval = min(max(1, int(round(eval_fraction * len(pairs)))), len(pairs) - 1)
    heldout = [pairs[int(i)] for i in order[:n_eval]]
    train = [pairs[int(i)] for i in order[n_eval:]]
    return train, heldout


def train_reward_model(
    pairs: Sequence[PreferencePair],
    cfg: RMTrainConfig,
    seed: int,
    init: Optional[ModelParams] = None,
    model_cfg: Optional[ModelConfig] = None,
    workers: int = 1,
) -> RMTrainResult:
    """Trains the score head and backbone with Adam; the frozen modal tensors never move."""
    cfg.validate()
    if cfg.lr < 0:
        raise DataError(f"rm.lr must be non-negative, got {cfg.lr}")

    # 1. Length constraint
    kept, removed = list(pairs), []
    if cfg.length_ratio_max is not None:
        kept, removed = length_filter(pairs, cfg.length_ratio_max)
    if len(kept) < 2:
        cause = (f"length_filter(ratio_max={cfg.length_ratio_max}) removed {len(removed)} of {len(pairs)} pairs"
                 if cfg.length_ratio_max is not None else f"only {len(pairs)} pairs supplied")
        raise DataError(f"reward training needs at least 2 pairs, {len(kept)} left: {cause}")

    # 2. Split and initialize
    train, heldout = _split(kept, cfg.eval_fraction, seed)
    params = init if init is not None else init_params(model_cfg or ModelConfig(vocab_size=VOCAB_SIZE), seed)
    batch_size = min(cfg.batch_size, len(train))
    batch_rng = seeding.substream(seed, "rm/batches")
    state = AdamState()
    logger.info(f"Training reward model on {len(train)} pairs ({len(heldout)} held out, batch {batch_size})")

    # 3. Optimize
    log: List[Dict[str, Any]] = []
    for step in range(1, cfg.max_steps + 1):
        idx = batch_rng.choice(len(train), size=batch_size, replace=False)
        loss, grads = batch_loss(params, [train[int(i)] for i in idx], cfg.pooling)
        if cfg.lr > 0:
            params, state = sgd_adam_step(params, grads, state, cfg.lr, grad_clip=cfg.grad_clip)

        evaluate = step % cfg.log_every == 0 or step == cfg.max_steps
        acc = pairwise_accuracy(params, heldout, cfg.pooling, workers) if evaluate else None
        log.append({"step": step, "loss": loss, "heldout_acc": acc, "lr": cfg.lr})
        if evaluate:
            logger.info(f"RM step {step}/{cfg.max_steps}: loss={loss:.4f} heldout_acc={acc:.3f}")

    return RMTrainResult(params, log, train, heldout, len(removed))
