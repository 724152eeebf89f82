"""
Supervised warm start: maximum likelihood of gold responses under the language-model head.
"""
import logging
from typing import Any, Dict, List, Sequence, Tuple

from .. import seeding
from ..autodiff import AdamState, Graph, ops, sgd_adam_step
from ..config import SFTConfig
from ..data.tasks import SyntheticTask, gold_response
from ..errors import DataError
from ..model.network import SequenceSample, policy_logprobs
from ..model.params import ModelParams

logger = logging.getLogger(__name__)


def nll_loss(params: ModelParams, samples: Sequence[SequenceSample]):
    """Mean per-token negative log-likelihood of the responses, with gradients."""
    with Graph() as g:
        w = params.bind(g)
        logp = ops.concat([policy_logprobs(w, s) for s in samples], axis=0)
        loss = ops.neg(ops.mean(logp))
        grads = g.backward(loss)
    return loss.item(), grads


def supervised_finetune(
    params: ModelParams, tasks: Sequence[SyntheticTask], cfg: SFTConfig, seed: int
) -> Tuple[ModelParams, List[Dict[str, Any]]]:
    if not tasks:
        raise DataError("supervised_finetune needs at least one task")
    samples = [t.sample(gold_response(t)) for t in tasks]
    batch_size = min(cfg.batch_size, len(samples))
    rng = seeding.substream(seed, "sft/batches")
    state = AdamState()
    log: List[Dict[str, Any]] = []

    for step in range(1, cfg.steps + 1):
        idx = rng.choice(len(samples), size=batch_size, replace=False)
        loss, grads = nll_loss(params, [samples[int(i)] for i in idx])
        params, state = sgd_adam_step(params, grads, state, cfg.lr)
        log.append({"step": step, "loss": loss, "lr": cfg.lr})
        if step % cfg.log_every == 0 or step == cfg.steps:
            logger.info(f"SFT step {step}/{cfg.steps}: nll={loss:.4f}")
    return params, log
