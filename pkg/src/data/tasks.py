"""
Synthetic tasks with checkable ground truth: desk-scale stand-ins for math,
instruction-following, visual counting and open-ended chat prompts.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from .. import seeding
from ..errors import DataError
from ..model.network import ModalContext, SequenceSample
from . import vocab

logger = logging.getLogger(__name__)

TASK_KINDS = ("arithmetic", "instruction_constraint", "modal_count", "freeform_gold")
DOMAIN_OF_KIND = {
    "arithmetic": "reasoning",
    "instruction_constraint": "instruction_following",
    "modal_count": "video_surrogate",
    "freeform_gold": "general",
}

CONSTRAINT_KINDS = ("length", "include", "exclude")
MAX_OPERAND = 4
MAX_LENGTH_CONSTRAINT = 5


@dataclass(frozen=True)
class Constraint:
    kind: str
    value: int

    def to_dict(self) -> Dict[str, int]:
        return {"kind": self.kind, "value": self.value}


@dataclass(frozen=True)
class SyntheticTask:
    task_id: str
    kind: str
    prompt_tokens: Tuple[int, ...]
    modal: Optional[ModalContext] = None
    gold_answer: Tuple[int, ...] = ()
    constraint: Optional[Constraint] = None
    gold_reward_fn: str = "linear_v1"

    @property
    def domain_tag(self) -> str:
        return DOMAIN_OF_KIND[self.kind]

    def prompt(self) -> SequenceSample:
        return SequenceSample(self.prompt_tokens, (), self.modal)

    def sample(self, response=()) -> SequenceSample:
        return SequenceSample(self.prompt_tokens, tuple(int(t) for t in response), self.modal)


def _arithmetic(task_id: str, rng: np.random.Generator) -> SyntheticTask:
    a, b = (int(x) for x in rng.integers(0, MAX_OPERAND + 1, size=2))
    prompt = (vocab.BOS, vocab.digit(a), vocab.PLUS, vocab.digit(b))
    return SyntheticTask(task_id, "arithmetic", prompt, gold_answer=(vocab.digit(a + b),))


def _instruction(task_id: str, rng: np.random.Generator) -> SyntheticTask:
    kind = CONSTRAINT_KINDS[int(rng.integers(0, len(CONSTRAINT_KINDS)))]
    if kind == "length":
        k = int(rng.integers(1, MAX_LENGTH_CONSTRAINT + 1))
        prompt = (vocab.BOS, vocab.INSTR_LEN, vocab.digit(k))
        constraint = Constraint("length", k)
    else:
        word = vocab.WORDS[int(rng.integers(0, len(vocab.WORDS)))]
        marker = vocab.INSTR_INCLUDE if kind == "include" else vocab.INSTR_EXCLUDE
        prompt = (vocab.BOS, marker, word)
        constraint = Constraint(kind, word)
    return SyntheticTask(task_id, "instruction_constraint", prompt, constraint=constraint)


def _modal_count(task_id: str, rng: np.random.Generator, modal_dim: int) -> SyntheticTask:
    count = int(rng.integers(0, min(MAX_OPERAND, modal_dim) + 1))
    obs = np.zeros(modal_dim)
    obs[rng.permutation(modal_dim)[:count]] = 1.0
    obs = obs + rng.normal(0.0, 0.05, size=modal_dim)
    modal = ModalContext.from_vector(obs)
    return SyntheticTask(task_id, "modal_count", (vocab.BOS, vocab.COUNT), modal=modal,
                         gold_answer=(vocab.digit(count),))


def _freeform(task_id: str, rng: np.random.Generator) -> SyntheticTask:
    topic = vocab.WORDS[int(rng.integers(0, len(vocab.WORDS)))]
    return SyntheticTask(task_id, "freeform_gold", (vocab.BOS, vocab.CHAT, topic))


def generate_tasks(weights: Mapping[str, float], count: int, modal_dim: int, seed: int) -> List[SyntheticTask]:
    """Draws `count` tasks with kinds proportional to `weights`."""
    unknown = set(weights) - set(TASK_KINDS)
    if unknown:
        raise DataError(f"unknown task kinds {sorted(unknown)}")
    kinds = [k for k in TASK_KINDS if weights.get(k, 0.0) > 0]
    if not kinds or count < 1:
        raise DataError("task mix needs a positive count and at least one positive weight")
    probs = np.array([weights[k] for k in kinds], dtype=np.float64)
    probs /= probs.sum()

    rng = seeding.substream(seed, "tasks")
    tasks = []
    for i in range(count):
        kind = kinds[int(rng.choice(len(kinds), p=probs))]
        task_id = f"task-{i:05d}"
        if kind == "arithmetic":
            tasks.append(_arithmetic(task_id, rng))
        elif kind == "instruction_constraint":
            tasks.append(_instruction(task_id, rng))
        elif kind == "modal_count":
            tasks.append(_modal_count(task_id, rng, modal_dim))
        else:
            tasks.append(_freeform(task_id, rng))

    by_kind = {k: sum(t.kind == k for t in tasks) for k in kinds}
    logger.info(f"Generated {len(tasks)} synthetic tasks: {by_kind}")
    return tasks


def gold_response(task: SyntheticTask) -> Tuple[int, ...]:
    """A canonical correct response, ending with the stop token."""
    if task.kind in ("arithmetic", "modal_count"):
        return (vocab.ANSWER,) + task.gold_answer + (vocab.EOS,)
    if task.kind == "instruction_constraint":
        c = task.constraint
        if c.kind == "length":
            body = tuple(vocab.WORDS[i % len(vocab.WORDS)] for i in range(c.value))
        elif c.kind == "include":
            body = (c.value,)
        else:
            body = (next(w for w in vocab.WORDS if w != c.value),)
        return body + (vocab.EOS,)
    # Imported lazily: gold.py depends on this module.
    from .gold import best_freeform_words
    return best_freeform_words(task.gold_reward_fn) + (vocab.EOS,)
