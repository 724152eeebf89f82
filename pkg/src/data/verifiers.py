"""
Verifier functions: deterministic predicates comparing a response with a task's ground truth.
"""
import logging
from typing import Callable, Dict, Sequence

from ..errors import DataError
from . import vocab
from .tasks import SyntheticTask

logger = logging.getLogger(__name__)

Verifier = Callable[[SyntheticTask, Sequence[int]], bool]


def answer_span(response: Sequence[int]):
    """Tokens after the last answer delimiter (stop token removed), or None without a delimiter."""
    body = vocab.strip_stop(response)
    if vocab.ANSWER not in body:
        return None
    last = len(body) - 1 - body[::-1].index(vocab.ANSWER)
    return body[last + 1:]


def verify_answer(task: SyntheticTask, response: Sequence[int]) -> bool:
    span = answer_span(response)
    return span is not None and tuple(span) == tuple(task.gold_answer)


def verify_constraint(task: SyntheticTask, response: Sequence[int]) -> bool:
    body = vocab.strip_stop(response)
    c = task.constraint
    if c.kind == "length":
        return len(body) == c.value
    if c.kind == "include":
        return c.value in body
    if c.kind == "exclude":
        return len(body) > 0 and c.value not in body
    raise DataError(f"unknown constraint kind {c.kind!r} in {task.task_id}")


VERIFIERS: Dict[str, Verifier] = {
    "arithmetic": verify_answer,
    "modal_count": verify_answer,
    "instruction_constraint": verify_constraint,
}


def has_verifier(kind: str) -> bool:
    return kind in VERIFIERS


def verify(task: SyntheticTask, response: Sequence[int]) -> bool:
    """True when the response satisfies the task's ground truth; a missing delimiter is simply False."""
    if task.kind not in VERIFIERS:
        raise DataError(f"no verifier registered for task kind {task.kind!r}")
    return VERIFIERS[task.kind](task, response)
