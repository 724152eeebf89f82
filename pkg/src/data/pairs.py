"""
Preference-pair construction: sample k candidates per prompt from the SFT policy,
then label chosen/rejected with a verifier, the hidden gold reward, or the filler-biased surrogate judge.
"""
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .. import seeding
from ..config import JUDGE_LENGTH_BIAS, JUDGES, DecodeConfig
from ..errors import DataError, OpError
from ..model.params import ModelParams
from ..reward.types import PreferencePair
from ..sampling.decoding import generate
from .gold import judge_score
from .tasks import SyntheticTask, gold_response
from .verifiers import has_verifier, verify

logger = logging.getLogger(__name__)

Labeled = Tuple[Optional[Tuple[Tuple[int, ...], Tuple[int, ...]]], str]


@dataclass
class PairBuildResult:
    pairs: List[PreferencePair]
    skipped: Dict[str, int] = field(default_factory=dict)
    tasks_seen: int = 0

    @property
    def yield_fraction(self) -> float:
        return len(self.pairs) / self.tasks_seen if self.tasks_seen else 0.0

    def summary(self) -> Dict[str, object]:
        return {"pairs": len(self.pairs), "tasks": self.tasks_seen, "yield": round(self.yield_fraction, 6),
                "skipped": dict(sorted(self.skipped.items()))}


def label_by_verifier(task: SyntheticTask, candidates: Sequence[Tuple[int, ...]], gold_fallback: bool = True) -> Labeled:
    """chosen = first verified candidate (or the gold answer), rejected = first failing candidate."""
    if not has_verifier(task.kind):
        return None, "unverifiable"
    flags = [verify(task, c) for c in candidates]
    wrong = [c for c, ok in zip(candidates, flags) if not ok]
    right = [c for c, ok in zip(candidates, flags) if ok]
    if not wrong:
        return None, "all_correct"
    if right:
        return (right[0], wrong[0]), "ok"
    if gold_fallback:
        return (gold_response(task), wrong[0]), "ok_gold_fallback"
    return None, "none_correct"


def label_by_judge(task: SyntheticTask, candidates: Sequence[Tuple[int, ...]], length_bias: float) -> Labeled:
    """chosen/rejected = top/bottom distinct candidates by judge score; order of candidates is irrelevant."""
    distinct = sorted(set(tuple(c) for c in candidates), key=lambda c: (judge_score(task, c, length_bias), c))
    if len(distinct) < 2:
        return None, "identical_candidates"
    low, high = distinct[0], distinct[-1]
    if judge_score(task, low, length_bias) == judge_score(task, high, length_bias):
        return None, "tied_scores"
    return (high, low), "ok"


def build_pairs(
    policy: ModelParams,
    tasks: Sequence[SyntheticTask],
    k_candidates: int,
    judge: str,
    seed: int,
    decode: Optional[DecodeConfig] = None,
    gold_fallback: bool = True,
    judge_length_bias: float = JUDGE_LENGTH_BIAS,
    workers: int = 1,
) -> PairBuildResult:
    if k_candidates < 2:
        raise OpError("build_pairs", f"k_candidates must be >= 2, got {k_candidates}")
    if judge not in JUDGES:
        raise OpError("build_pairs", f"judge must be one of {JUDGES}, got {judge!r}")
    decode = decode or DecodeConfig()
    weights = policy.bind()

    def _process(task: SyntheticTask) -> Tuple[Optional[PreferencePair], str]:
        candidates = [
            generate(weights, task.prompt(), decode, seeding.derive_seed(seed, f"pairs/{task.task_id}/{j}"))
            for j in range(k_candidates)
        ]
        mode = judge if judge != "auto" else ("verifier" if has_verifier(task.kind) else "gold_reward")
        if mode == "verifier":
            labeled, reason = label_by_verifier(task, candidates, gold_fallback)
            source = "verifier"
        elif mode == "biased_judge":
            labeled, reason = label_by_judge(task, candidates, judge_length_bias)
            source = "judge"
        else:
            labeled, reason = label_by_judge(task, candidates, 0.0)
            source = "synthetic_gold"
        if labeled is None:
            return None, reason
        chosen, rejected = labeled
        pair = PreferencePair(
            pair_id=f"{task.task_id}/pair",
            prompt_tokens=task.prompt_tokens,
            chosen=tuple(chosen),
            rejected=tuple(rejected),
            domain_tag=task.domain_tag,
            source_tag=source,
            modal=task.modal,
        )
        return pair, reason

    # 1. Candidate generation and labeling, fanned out per task
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            outcomes = list(executor.map(_process, tasks))
    else:
        outcomes = [_process(t) for t in tasks]

    # 2. Sequential assembly with skip accounting
    pairs = [p for p, _ in outcomes if p is not None]
    skipped = Counter(reason for p, reason in outcomes if p is None)
    result = PairBuildResult(pairs, dict(skipped), len(tasks))
    if not pairs:
        raise DataError(f"no preference pairs produced from {len(tasks)} tasks (skipped: {dict(skipped)})")
    if skipped:
        logger.warning(f"Skipped {sum(skipped.values())} of {len(tasks)} tasks: {dict(skipped)}")
    logger.info(f"Built {len(pairs)} preference pairs from {len(tasks)} tasks (yield {result.yield_fraction:.2f})")
    return result
