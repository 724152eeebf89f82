"""
Best-of-N selection: sample N responses with consecutive seeds, keep the one the reward model scores highest.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from ..config import DecodeConfig
from ..errors import OpError
from ..model.network import SequenceSample, reward_score
from ..model.params import ModelParams
from .decoding import generate

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScoredCandidate:
    index: int
    response: Tuple[int, ...]
    rm_score: float
    seed: int
    length: int


@dataclass
class BestOfNResult:
    winner: ScoredCandidate
    candidates: List[ScoredCandidate]

    @property
    def mean_length(self) -> float:
        return float(np.mean([c.length for c in self.candidates]))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "winner": asdict(self.winner),
            "candidates": [asdict(c) for c in self.candidates],
            "mean_candidate_length": self.mean_length,
        }


def select_best(scores: Sequence[float]) -> int:
    """Index of the highest score; ties go to the lowest index."""
    best = 0
    for i, s in enumerate(scores):
        if s > scores[best]:
            best = i
    return best


def best_of_n(
    policy: ModelParams,
    rm: ModelParams,
    prompt: SequenceSample,
    n: int,
    decode: DecodeConfig,
    seed: int,
    pooling: str = "all",
    workers: int = 1,
) -> BestOfNResult:
    if n <= 0:
        raise OpError("best_of_n", f"n must be >= 1, got {n}")
    policy_w, rm_w = policy.bind(), rm.bind()

    def _candidate(i: int) -> ScoredCandidate:
        response = generate(policy_w, prompt, decode, seed + i)
        score = reward_score(rm_w, prompt.with_response(response), pooling).item()
        return ScoredCandidate(i, response, score, seed + i, len(response))

    if workers > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            candidates = list(executor.map(_candidate, range(n)))
    else:
        candidates = [_candidate(i) for i in range(n)]

    winner = candidates[select_best([c.rm_score for c in candidates])]
    logger.debug(f"BoN n={n}: winner #{winner.index} score={winner.rm_score:.4f}")
    return BestOfNResult(winner, candidates)
